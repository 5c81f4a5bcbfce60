"""Electron coherence under CPMG: bath plateau, sharp dips, and the N-sweep.

A handful of weakly coupled nuclear spins barely touch the electron coherence
over most of the pulse-spacing range, but each spin imprints a sharp dip where
the pulse spacing is resonant with its conditional precession.  Sweeping the
pulse number at a fixed resonant spacing turns the dip into a full cosine
oscillation whose period measures a_perp directly.
"""

import numpy as np

from ddread import (
    CpmgSequence,
    FieldConfig,
    coherence_bath,
    effective_frame,
    find_dips,
    oscillation_period,
    scan_n,
    scan_tau,
    spin_from_axial_components,
)

TWO_PI_KHZ = 2.0 * np.pi * 1e3

field = FieldConfig(b_magnitude=305e-4)  # 305 G along the NV axis

# Small bath: (a_z, a_perp) in kHz for each nuclear spin
bath = [
    spin_from_axial_components(az * TWO_PI_KHZ, ap * TWO_PI_KHZ, field)
    for az, ap in [(330.0, 200.0), (240.0, 130.0), (160.0, 80.0), (90.0, 45.0)]
]

print("bath of", len(bath), "weakly coupled nuclear spins at 305 G")
for spin in bath:
    frame = effective_frame(spin, field)
    print(f"  omega/2pi = {frame.omega / TWO_PI_KHZ:7.1f} kHz, "
          f"a_perp/2pi = {frame.a_perp / TWO_PI_KHZ:6.1f} kHz")

# --- tau sweep at N = 12: plateau with isolated dips -----------------------
curve = scan_tau(bath, field, 12, (150e-9, 650e-9), 1e-9)
dips = find_dips(curve)
print(f"\nCPMG-12 tau sweep over {curve.abscissa[0] * 1e9:.0f}-"
      f"{curve.abscissa[-1] * 1e9:.0f} ns:")
print(f"  plateau fraction (L > 0.8): {np.mean(curve.values > 0.8):.2f}")
print(f"  {len(dips)} dips found:")
for tau, depth in dips:
    print(f"    tau = {tau * 1e9:6.1f} ns, L_min = {depth:+.3f}")

# --- the same sweep with a Hahn echo hides the structure -------------------
hahn = scan_tau(bath, field, 1, (150e-9, 650e-9), 1e-9)
print(f"\nHahn echo (N = 1) over the same range: "
      f"{len(find_dips(hahn))} dips, min L = {hahn.values.min():.3f}")

# --- N sweep at the strongest spin's resonance -----------------------------
target = bath[0]
frame = effective_frame(target, field)
tau_res = np.pi / (2.0 * frame.omega)
nsweep = scan_n([target], field, tau_res, 40, propagator_mode="magnus")
period = oscillation_period(nsweep)
print(f"\nN sweep at tau = {tau_res * 1e9:.1f} ns (resonant with the "
      f"{frame.a_perp / TWO_PI_KHZ:.0f} kHz spin):")
print(f"  L(N) ~ cos(a_perp N / omega); fitted period = {period:.2f} pulses")
print(f"  prediction 2 pi omega / a_perp = "
      f"{2.0 * np.pi * frame.omega / frame.a_perp:.2f} pulses")
