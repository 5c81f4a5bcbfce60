"""Tuning a CPMG block from weak to projective nuclear-spin measurement.

One readout cycle maps the electron optical outcome onto a pair of Kraus
operators acting on the nuclear spin.  The conditional phase per cycle is set
by N and tau; at 2 N Phi = pi/2 the two Kraus operators become orthogonal
rank-1 projectors onto the locked states and the cycle is a projective,
quantum-non-demolition measurement.
"""

import numpy as np

from ddread import (
    CpmgSequence,
    FieldConfig,
    entanglement_vs_n,
    measurement_channel,
    spin_from_frame_components,
)

TWO_PI_KHZ = 2.0 * np.pi * 1e3

field = FieldConfig(b_magnitude=691e-4)  # 691 G
# Working point: omega = 2 pi / (4 x 248 ns), a_perp = pi omega / 24 so that
# 2 N Phi = pi/2 exactly at N = 12
a_par = 541.7443183523178 * TWO_PI_KHZ
a_perp = 131.95533659231322 * TWO_PI_KHZ
spin = spin_from_frame_components(a_par, a_perp, field)
tau = 248e-9

print("measurement strength vs pulse number (tau = 248 ns):")
print(f"{'N':>4} {'sv_1(K0)':>10} {'entropy/bits':>13} {'phase 2NPhi/pi':>15}")
ns, entropy, phases = entanglement_vs_n(spin, field, tau, 24, "magnus")
for n in (1, 2, 4, 8, 12, 16, 24):
    ch = measurement_channel(spin, field, CpmgSequence(n, tau), "magnus")
    sv = np.linalg.svd(ch.kraus_0, compute_uv=False)
    print(f"{n:>4} {sv[1]:>10.4f} {entropy[n - 1]:>13.4f} "
          f"{phases[n - 1] / np.pi:>15.4f}")

ch = measurement_channel(spin, field, CpmgSequence(12, tau), "magnus")
print("\nN = 12 is projective: K0 annihilates one locked state, K1 the other")
print(f"  |K0 v_down| = {np.linalg.norm(ch.kraus_0 @ ch.basis_down):.2e}")
print(f"  |K1 v_up|   = {np.linalg.norm(ch.kraus_1 @ ch.basis_up):.2e}")

# QND check: repeated cycles keep returning the same outcome
rho = np.outer(ch.basis_up, ch.basis_up.conj())
outcome = 0 if ch.outcome_probability(0, rho) > 0.5 else 1
p_min = 1.0
for _ in range(1000):
    p_min = min(p_min, ch.outcome_probability(outcome, rho))
    rho = ch.apply(outcome, rho)
print(f"  min repeat probability over 1000 cycles: {p_min:.9f}")
