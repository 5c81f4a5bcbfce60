"""Measurement channel of one readout cycle and the photon-trace Monte Carlo.

One cycle is: electron prepared in an equal superposition, CPMG conditional
evolution, a final pi/2 rotation in the conjugate quadrature, optical readout
of the electron.  Tracing out the electron leaves a two-outcome Kraus channel
on the nucleus whose strength runs from no measurement to fully projective as
the conditional phase grows.

Long photon traces are produced by chaining many 40,000-cycle points; each
point draws from its own counter-based RNG substream so traces are
reproducible bit for bit regardless of how points are scheduled.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .sequence import CpmgSequence
from .spincore import (
    DEFAULT_CONSTANTS,
    FieldConfig,
    HyperfineSpin,
    PhysicalConstants,
    conditional_propagator_exact,
    conditional_propagator_magnus,
    effective_frame,
    spin_operator,
)

_H_GATE = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)


@dataclass(frozen=True)
class MeasurementChannel:
    """Two-outcome Kraus pair on the nuclear spin.

    Outcome 0 is the optically bright electron class, outcome 1 the dark one.
    ``basis_up``/``basis_down`` are the I_perp eigenstates the channel pins in
    the projective limit; kept so the trace engine can label hidden states.
    """

    kraus_0: np.ndarray
    kraus_1: np.ndarray
    basis_up: np.ndarray
    basis_down: np.ndarray

    def completeness_defect(self) -> float:
        k0, k1 = self.kraus_0, self.kraus_1
        return float(np.linalg.norm(
            k0.conj().T @ k0 + k1.conj().T @ k1 - np.eye(2)
        ))

    def outcome_probability(self, outcome: int, rho: np.ndarray) -> float:
        k = self.kraus_0 if outcome == 0 else self.kraus_1
        return float(np.real(np.trace(k @ rho @ k.conj().T)))

    def apply(self, outcome: int, rho: np.ndarray) -> np.ndarray:
        k = self.kraus_0 if outcome == 0 else self.kraus_1
        post = k @ rho @ k.conj().T
        return post / np.real(np.trace(post))


def measurement_channel(
    spin: HyperfineSpin,
    fieldcfg: FieldConfig,
    seq: CpmgSequence,
    propagator_mode: str = "exact",
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
) -> MeasurementChannel:
    """Kraus pair induced on the nucleus by one ramsey-CPMG-readout cycle.

    The electron starts in |0>, is rotated to (|0>+|1>)/sqrt(2), picks up the
    conditional evolution |0><0| x U_minus + |1><1| x U_plus, and is rotated
    back by the conjugate pi/2 gate (the quadrature in which the two
    conditional phases +/-2N*Phi map onto the two poles) before projective
    optical readout.  This gives

        K_0 = (U_minus - i U_plus) / 2,   K_1 = (U_minus + i U_plus) / 2,

    which is trace preserving for any unitary pair and projective exactly at
    2 N Phi = pi/2.
    """
    if propagator_mode == "exact":
        u_plus = conditional_propagator_exact(spin, fieldcfg, seq, "plus", consts)
        u_minus = conditional_propagator_exact(spin, fieldcfg, seq, "minus", consts)
    elif propagator_mode == "magnus":
        frame = effective_frame(spin, fieldcfg, consts)
        u_plus = conditional_propagator_magnus(frame, seq, "plus")
        u_minus = conditional_propagator_magnus(frame, seq, "minus")
    else:
        raise ValueError(f"unknown propagator_mode {propagator_mode!r}")
    frame = effective_frame(spin, fieldcfg, consts)
    _, vecs = np.linalg.eigh(spin_operator(frame.n_perp))
    kraus_0 = (u_minus - 1.0j * u_plus) / 2.0
    kraus_1 = (u_minus + 1.0j * u_plus) / 2.0
    # label "up" the locked state more likely to give the bright outcome 0,
    # so high photon counts track hidden state +1
    p0 = [float(np.linalg.norm(kraus_0 @ vecs[:, j]) ** 2) for j in (0, 1)]
    i_up = int(np.argmax(p0))
    return MeasurementChannel(
        kraus_0=kraus_0, kraus_1=kraus_1,
        basis_up=vecs[:, i_up], basis_down=vecs[:, 1 - i_up],
    )


def joint_premeasurement_state(
    channel: MeasurementChannel, nuclear_state_vec: np.ndarray
) -> np.ndarray:
    """Pure electron x nuclear state just before the optical readout."""
    psi = np.zeros(4, dtype=complex)
    psi[0:2] = channel.kraus_0 @ nuclear_state_vec  # electron |0> block
    psi[2:4] = channel.kraus_1 @ nuclear_state_vec  # electron |1> block
    return psi / np.linalg.norm(psi)


def entanglement_vs_n(
    spin: HyperfineSpin,
    fieldcfg: FieldConfig,
    tau: float,
    n_max: int,
    propagator_mode: str = "exact",
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
):
    """Electron-nuclear entanglement entropy (bits) versus pulse number.

    The nuclear input is the balanced superposition of the locked states,
    (|up> + |down>)/sqrt(2).  Returns (n values, entropies, phases) where the
    phase is the conditional rotation angle 2*N*Phi extracted from the
    propagator pair (entropy maxima sit at pi/2 mod pi).
    """
    frame = effective_frame(spin, fieldcfg, consts)
    ns = np.arange(1, n_max + 1)
    entropies = np.empty(len(ns))
    phases = np.empty(len(ns))
    for i, n in enumerate(ns):
        seq = CpmgSequence(int(n), tau)
        channel = measurement_channel(spin, fieldcfg, seq, propagator_mode, consts)
        psi_n = (channel.basis_up + channel.basis_down) / np.sqrt(2.0)
        psi = joint_premeasurement_state(channel, psi_n)
        # reduced electron state: trace over the nucleus
        block = psi.reshape(2, 2)
        rho_e = block @ block.conj().T
        evals = np.linalg.eigvalsh(rho_e)
        evals = np.clip(evals, 1e-18, 1.0)
        entropies[i] = float(-(evals * np.log2(evals)).sum())
        # recover the propagators: U_minus = K0 + K1, U_plus = i (K0 - K1);
        # the eigenphase gap of U_plus^dag U_minus is twice the conditional
        # rotation angle 2 N Phi.
        u_minus = channel.kraus_0 + channel.kraus_1
        u_plus = 1.0j * (channel.kraus_0 - channel.kraus_1)
        u_rel = np.linalg.eigvals(u_plus.conj().T @ u_minus)
        phases[i] = float(abs(np.angle(u_rel[0] / u_rel[1]))) / 2.0
    return ns, entropies, phases


@dataclass(frozen=True)
class ReadoutConfig:
    """Calibration constants of the single-shot readout engine.

    Photon rates are means per cycle for the two electron outcome classes.
    ``electron_init_error`` is the per-cycle probability that the optical
    outcome class is misassigned (imperfect electron initialization and
    readout contrast lumped together); its default is calibrated so the
    default working point reproduces the reference single-shot fidelity of
    about 95.5%, so it is a consistency constant, not a prediction.  ``pi_pulse_error`` is a per-cycle
    depolarizing weight applied to the nuclear state (flip-pulse leakage);
    the default keeps it off so nuclear jumps are governed by T1 alone.
    """

    cycles_per_point: int = 40000
    photon_rate_bright: float = 0.063
    photon_rate_dark: float = 0.0575
    t1n_up: float = 15.0
    t1n_down: float = 15.0
    point_duration: float = 0.189
    electron_init_error: float = 0.10
    pi_pulse_error: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.cycles_per_point < 1:
            raise ValueError("cycles_per_point must be >= 1")
        if self.photon_rate_bright < 0 or self.photon_rate_dark < 0:
            raise ValueError("photon rates must be non-negative")
        for p in (self.electron_init_error, self.pi_pulse_error):
            if not (0.0 <= p <= 1.0):
                raise ValueError("error probabilities must lie in [0, 1]")
        if self.t1n_up <= 0 or self.t1n_down <= 0 or self.point_duration <= 0:
            raise ValueError("lifetimes and durations must be positive")

    @property
    def cycle_time(self) -> float:
        return self.point_duration / self.cycles_per_point


@dataclass(frozen=True)
class PhotonTrace:
    """Binned photon counts plus the ground-truth nuclear trajectory.

    ``hidden_states`` (+1 for up, -1 for down) is the dominant locked state
    during each point; it exists for validation only and must not leak into
    analysis that claims to be single-shot.
    """

    points: np.ndarray
    hidden_states: np.ndarray
    config: ReadoutConfig
    seed: int

    def __post_init__(self):
        if len(self.points) != len(self.hidden_states):
            raise ValueError("points/hidden_states length mismatch")
        if np.any(self.points < 0):
            raise ValueError("photon counts must be non-negative")


def _point_rng(seed: int, point_index: int) -> np.random.Generator:
    """Counter-based substream: Philox keyed by the master seed, counter set
    to a block 2^128 apart per point."""
    bitgen = np.random.Philox(key=[seed & 0xFFFFFFFFFFFFFFFF, 0],
                              counter=[0, 0, point_index, 0])
    return np.random.Generator(bitgen)


def _projection_weights(channel: MeasurementChannel, rho: np.ndarray):
    up = channel.basis_up
    down = channel.basis_down
    p_up = float(np.real(up.conj() @ rho @ up))
    return p_up, 1.0 - p_up


def _is_projective_qnd(channel: MeasurementChannel, tol: float = 1e-9) -> bool:
    """True when each Kraus operator maps each locked state onto itself (up to
    normalization) and the two outcomes split the basis deterministically."""
    up, down = channel.basis_up, channel.basis_down
    k0, k1 = channel.kraus_0, channel.kraus_1
    # outcome 0 must keep |down>, outcome 1 must keep |up> (or vice versa);
    # check both pairings.
    def leakage(k, keep, kill):
        return abs(np.linalg.norm(k @ kill)) + abs(1.0 - np.linalg.norm(k @ keep))

    direct = leakage(k0, down, up) + leakage(k1, up, down)
    swapped = leakage(k0, up, down) + leakage(k1, down, up)
    return min(direct, swapped) < tol


def _bright_state_sign(channel: MeasurementChannel) -> int:
    """+1 if the bright outcome (0) keeps |up>, else -1."""
    up = channel.basis_up
    return 1 if np.linalg.norm(channel.kraus_0 @ up) > 0.5 else -1


def simulate_point(
    nuclear_state: np.ndarray,
    channel: MeasurementChannel,
    config: ReadoutConfig,
    rng: np.random.Generator,
):
    """One binned data point: cycles_per_point measurement cycles.

    Returns (photon_count, nuclear_state_after, dominant_state) with the
    dominant locked state encoded +1 (up) / -1 (down) by occupation time.

    Each cycle: sample the electron outcome from the Kraus probabilities,
    collapse the nuclear state, draw Poisson photons for the outcome class
    (misassigned with probability electron_init_error), apply the optional
    depolarizing kick, then a T1 flip with the per-cycle exponential
    probability.  When the channel is projective and the depolarizing kick is
    off, the inner loop is replaced by an exact aggregate: the locked state
    only changes at T1 flips, so flip times are drawn geometrically and the
    photons for each constant-state segment are drawn as a sum of the two
    Poisson classes split binomially by the misassignment probability.
    """
    rho = np.asarray(nuclear_state, dtype=complex).copy()
    if _is_projective_qnd(channel) and config.pi_pulse_error == 0.0:
        return _simulate_point_aggregate(rho, channel, config, rng)
    return _simulate_point_cycles(rho, channel, config, rng)


def _t1_flip_probs(config: ReadoutConfig):
    dt = config.cycle_time
    return (1.0 - np.exp(-dt / config.t1n_up),
            1.0 - np.exp(-dt / config.t1n_down))


def _cycle_kernel(k0, k1, psi, u, rate_bright, rate_dark, eie, pie,
                  p_flip_up, p_flip_down):
    """Pure-state quantum-trajectory loop in the locked basis.

    ``u`` holds six pre-drawn uniforms per cycle (outcome, misassignment,
    photon count, depolarizing occurrence, depolarizing target, T1 flip), so
    the kernel is deterministic given its inputs and can be jit-compiled.
    The depolarizing kick is unravelled as a jump to a random locked state
    with the channel's probability, which reproduces the density-matrix map
    in ensemble average.  Returns (photon total, cycles spent nearer up).
    """
    photons = 0
    up_cycles = 0
    for i in range(u.shape[0]):
        a0 = k0[0, 0] * psi[0] + k0[0, 1] * psi[1]
        a1 = k0[1, 0] * psi[0] + k0[1, 1] * psi[1]
        p0 = a0.real * a0.real + a0.imag * a0.imag \
            + a1.real * a1.real + a1.imag * a1.imag
        if u[i, 0] < p0:
            norm = np.sqrt(p0)
            psi[0] = a0 / norm
            psi[1] = a1 / norm
            bright = True
        else:
            b0 = k1[0, 0] * psi[0] + k1[0, 1] * psi[1]
            b1 = k1[1, 0] * psi[0] + k1[1, 1] * psi[1]
            norm = np.sqrt(b0.real * b0.real + b0.imag * b0.imag
                           + b1.real * b1.real + b1.imag * b1.imag)
            psi[0] = b0 / norm
            psi[1] = b1 / norm
            bright = False
        if eie > 0.0 and u[i, 1] < eie:
            bright = not bright
        lam = rate_bright if bright else rate_dark
        # inverse-CDF Poisson draw (lam is well below 1 in practice)
        uu = u[i, 2]
        k = 0
        p = np.exp(-lam)
        cdf = p
        while uu > cdf and k < 10000:
            k += 1
            p *= lam / k
            cdf += p
        photons += k
        if pie > 0.0 and u[i, 3] < pie:
            if u[i, 4] < 0.5:
                psi[0] = 1.0 + 0.0j
                psi[1] = 0.0 + 0.0j
            else:
                psi[0] = 0.0 + 0.0j
                psi[1] = 1.0 + 0.0j
        p_up = psi[0].real * psi[0].real + psi[0].imag * psi[0].imag
        if p_up > 0.5:
            up_cycles += 1
        if u[i, 5] < p_up * p_flip_up + (1.0 - p_up) * p_flip_down:
            tmp = psi[0]
            psi[0] = psi[1]
            psi[1] = tmp
    return photons, up_cycles


try:  # jit the trajectory loop when numba is available; fall back otherwise
    from numba import njit as _njit

    _cycle_kernel = _njit(cache=True)(_cycle_kernel)
except ImportError:  # pragma: no cover - exercised only without numba
    pass


def _simulate_point_cycles(rho, channel, config, rng):
    basis = np.column_stack([channel.basis_up, channel.basis_down])
    k0 = basis.conj().T @ channel.kraus_0 @ basis
    k1 = basis.conj().T @ channel.kraus_1 @ basis
    # unravel the input density matrix into a pure state in the locked basis
    rho_b = basis.conj().T @ rho @ basis
    evals, evecs = np.linalg.eigh(rho_b)
    evals = np.clip(evals, 0.0, 1.0)
    pick = 1 if rng.random() < evals[1] / max(evals.sum(), 1e-300) else 0
    psi = np.ascontiguousarray(evecs[:, pick], dtype=np.complex128)
    p_flip_up, p_flip_down = _t1_flip_probs(config)
    u = rng.random((config.cycles_per_point, 6))
    photons, up_cycles = _cycle_kernel(
        np.ascontiguousarray(k0), np.ascontiguousarray(k1), psi, u,
        config.photon_rate_bright, config.photon_rate_dark,
        config.electron_init_error, config.pi_pulse_error,
        p_flip_up, p_flip_down,
    )
    psi_lab = basis @ psi
    rho_out = np.outer(psi_lab, psi_lab.conj())
    dominant = 1 if up_cycles * 2 >= config.cycles_per_point else -1
    return int(photons), rho_out, dominant


def _simulate_point_aggregate(rho, channel, config, rng):
    """Equivalent sampling for a projective channel: photons per constant-state
    segment, flip times geometric in cycle units."""
    bright_sign = _bright_state_sign(channel)
    p_up, _ = _projection_weights(channel, rho)
    # an uncollapsed input is pinned by the first cycle: sample the outcome
    state = 1 if rng.random() < p_up else -1
    p_flip_up, p_flip_down = _t1_flip_probs(config)
    remaining = config.cycles_per_point
    photons = 0
    occupancy = {1: 0, -1: 0}
    while remaining > 0:
        p_flip = p_flip_up if state == 1 else p_flip_down
        if p_flip <= 0:
            seg = remaining
        else:
            seg = int(min(rng.geometric(p_flip), remaining))
        rate_true = (config.photon_rate_bright if state == bright_sign
                     else config.photon_rate_dark)
        rate_false = (config.photon_rate_dark if state == bright_sign
                      else config.photon_rate_bright)
        wrong = 0
        if config.electron_init_error > 0:
            wrong = int(rng.binomial(seg, config.electron_init_error))
        photons += int(rng.poisson(rate_true * (seg - wrong)))
        if wrong:
            photons += int(rng.poisson(rate_false * wrong))
        occupancy[state] += seg
        remaining -= seg
        if remaining > 0:
            state = -state
    dominant = 1 if occupancy[1] >= occupancy[-1] else -1
    basis = channel.basis_up if state == 1 else channel.basis_down
    rho_out = np.outer(basis, basis.conj())
    return photons, rho_out, dominant


def simulate_trace(
    spin: HyperfineSpin,
    fieldcfg: FieldConfig,
    seq: CpmgSequence,
    config: ReadoutConfig,
    n_points: int,
    propagator_mode: str = "magnus",
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
) -> PhotonTrace:
    """Chain ``n_points`` binned points into one photon trace.

    The nuclear spin starts fully mixed and is collapsed by the first cycles;
    afterwards it telegraphs between the locked states with the configured T1.
    The default propagator mode is "magnus" so that a resonant projective
    working point is exactly quantum-non-demolition; "exact" exposes the
    residual measurement back-action instead.
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    channel = measurement_channel(spin, fieldcfg, seq, propagator_mode, consts)
    rho = np.eye(2, dtype=complex) / 2.0
    points = np.empty(n_points, dtype=np.int64)
    hidden = np.empty(n_points, dtype=np.int8)
    for i in range(n_points):
        rng = _point_rng(config.seed, i)
        count, rho, dominant = simulate_point(rho, channel, config, rng)
        points[i] = count
        hidden[i] = dominant
    return PhotonTrace(points=points, hidden_states=hidden, config=config,
                       seed=config.seed)


def trace_to_csv(trace: PhotonTrace, path, config_hash: str = "") -> None:
    """Write (point_index, photon_count, hidden_state) rows."""
    with open(path, "w") as fh:
        if config_hash:
            fh.write(f"# config_sha256={config_hash} seed={trace.seed}\n")
        fh.write("point_index,photon_count,hidden_state\n")
        for i, (c, h) in enumerate(zip(trace.points, trace.hidden_states)):
            fh.write(f"{i},{int(c)},{int(h)}\n")


def config_snapshot_json(config: ReadoutConfig) -> str:
    return json.dumps(asdict(config), indent=2, sort_keys=True)
