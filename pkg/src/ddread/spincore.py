"""SU(2) spin algebra, effective nuclear frame, and conditional propagators.

A single spin-1/2 nucleus hyperfine-coupled to the two relevant levels of an
ancilla electron evolves under one of two Hamiltonians depending on the
electron branch.  Under a CPMG train of instantaneous electron pi-flips the
nucleus sees an alternation of the two, which is what everything downstream
(coherence curves, measurement channels) is built from.

All frequencies in this module are angular (rad/s).  Conversion from ordinary
frequency in Hz happens at configuration boundaries, not here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sequence import CpmgSequence

TWO_PI = 2.0 * np.pi

# Pauli matrices; spin operators are sigma/2 so that exp(-i theta n.I) rotates
# the Bloch vector by theta about n.
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

#: omega below this (rad/s) means the precession axis is undefined.
DEGENERATE_OMEGA = 1e-3


class DegenerateFrameError(ValueError):
    """Raised when the nuclear precession frequency is too small to define a frame."""


@dataclass(frozen=True)
class PhysicalConstants:
    """Gyromagnetic ratios in rad s^-1 T^-1.

    ``gamma_e`` is carried for documentation; the two-level pure-dephasing
    model never uses it (electron Zeeman and zero-field terms drop out).
    """

    gamma_n: float = 6.73e7
    gamma_e: float = 1.76e11

    def __post_init__(self):
        if self.gamma_n <= 0 or self.gamma_e <= 0:
            raise ValueError("gyromagnetic ratios must be strictly positive")


DEFAULT_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class FieldConfig:
    """Static magnetic field of magnitude ``b_magnitude`` tesla along +z."""

    b_magnitude: float

    def __post_init__(self):
        if self.b_magnitude < 0:
            raise ValueError("field magnitude must be non-negative")


@dataclass(frozen=True)
class HyperfineSpin:
    """One weakly coupled spin-1/2 nucleus.

    ``a_vec`` is the hyperfine vector A (rad/s) coupling the electron Sz to
    the nuclear spin, expressed in the frame whose z axis is the NV/field
    axis.  A zero vector is a decoupled spin.
    """

    a_vec: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.a_vec, dtype=float)
        if vec.shape != (3,):
            raise ValueError("a_vec must be a 3-vector")
        if not np.all(np.isfinite(vec)):
            raise ValueError("a_vec components must be finite")
        object.__setattr__(self, "a_vec", vec)


@dataclass(frozen=True)
class EffectiveFrame:
    """Conditioned-average precession frame of the nucleus.

    omega * n_par = A/2 + gamma_n * B, a_par = A . n_par, and a_perp is the
    magnitude of A's component perpendicular to n_par.  When a_perp vanishes
    n_perp is an arbitrary perpendicular unit vector and ``transverse`` is
    False.
    """

    omega: float
    n_par: np.ndarray
    n_perp: np.ndarray
    a_par: float
    a_perp: float
    transverse: bool = field(default=True)

    @property
    def n_cross(self) -> np.ndarray:
        """Third axis of the right-handed frame (n_par x n_perp)."""
        return np.cross(self.n_par, self.n_perp)


def effective_frame(
    spin: HyperfineSpin,
    fieldcfg: FieldConfig,
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
) -> EffectiveFrame:
    """Derive the effective nuclear frame (omega, n_par, n_perp, a_par, a_perp).

    Raises
    ------
    DegenerateFrameError
        If |A/2 + gamma_n B| is below ``DEGENERATE_OMEGA`` rad/s.
    """
    a_vec = spin.a_vec
    h_par = a_vec / 2.0 + np.array([0.0, 0.0, consts.gamma_n * fieldcfg.b_magnitude])
    omega = float(np.linalg.norm(h_par))
    if omega < DEGENERATE_OMEGA:
        raise DegenerateFrameError(
            f"precession frequency {omega:.3e} rad/s below {DEGENERATE_OMEGA}; "
            "parallel axis undefined"
        )
    n_par = h_par / omega
    a_par = float(a_vec @ n_par)
    perp = a_vec - a_par * n_par
    a_perp = float(np.linalg.norm(perp))
    if a_perp > 1e-12 * max(1.0, np.linalg.norm(a_vec)):
        n_perp = perp / a_perp
        transverse = True
    else:
        # Degenerate transverse direction: pick any unit vector orthogonal
        # to n_par so the frame stays well formed.
        trial = np.array([1.0, 0.0, 0.0])
        if abs(n_par @ trial) > 0.9:
            trial = np.array([0.0, 1.0, 0.0])
        n_perp = trial - (trial @ n_par) * n_par
        n_perp = n_perp / np.linalg.norm(n_perp)
        a_perp = 0.0
        transverse = False
    return EffectiveFrame(
        omega=omega, n_par=n_par, n_perp=n_perp, a_par=a_par, a_perp=a_perp,
        transverse=transverse,
    )


def spin_from_frame_components(
    a_par: float,
    a_perp: float,
    fieldcfg: FieldConfig,
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
) -> HyperfineSpin:
    """Build the hyperfine vector realising given frame components.

    Inverts the frame construction in closed form: with b = gamma_n * B the
    self-consistent precession frequency is

        omega = a_par/2 + sqrt(b^2 - a_perp^2/4)

    and A = a_par n_par + a_perp n_perp with the axes fixed by requiring
    omega n_par - A/2 = b z.  The vector is placed in the xz plane
    (azimuthal angle is unphysical).

    Requires |a_perp| < 2 b.
    """
    b = consts.gamma_n * fieldcfg.b_magnitude
    disc = b * b - a_perp * a_perp / 4.0
    if disc <= 0:
        raise ValueError("a_perp must be smaller than 2 gamma_n B")
    omega = a_par / 2.0 + np.sqrt(disc)
    if omega < DEGENERATE_OMEGA:
        raise DegenerateFrameError("requested components give a degenerate frame")
    # z expressed in the (n_par, n_perp) basis: b z = (omega - a_par/2) n_par
    # - (a_perp/2) n_perp.  Choose n_par in the xz plane with positive x.
    cos_t = (omega - a_par / 2.0) / b
    cos_t = min(1.0, max(-1.0, cos_t))
    sin_t = np.sqrt(1.0 - cos_t * cos_t)
    n_par = np.array([sin_t, 0.0, cos_t])
    # n_perp lies in the xz plane too, orthogonal to n_par, with
    # n_perp . z = -a_perp / (2 b).
    n_perp = np.array([cos_t, 0.0, -sin_t])
    if a_perp > 0 and n_perp[2] * (-a_perp / (2.0 * b)) < 0:
        n_perp = -n_perp
    return HyperfineSpin(a_vec=a_par * n_par + a_perp * n_perp)


def spin_from_axial_components(
    a_z: float,
    a_perp: float,
    fieldcfg: FieldConfig,
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
) -> HyperfineSpin:
    """Build a hyperfine vector from its projection on the field axis.

    ``a_z`` is the component of A along the NV/field axis (the quantity
    usually quoted from spectroscopy), ``a_perp`` the transverse frame
    component.  Solved by a scalar bisection on the frame a_par.
    """
    b = consts.gamma_n * fieldcfg.b_magnitude

    def axial_of(a_par: float) -> float:
        omega = a_par / 2.0 + np.sqrt(b * b - a_perp * a_perp / 4.0)
        # A.z = a_par (n_par.z) + a_perp (n_perp.z)
        return a_par * (omega - a_par / 2.0) / b - a_perp * a_perp / (2.0 * b)

    from scipy.optimize import brentq

    span = 4.0 * (abs(a_z) + abs(a_perp) + 1.0)
    a_par = brentq(lambda x: axial_of(x) - a_z, -span, span, xtol=1e-6)
    return spin_from_frame_components(a_par, a_perp, fieldcfg, consts)


def spin_operator(axis: np.ndarray) -> np.ndarray:
    """Spin-1/2 operator axis . I = axis . sigma / 2 (axis need not be unit)."""
    ax = np.asarray(axis, dtype=float)
    return (ax[0] * SIGMA_X + ax[1] * SIGMA_Y + ax[2] * SIGMA_Z) / 2.0


def rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """exp(-i * angle * axis.I) for a unit axis: Bloch rotation by ``angle``."""
    ax = np.asarray(axis, dtype=float)
    sigma = 2.0 * spin_operator(ax)
    return np.cos(angle / 2.0) * IDENTITY_2 - 1.0j * np.sin(angle / 2.0) * sigma


def is_unitary(u: np.ndarray, tol: float = 1e-12) -> bool:
    """Frobenius check of U^dag U = I and |det U| = 1."""
    dev = np.linalg.norm(u.conj().T @ u - IDENTITY_2)
    return dev < tol and abs(abs(np.linalg.det(u)) - 1.0) < tol


def filter_sum(omega: float, seq: CpmgSequence) -> complex:
    """Complex CPMG filter sum; the standard filter function is its modulus.

    sum_{p=0}^{N} (-1)^p (exp(-i w t_{p+1}) - exp(-i w t_p)) with t_0 = 0 and
    t_{N+1} = 2 N tau.
    """
    edges = seq.boundary_times()
    phases = np.exp(-1.0j * omega * edges)
    signs = (-1.0) ** np.arange(seq.n_pulses + 1)
    return complex(np.sum(signs * (phases[1:] - phases[:-1])))


def filter_function(omega: float, seq: CpmgSequence) -> float:
    """DD filter function F(omega, 2 N tau) >= 0."""
    return abs(filter_sum(omega, seq))


def _branch_sign(branch: str) -> int:
    if branch == "plus":
        return 1
    if branch == "minus":
        return -1
    raise ValueError(f"branch must be 'plus' or 'minus', got {branch!r}")


def conditional_propagator_exact(
    spin: HyperfineSpin,
    fieldcfg: FieldConfig,
    seq: CpmgSequence,
    branch: str,
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
) -> np.ndarray:
    """Exact nuclear propagator for one electron branch of the CPMG sequence.

    The 'plus' branch sees (A + gamma_n B).I during the first interval; each
    ideal pi-flip swaps the two interval Hamiltonians.
    """
    idx = 0 if _branch_sign(branch) > 0 else 1
    pair = _propagators_exact_batch(
        spin, fieldcfg, seq.n_pulses, np.array([seq.tau]), consts
    )
    return pair[idx][0]


def _propagators_exact_batch(
    spin: HyperfineSpin,
    fieldcfg: FieldConfig,
    n_pulses: int,
    taus: np.ndarray,
    consts: PhysicalConstants = DEFAULT_CONSTANTS,
):
    """Exact (U_plus, U_minus) for a whole array of pulse half-intervals.

    Returns two arrays of shape (len(taus), 2, 2).  The interval rotations
    about each branch Hamiltonian are built in closed form, so the cost is
    n_pulses + 1 batched 2x2 products.
    """
    taus = np.asarray(taus, dtype=float)
    b_vec = np.array([0.0, 0.0, consts.gamma_n * fieldcfg.b_magnitude])
    h_plus = spin.a_vec + b_vec
    h_minus = b_vec

    def rotors(h_vec, durations):
        # exp(-i h.I d) for each duration; h fixed.
        mag = np.linalg.norm(h_vec)
        if mag == 0:
            out = np.zeros((len(durations), 2, 2), dtype=complex)
            out[:] = IDENTITY_2
            return out
        sigma = 2.0 * spin_operator(h_vec / mag)
        half = mag * durations / 2.0
        return (
            np.cos(half)[:, None, None] * IDENTITY_2
            - 1.0j * np.sin(half)[:, None, None] * sigma
        )

    # interval durations: tau, 2tau, ..., 2tau, tau
    u_plus = None
    u_minus = None
    for p in range(n_pulses + 1):
        dur = taus if p in (0, n_pulses) else 2.0 * taus
        r_plus = rotors(h_plus, dur)
        r_minus = rotors(h_minus, dur)
        # branch 'plus' sees h_plus on even intervals
        step_p = r_plus if p % 2 == 0 else r_minus
        step_m = r_minus if p % 2 == 0 else r_plus
        if u_plus is None:
            u_plus, u_minus = step_p, step_m
        else:
            u_plus = step_p @ u_plus
            u_minus = step_m @ u_minus
    return u_plus, u_minus


def conditional_propagator_magnus(
    frame: EffectiveFrame,
    seq: CpmgSequence,
    branch: str,
) -> np.ndarray:
    """First-order average-Hamiltonian propagator U_branch = W exp(-/+ i M).

    W = exp(-i omega I_par t) is the shared precession; M is the conditional
    part with rotation angle (a_perp / 2 omega) * F(omega, t) about an axis in
    the (n_perp, n_par x n_perp) plane set by the phase of the complex filter
    sum.  Keeping that phase (rather than the modulus alone) is what makes the
    truncation error second order in the coupling.
    """
    sgn = _branch_sign(branch)
    if frame.omega < DEGENERATE_OMEGA:
        raise DegenerateFrameError("Magnus propagator needs omega > 0")
    omega = frame.omega
    t_total = seq.total_time()
    # g = int s(t) e^{i omega t} dt for the 'plus' toggling pattern
    edges = seq.boundary_times()
    phases = np.exp(1.0j * omega * edges)
    signs = (-1.0) ** np.arange(seq.n_pulses + 1)
    g = np.sum(signs * (phases[1:] - phases[:-1])) / (1.0j * omega)
    axis_vec = np.real(g) * frame.n_perp - np.imag(g) * frame.n_cross
    # |axis_vec| = F(omega, t) / omega, so the Bloch angle below is the
    # standard (a_perp / 2 omega) * F of the first-order expansion.
    angle = frame.a_perp / 2.0 * float(np.linalg.norm(axis_vec))
    precession = rotation(frame.n_par, omega * t_total)
    if angle == 0.0:
        return precession
    axis = axis_vec / np.linalg.norm(axis_vec)
    return precession @ rotation(axis, sgn * angle)
