"""Exact free-fermion engine for the kicked transverse-field Ising ring.

Each quasi-momentum pair (k, -k) of the even-parity sector is a two-level
system in the pseudospin basis {|0>, d_k^+ d_-k^+ |0>}, driven by the mode
Hamiltonian mu_k . sigma with mu_k = (0, J sin k, h0 + J cos k). The lattice
fermions are f_j = prod_{l<j}(-sigma^z_l) sigma^+_j, so a down spin is an
occupied site and the all-up state is the vacuum. Mode amplitudes are stored
in the frame where one period acts as exp(-i h1 sz) exp(-i tau mu.sigma); the
matching spin chain is generated by H/2 (see ``acsense.ed``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import toeplitz
from scipy.optimize import minimize_scalar

from .core import (DeltaKick, GroundStateOfH0, InitialState, ModelParams, PolarizedUp,
                   SquarePulse, ThermalOfH0, kgrid, validate)

SIGMA = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)
DEGENERATE_TOL = 1e-12


class DegenerateMode(ArithmeticError):
    """The Floquet axis of a mode is ill-defined (U_period = +-1)."""


# --- SU(2) helpers ---------------------------------------------------------

def su2_exp(vec: np.ndarray) -> np.ndarray:
    """exp(-i vec . sigma) for an array of 3-vectors (Rodrigues formula)."""
    vec = np.asarray(vec, dtype=float)
    theta = np.linalg.norm(vec, axis=-1)
    safe = np.where(theta > 0, theta, 1.0)
    n = vec / safe[..., None]
    out = np.cos(theta)[..., None, None] * np.eye(2) \
        - 1j * np.sin(theta)[..., None, None] * np.einsum("...a,aij->...ij", n, SIGMA)
    return out


def su2_coefficients(U: np.ndarray):
    """Write U = a0 - i a.sigma and return (a0, a) as real arrays."""
    a0 = 0.5 * np.real(U[..., 0, 0] + U[..., 1, 1])
    a = 0.5 * np.real(1j * np.einsum("...ij,aji->...a", U, SIGMA))
    return a0, a


def _su2_from(a0, a):
    return a0[..., None, None] * np.eye(2) - 1j * np.einsum("...a,aij->...ij", a, SIGMA)


# --- mode Hamiltonian and one-period propagator ---------------------------

@dataclass(frozen=True)
class ModeHamiltonian:
    k: np.ndarray
    mu: np.ndarray  # (..., 3), H_k = mu . sigma

    @property
    def norm(self) -> np.ndarray:
        return np.linalg.norm(self.mu, axis=-1)


def mode_hamiltonian(params: ModelParams, k, h0: Optional[float] = None) -> ModeHamiltonian:
    k = np.asarray(k, dtype=float)
    h = params.h0 if h0 is None else h0
    mu = np.stack([np.zeros_like(k), params.J * np.sin(k), h + params.J * np.cos(k)], axis=-1)
    return ModeHamiltonian(k, mu)


def period_propagator(params: ModelParams, k) -> np.ndarray:
    """One-period propagator of the mode(s) ``k``, shape (..., 2, 2).

    The field segment closes the period: exp(-i h1 sz) exp(-i tau mu.sigma)
    for a kick, exp(-i w (mu + h1 z).sigma) exp(-i (tau - w) mu.sigma) for a
    square pulse.
    """
    mu = mode_hamiltonian(params, k).mu
    pulse = params.pulse
    if isinstance(pulse, DeltaKick):
        static = su2_exp(mu * params.tau)
        kick = su2_exp(np.array([0.0, 0.0, params.h1]))
        return kick @ static
    if isinstance(pulse, SquarePulse):
        on = mu.copy()
        on[..., 2] += params.h1
        return su2_exp(on * pulse.w) @ su2_exp(mu * (params.tau - pulse.w))
    raise TypeError(f"unknown pulse {pulse!r}")


# --- Floquet modes --------------------------------------------------------

def _unit_eigvecs(axis: np.ndarray) -> np.ndarray:
    """Columns |+>, |-> of axis.sigma with the largest component real positive."""
    nsig = np.einsum("...a,aij->...ij", axis, SIGMA)
    out = np.empty(axis.shape[:-1] + (2, 2), dtype=complex)
    for col, sign in ((0, 1.0), (1, -1.0)):
        P = 0.5 * (np.eye(2) + sign * nsig)
        norms = np.linalg.norm(P, axis=-2)  # column norms
        pick = np.argmax(norms, axis=-1)
        v = np.take_along_axis(P, pick[..., None, None], axis=-1)[..., 0]
        v = v / np.linalg.norm(v, axis=-1, keepdims=True)
        big = np.take_along_axis(v, np.argmax(np.abs(v), axis=-1)[..., None], axis=-1)
        v = v * (np.abs(big) / big)
        out[..., :, col] = v
    return out


@dataclass(frozen=True)
class FloquetModes:
    """Floquet data of all modes, vectorized over k."""

    k: np.ndarray
    tau: float
    U: np.ndarray             # (K, 2, 2)
    quasi_energy: np.ndarray  # (K,), in [0, pi/tau]
    axis: np.ndarray          # (K, 3) unit vectors
    eigvecs: np.ndarray       # (K, 2, 2); columns are |mu+>, |mu->
    degenerate: np.ndarray    # (K,) bool; axis arbitrary where True
    overlaps: Optional[np.ndarray] = None  # (K, 2): r_pm = <psi0|mu_pm>

    @property
    def a0(self) -> np.ndarray:
        return np.cos(self.quasi_energy * self.tau)

    @property
    def avec(self) -> np.ndarray:
        return np.sin(self.quasi_energy * self.tau)[..., None] * self.axis


def floquet_from_propagator(U: np.ndarray, k, tau: float) -> FloquetModes:
    k = np.atleast_1d(np.asarray(k, dtype=float))
    U = U.reshape(k.shape + (2, 2)) if U.ndim == 2 else U
    a0, a = su2_coefficients(U)
    theta = np.arccos(np.clip(a0, -1.0, 1.0))
    s = np.sin(theta)
    degenerate = np.abs(s) < DEGENERATE_TOL
    anorm = np.linalg.norm(a, axis=-1)
    axis = np.where(degenerate[..., None], np.array([0.0, 0.0, 1.0]),
                    a / np.where(anorm > 0, anorm, 1.0)[..., None])
    return FloquetModes(k=k, tau=tau, U=U, quasi_energy=theta / tau, axis=axis,
                        eigvecs=_unit_eigvecs(axis), degenerate=degenerate)


def floquet_mode(params: ModelParams, k=None, initial=None) -> FloquetModes:
    """Quasi-energies, axes, eigenvectors and (for pure initial states) overlaps.

    ``k`` defaults to the full grid; ``initial`` may be an InitialState or a
    pure ModeStates. Degenerate modes are flagged in ``degenerate``.
    """
    if k is None:
        k = kgrid(params.N)
    fm = floquet_from_propagator(period_propagator(params, k), k, params.tau)
    if initial is None:
        return fm
    modes = initial if isinstance(initial, ModeStates) else initial_modes(params, initial, k=fm.k)
    if not modes.pure:
        raise ValueError("overlaps are defined for pure initial mode states only")
    r = np.einsum("ki,kia->ka", modes.amps.conj(), fm.eigvecs)
    return FloquetModes(**{**fm.__dict__, "overlaps": r})


def floquet_closed_form(params: ModelParams, k):
    """Quasi-energy and axis from the composition of two rotations.

    Cross-check for the delta kick only: the static rotation by |mu| tau about
    n_i followed by the kick rotation by h1 about z.
    """
    if not isinstance(params.pulse, DeltaKick):
        raise ValueError("closed form is available for the delta kick only")
    mh = mode_hamiltonian(params, k)
    ai, ni = mh.norm * params.tau, mh.mu / mh.norm[..., None]
    af = abs(params.h1)
    nf = np.array([0.0, 0.0, np.sign(params.h1) or 1.0])
    c = np.cos(ai) * np.cos(af) - (ni @ nf) * np.sin(ai) * np.sin(af)
    theta = np.arccos(np.clip(c, -1, 1))
    vec = (ni * (np.sin(ai) * np.cos(af))[..., None] + nf * (np.sin(af) * np.cos(ai))[..., None]
           - np.cross(ni, nf) * (np.sin(ai) * np.sin(af))[..., None])
    with np.errstate(invalid="ignore", divide="ignore"):
        axis = vec / np.sin(theta)[..., None]
    return theta / params.tau, axis


# --- mode states ----------------------------------------------------------

@dataclass(frozen=True)
class ModeStates:
    """State of every (k, -k) pair.

    Pure states carry amplitudes (u_k, v_k). Mixed states carry the
    normalized pair-sector density matrix ``rho`` and the probability
    ``single`` of the two singly-occupied levels, which the drive leaves
    untouched.
    """

    k: np.ndarray
    amps: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    single: Optional[np.ndarray] = None

    @property
    def pure(self) -> bool:
        return self.amps is not None

    @property
    def N(self) -> int:
        return 2 * len(self.k)

    @property
    def density(self) -> np.ndarray:
        if self.pure:
            return np.einsum("ki,kj->kij", self.amps, self.amps.conj())
        return self.rho

    @property
    def single_weight(self) -> np.ndarray:
        return np.zeros(len(self.k)) if self.single is None else self.single

    @property
    def occupation(self) -> np.ndarray:
        """<d_k^+ d_k> for each k > 0."""
        s = self.single_weight
        if self.pure:
            return np.abs(self.amps[:, 1]) ** 2
        return (1 - s) * np.real(self.rho[:, 1, 1]) + 0.5 * s

    @property
    def anomalous(self) -> np.ndarray:
        """u_k^* v_k (pure) or its ensemble average."""
        if self.pure:
            return self.amps[:, 0].conj() * self.amps[:, 1]
        return (1 - self.single_weight) * self.rho[:, 1, 0]


def initial_modes(params: ModelParams, initial: InitialState, k=None) -> ModeStates:
    k = kgrid(params.N) if k is None else np.asarray(k, dtype=float)
    if isinstance(initial, PolarizedUp):
        amps = np.zeros((len(k), 2), dtype=complex)
        amps[:, 0] = 1.0
        return ModeStates(k, amps=amps)
    h0 = params.h0 if initial.h0 is None else initial.h0
    mh = mode_hamiltonian(params, k, h0=h0)
    norm = mh.norm
    axis = mh.mu / np.where(norm > 0, norm, 1.0)[:, None]
    if isinstance(initial, GroundStateOfH0):
        # physical energies are -<mu.sigma> in this frame, so the ground state
        # is the +|mu| eigenvector
        return ModeStates(k, amps=_unit_eigvecs(axis)[:, :, 0])
    if isinstance(initial, ThermalOfH0):
        if initial.beta < 0:
            raise ValueError("beta must be >= 0")
        x = initial.beta * norm
        rho = 0.5 * (np.eye(2) + np.tanh(x)[:, None, None] * np.einsum("ka,aij->kij", axis, SIGMA))
        single = 1.0 / (1.0 + np.cosh(x))
        return ModeStates(k, rho=rho, single=single)
    raise TypeError(f"unknown initial state {initial!r}")


def _power_coefficients(fm: FloquetModes, n: int):
    theta = fm.quasi_energy * fm.tau
    s = np.sin(theta)
    small = np.abs(s) < DEGENERATE_TOL
    # sin(n theta)/sin(theta) with its limits at theta = 0, pi
    lim = n * np.where(np.cos(theta) > 0, 1.0, (-1.0) ** (n - 1))
    ratio = np.where(small, lim, np.sin(n * theta) / np.where(small, 1.0, s))
    a0n = np.cos(n * theta)
    _, a = su2_coefficients(fm.U)
    return a0n, ratio[:, None] * a


def evolve_modes(params: ModelParams, initial, n: int,
                 floquet: Optional[FloquetModes] = None) -> ModeStates:
    """Advance every mode by n periods using the spectral form of U^n."""
    if n < 0:
        raise ValueError("n must be >= 0")
    modes = initial if isinstance(initial, ModeStates) else initial_modes(params, initial)
    if n == 0:
        return modes
    fm = floquet if floquet is not None else floquet_mode(params, modes.k)
    Un = _su2_from(*_power_coefficients(fm, n))
    if modes.pure:
        return ModeStates(modes.k, amps=np.einsum("kij,kj->ki", Un, modes.amps))
    rho = Un @ modes.rho @ np.conj(np.swapaxes(Un, -1, -2))
    return ModeStates(modes.k, rho=rho, single=modes.single)


def steady_modes(params: ModelParams, initial) -> ModeStates:
    """Diagonal ensemble: drop coherences between the two Floquet eigenstates."""
    modes = initial if isinstance(initial, ModeStates) else initial_modes(params, initial)
    fm = floquet_mode(params, modes.k)
    V = fm.eigvecs
    rho0 = modes.density
    # populations |r_pm|^2 (pure) or <mu_pm|rho|mu_pm>
    pops = np.real(np.einsum("kia,kij,kja->ka", V.conj(), rho0, V))
    rho = np.einsum("ka,kia,kja->kij", pops, V, V.conj())
    # an ill-defined axis means U is +-1 and the state is already stationary
    rho = np.where(fm.degenerate[:, None, None], rho0, rho)
    return ModeStates(modes.k, rho=rho, single=modes.single)


# --- lattice correlators --------------------------------------------------

@dataclass(frozen=True)
class CorrelationData:
    """C_ij = <f_i^+ f_j> and I_ij = <f_i^+ f_j^+> on an L-site block."""

    C: np.ndarray
    I: np.ndarray
    label: Union[int, str] = "steady-state"

    @property
    def L(self) -> int:
        return self.C.shape[0]


def correlators_at(params: ModelParams, modes: ModeStates, L: int,
                   label: Union[int, str] = "steady-state") -> CorrelationData:
    if not 1 <= L <= modes.N:
        raise ValueError(f"block length L={L} must satisfy 1 <= L <= N={modes.N}")
    N = modes.N
    d = np.arange(L)
    phase = np.outer(d, modes.k)
    c = (2.0 / N) * (np.cos(phase) @ modes.occupation)
    s = (2.0j / N) * (np.sin(phase) @ modes.anomalous)
    C = toeplitz(c).astype(complex)
    # I_ij = s_{j-i}, odd in j - i
    I = toeplitz(-s, s)
    return CorrelationData(C=C, I=I, label=label)


def steady_correlators(params: ModelParams, initial, L: int) -> CorrelationData:
    return correlators_at(params, steady_modes(params, initial), L, label="steady-state")


def magnetization(modes: ModeStates) -> float:
    """Stroboscopic m_z per site; 1 for the polarized state."""
    return float(1.0 - (4.0 / modes.N) * np.sum(modes.occupation))


# --- Floquet gap ----------------------------------------------------------

def floquet_gap(params: ModelParams, modular: bool = False):
    """(Delta_F, k at the minimum) with Delta_F = min_k 2 eps_k.

    With ``modular`` the splitting is measured modulo 2 pi / tau, so a band
    touching the zone edge (a pi-gap) also counts as closing.
    """
    k = kgrid(params.N)
    fm = floquet_mode(params, k)
    gaps = 2.0 * fm.quasi_energy
    if modular:
        gaps = np.minimum(gaps, 2 * np.pi / params.tau - gaps)
    i = int(np.argmin(gaps))
    return float(gaps[i]), float(k[i])


def analytic_gap_line(params: ModelParams, h0) -> np.ndarray:
    """Kick angle that closes the k = pi gap: h1 = tau |h0 - J| (J = h_c)."""
    return params.tau * np.abs(np.asarray(h0, dtype=float) - params.J)


@dataclass(frozen=True)
class GapLinePoint:
    h0: float
    h1_analytic: float
    h1_numeric: float
    gap_numeric: float
    gap_analytic: float


def minimize_gap(params: ModelParams, bracket=(0.0, 0.5), scan: int = 201):
    """Minimize Delta_F over h1 within ``bracket``: grid scan + golden section."""
    f = lambda h1: floquet_gap(params.with_h1(h1))[0]
    xs = np.linspace(bracket[0], bracket[1], scan)
    vals = np.array([f(x) for x in xs])
    i = int(np.argmin(vals))
    if 0 < i < scan - 1:
        res = minimize_scalar(f, bracket=(xs[i - 1], xs[i], xs[i + 1]), method="golden",
                              options={"xtol": 1e-10})
        if res.fun <= vals[i]:
            return float(res.x), float(res.fun)
    return float(xs[i]), float(vals[i])


def gap_line(params: ModelParams, h0_values: Iterable[float], bracket=None,
             scan: int = 201) -> list:
    """Analytic and numerically minimized gap-closing kick for each h0."""
    out = []
    for h0 in h0_values:
        p = params.with_(h0=float(h0))
        h1a = float(analytic_gap_line(p, h0))
        br = bracket if bracket is not None else (0.0, max(0.5, 2 * h1a))
        h1n, gn = minimize_gap(p, br, scan)
        out.append(GapLinePoint(float(h0), h1a, h1n, gn, floquet_gap(p.with_h1(h1a))[0]))
    return out


def stroboscopic(params: ModelParams, initial, ns: Sequence[int]):
    """Yield (n, ModeStates) for each requested period count."""
    base = initial if isinstance(initial, ModeStates) else initial_modes(params, initial)
    fm = floquet_mode(params, base.k)
    for n in ns:
        yield int(n), evolve_modes(params, base, int(n), floquet=fm)


__all__ = [
    "CorrelationData", "DegenerateMode", "FloquetModes", "GapLinePoint", "ModeHamiltonian",
    "ModeStates", "analytic_gap_line", "correlators_at", "evolve_modes", "floquet_closed_form",
    "floquet_gap", "floquet_mode", "gap_line", "initial_modes", "magnetization",
    "minimize_gap", "mode_hamiltonian", "period_propagator", "steady_correlators",
    "steady_modes", "stroboscopic", "su2_exp", "validate",
]
