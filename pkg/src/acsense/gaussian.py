"""Fermionic Gaussian block states: Majorana covariance, QFI, reconstruction.

Majorana operators on an L-site block are a_{2j} = f_j + f_j^+ and
a_{2j+1} = i(f_j^+ - f_j) (0-based), so with the Jordan-Wigner string they
act as sigma^x_j and sigma^y_j dressed by prod_{l<j}(-sigma^z_l).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import schur

from .core import EXPLICIT_CAP, InitialState, ModelParams, PolarizedUp
from .freefermion import (CorrelationData, correlators_at, floquet_mode, initial_modes,
                          evolve_modes, steady_modes)

PAIR_TOL = 1e-8


class NonPhysicalGamma(ValueError):
    """Covariance matrix outside the physical set (|nu| > 1 or not Hermitian)."""


class SingularState(RuntimeWarning):
    """QFI terms with a vanishing denominator carried a non-negligible weight."""


class DegenerateSLD(ArithmeticError):
    """The SLD equation has no solution on a required eigenpair."""


@dataclass(frozen=True)
class MajoranaCovariance:
    Gamma: np.ndarray
    L: int
    h1_tag: Optional[float] = None

    @property
    def M(self) -> np.ndarray:
        """Real antisymmetric part: Gamma = 1 + iM."""
        return np.real((self.Gamma - self.Gamma.T) / 2j)

    def block(self, L: int) -> "MajoranaCovariance":
        """Covariance of the leading L-site sub-block."""
        return MajoranaCovariance(self.Gamma[: 2 * L, : 2 * L], L, self.h1_tag)


@dataclass(frozen=True)
class BlockState:
    rho: np.ndarray
    L: int


def gamma_from_correlators(corr: CorrelationData, h1_tag: Optional[float] = None
                           ) -> MajoranaCovariance:
    C, I = corr.C, corr.I
    L = C.shape[0]
    d = np.eye(L)
    G = np.empty((2 * L, 2 * L), dtype=complex)
    G[0::2, 0::2] = d + 2j * np.imag(C + I)
    G[0::2, 1::2] = 1j * d - 2j * np.real(C - I)
    G[1::2, 0::2] = -1j * d + 2j * np.real(C + I)
    G[1::2, 1::2] = d + 2j * np.imag(C - I)
    return MajoranaCovariance(G, L, h1_tag)


def _modes_at(params: ModelParams, initial, n: Optional[int]):
    if n is None:
        return steady_modes(params, initial)
    return evolve_modes(params, initial, n)


def gamma_at(params: ModelParams, L: int, n: Optional[int] = None,
             initial: InitialState = PolarizedUp()) -> MajoranaCovariance:
    """Covariance of the L-site block after n periods (n=None: steady state)."""
    corr = correlators_at(params, _modes_at(params, initial, n), L,
                          label="steady-state" if n is None else n)
    return gamma_from_correlators(corr, params.h1)


# --- QFI from the covariance matrix ---------------------------------------

def qfi_from_gamma(gamma: np.ndarray, dgamma: np.ndarray, tol: float = PAIR_TOL) -> float:
    """QFI of a Gaussian state from Gamma and its parameter derivative.

    Works with Gamma' = Gamma - 1 = iM, whose eigenvalues lie in [-1, 1];
    F = 1/2 sum_rs |<r|dGamma|s>|^2 / (1 - g_r g_s), singular pairs skipped.
    """
    g, V = np.linalg.eigh(gamma - np.eye(len(gamma)))
    D = V.conj().T @ dgamma @ V
    num = np.abs(D) ** 2
    den = 1.0 - np.outer(g, g)
    ok = np.abs(den) >= tol
    skipped = num[~ok].sum()
    if skipped > 1e-6:
        warnings.warn(f"QFI skipped singular pairs carrying weight {skipped:.3g}", SingularState)
    return float(0.5 * np.sum(num[ok] / den[ok]))


def qfi_profile(params: ModelParams, Ls: Sequence[int], n: Optional[int] = None,
                initial: InitialState = PolarizedUp(), dh1: float = 1e-3) -> np.ndarray:
    """F_Q for several leading blocks from one evaluation at max(Ls)."""
    if dh1 <= 0:
        raise ValueError("dh1 must be > 0")
    Lmax = int(max(Ls))
    G0, Gm, Gp = (gamma_at(params.with_h1(h), Lmax, n, initial).Gamma
                  for h in (params.h1, params.h1 - dh1, params.h1 + dh1))
    dG = (Gp - Gm) / (2 * dh1)
    out = np.empty(len(Ls))
    for i, L in enumerate(Ls):
        s = slice(0, 2 * int(L))
        out[i] = qfi_from_gamma(G0[s, s], dG[s, s])
    return out


def qfi_gaussian(params: ModelParams, L: int, n: Optional[int] = None,
                 initial: InitialState = PolarizedUp(), dh1: float = 1e-3) -> float:
    """F_Q of the L-site block at time n, or in the steady state if n is None."""
    return float(qfi_profile(params, [L], n, initial, dh1)[0])


def qfi_time_series(params: ModelParams, Ls: Sequence[int], ns: Iterable[int],
                    initial: InitialState = PolarizedUp(), dh1: float = 1e-3) -> np.ndarray:
    """F_Q(n, L) as an array of shape (len(ns), len(Ls))."""
    ns = [int(n) for n in ns]
    Lmax = int(max(Ls))
    states = {}
    for key, h in (("0", params.h1), ("-", params.h1 - dh1), ("+", params.h1 + dh1)):
        p = params.with_h1(h)
        base = initial_modes(p, initial)
        states[key] = (p, base, floquet_mode(p, base.k))
    out = np.empty((len(ns), len(Ls)))
    for t, n in enumerate(ns):
        G = {}
        for key, (p, base, fm) in states.items():
            corr = correlators_at(p, evolve_modes(p, base, n, floquet=fm), Lmax, label=n)
            G[key] = gamma_from_correlators(corr).Gamma
        dG = (G["+"] - G["-"]) / (2 * dh1)
        for i, L in enumerate(Ls):
            s = slice(0, 2 * int(L))
            out[t, i] = qfi_from_gamma(G["0"][s, s], dG[s, s])
    return out


# --- explicit block state ---------------------------------------------------

@lru_cache(maxsize=None)
def majorana_operators(L: int) -> tuple:
    """Sparse 2^L x 2^L Majorana matrices (site 0 is the most significant bit)."""
    sx = sp.csr_matrix([[0, 1], [1, 0]], dtype=complex)
    sy = sp.csr_matrix([[0, -1j], [1j, 0]], dtype=complex)
    mz = sp.csr_matrix([[-1, 0], [0, 1]], dtype=complex)  # -sigma^z
    eye = sp.identity(2, dtype=complex, format="csr")
    ops = []
    for j in range(L):
        for local in (sx, sy):
            factors = [mz] * j + [local] + [eye] * (L - j - 1)
            op = factors[0]
            for f in factors[1:]:
                op = sp.kron(op, f, format="csr")
            ops.append(op)
    return tuple(ops)


@lru_cache(maxsize=None)
def _pair_products(L: int) -> dict:
    a = majorana_operators(L)
    return {(i, j): (a[i] @ a[j]).tocsr() for i in range(2 * L) for j in range(i + 1, 2 * L)}


def _check_physical(G: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    n = len(G)
    if np.max(np.abs(G - G.conj().T)) > 1e-8:
        raise NonPhysicalGamma("Gamma is not Hermitian")
    if np.max(np.abs(G + G.T - 2 * np.eye(n))) > 1e-8:
        raise NonPhysicalGamma("Gamma + Gamma^T differs from 2")
    M = np.real((G - G.T) / 2j)
    nu = np.linalg.eigvalsh(1j * M)
    if np.max(np.abs(nu)) > 1 + tol:
        raise NonPhysicalGamma(f"|nu| = {np.max(np.abs(nu)):.3g} exceeds 1")
    return M


def block_state_from_gamma(gamma: MajoranaCovariance, cap: int = EXPLICIT_CAP) -> BlockState:
    """Explicit 2^L density matrix of the Gaussian state with covariance Gamma.

    A real Schur rotation O brings M to 2x2 blocks [[0, b], [-b, 0]]; in the
    rotated Majoranas b_j = O^T a, rho = prod_j (1 - b_j i b_{2j} b_{2j+1}) / 2.
    """
    L = gamma.L
    if L > cap:
        raise ValueError(f"explicit reconstruction limited to L <= {cap}")
    M = _check_physical(gamma.Gamma)
    T, O = schur(M, output="real")
    pairs = _schur_pairs(T)
    products = _pair_products(L)
    dim = 2 ** L
    rho = np.eye(dim, dtype=complex) / dim
    for p, q in pairs:
        b = 0.5 * (T[p, q] - T[q, p])
        if abs(b) < 1e-14:
            continue
        A = np.outer(O[:, p], O[:, q]) - np.outer(O[:, q], O[:, p])
        X = sum((1j * A[i, j]) * P for (i, j), P in products.items())
        rho = rho - b * (X @ rho)
    rho = 0.5 * (rho + rho.conj().T)
    return BlockState(rho, L)


def _schur_pairs(T: np.ndarray) -> list:
    """Index pairs of the 2x2 blocks of a real Schur form; 1x1 zeros are paired."""
    n = len(T)
    pairs, singles, i = [], [], 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 0:
            pairs.append((i, i + 1))
            i += 2
        else:
            singles.append(i)
            i += 1
    pairs += list(zip(singles[0::2], singles[1::2]))
    return pairs


def majorana_expectations(state: BlockState) -> np.ndarray:
    """Tr(rho a_i a_j) from an explicit block state."""
    a = majorana_operators(state.L)
    ar = [op @ state.rho for op in a]
    n = len(a)
    G = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            G[i, j] = np.trace(a[i] @ ar[j])
    return G


# --- block observables ------------------------------------------------------

def _up_counts(L: int) -> np.ndarray:
    idx = np.arange(2 ** L)
    downs = np.zeros(2 ** L, dtype=int)
    for b in range(L):
        downs += (idx >> b) & 1
    return L - downs


def block_magnetization_distribution(state: BlockState) -> np.ndarray:
    """p_k for total sigma^z = L - 2(k-1), k = 1..L+1."""
    L = state.L
    diag = np.real(np.diag(state.rho))
    downs = L - _up_counts(L)
    return np.bincount(downs, weights=diag, minlength=L + 1)


def spin_correlators_two_site(corr: CorrelationData) -> dict:
    """Single- and two-site Pauli expectations of sites 0, 1 by Wick's theorem."""
    G = gamma_from_correlators(CorrelationData(corr.C[:2, :2], corr.I[:2, :2], corr.label)).Gamma
    g = lambda i, j: G[i - 1, j - 1]
    z1, z2 = -1j * g(1, 2), -1j * g(3, 4)
    return {
        "z1": np.real(z1), "z2": np.real(z2),
        "zz": np.real(-(g(1, 2) * g(3, 4) - g(1, 3) * g(2, 4) + g(1, 4) * g(2, 3))),
        "xx": np.real(1j * g(2, 3)), "yy": np.real(-1j * g(1, 4)),
        "xy": np.real(1j * g(2, 4)), "yx": np.real(-1j * g(1, 3)),
    }


def two_site_density_matrix(corr: CorrelationData) -> BlockState:
    """X-shaped two-site state in the basis uu, ud, du, dd."""
    s = spin_correlators_two_site(corr)
    z1, z2, zz = s["z1"], s["z2"], s["zz"]
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 0.25 * (1 + z1 + z2 + zz)
    rho[1, 1] = 0.25 * (1 + z1 - z2 - zz)
    rho[2, 2] = 0.25 * (1 - z1 + z2 - zz)
    rho[3, 3] = 0.25 * (1 - z1 - z2 + zz)
    rho[1, 2] = 0.25 * (s["xx"] + s["yy"] + 1j * (s["xy"] - s["yx"]))
    rho[0, 3] = 0.25 * (s["xx"] - s["yy"] - 1j * (s["xy"] + s["yx"]))
    rho[2, 1] = np.conj(rho[1, 2])
    rho[3, 0] = np.conj(rho[0, 3])
    return BlockState(rho, 2)


@dataclass(frozen=True)
class SLDResult:
    sld: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray  # columns; the last two are the fixed singlet/triplet pair


def sld_two_site(state: BlockState, dstate: np.ndarray, tol: float = 1e-12) -> SLDResult:
    """Solve d rho = (L rho + rho L)/2 for an X-shaped two-site state."""
    rho = state.rho
    lam, V = np.linalg.eigh(rho)
    D = V.conj().T @ dstate @ V
    den = lam[:, None] + lam[None, :]
    small = den < tol
    if np.any(np.abs(D[small]) > 1e-10):
        raise DegenerateSLD("lambda_r + lambda_s vanishes on a pair with nonzero derivative")
    Lr = np.where(small, 0.0, 2.0 * D / np.where(small, 1.0, den))
    sld = V @ Lr @ V.conj().T
    sld = 0.5 * (sld + sld.conj().T)

    outer = sld[np.ix_([0, 3], [0, 3])]
    w, c = np.linalg.eigh(outer)
    vecs = np.zeros((4, 4), dtype=complex)
    vecs[[0, 3], 0], vecs[[0, 3], 1] = c[:, 0], c[:, 1]
    r = 1 / np.sqrt(2)
    vecs[[1, 2], 2] = (r, -r)
    vecs[[1, 2], 3] = (r, r)
    vals = np.concatenate([w, np.real(np.einsum("ia,ij,ja->a", vecs[:, 2:].conj(), sld, vecs[:, 2:]))])
    for col in range(2):
        v = vecs[:, col]
        big = v[np.argmax(np.abs(v))]
        vecs[:, col] = v * (abs(big) / big)
    return SLDResult(sld, vals, vecs)


__all__ = [
    "BlockState", "DegenerateSLD", "MajoranaCovariance", "NonPhysicalGamma", "SLDResult",
    "SingularState", "block_magnetization_distribution", "block_state_from_gamma",
    "gamma_at", "gamma_from_correlators", "majorana_expectations", "majorana_operators",
    "qfi_from_gamma", "qfi_gaussian", "qfi_profile", "qfi_time_series", "sld_two_site",
    "spin_correlators_two_site", "two_site_density_matrix",
]
