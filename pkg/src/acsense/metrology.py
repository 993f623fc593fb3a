"""Fisher information, scaling fits and Bayesian estimation of the kick strength."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import curve_fit

from .gaussian import BlockState, block_magnetization_distribution

EIG_TOL = 1e-12


class SingularOutcome(RuntimeWarning):
    """An outcome with vanishing probability has a non-vanishing derivative."""


class NonPositiveInput(ValueError):
    pass


class AllZeroLikelihood(ArithmeticError):
    pass


@dataclass(frozen=True)
class FisherResult:
    value: float
    kind: str  # "quantum" or "classical"
    context: dict = field(default_factory=dict)


def _matrix(rho) -> np.ndarray:
    return rho.rho if isinstance(rho, BlockState) else np.asarray(rho)


def qfi_spectral(rho, drho, tol: float = EIG_TOL) -> float:
    """F_Q = sum_rs 2 |<r|d rho|s>|^2 / (l_r + l_s) over pairs with l_r + l_s >= tol."""
    lam, V = np.linalg.eigh(_matrix(rho))
    D = V.conj().T @ np.asarray(drho) @ V
    den = lam[:, None] + lam[None, :]
    ok = den >= tol
    return float(np.sum(2.0 * np.abs(D[ok]) ** 2 / den[ok]))


def qfi_single_site(mz: float, dmz: float) -> float:
    """Closed form for one qubit diagonal in the sz basis."""
    return float(dmz ** 2 / ((1 + mz) * (1 - mz)))


def cfi(p, dp, tol: float = EIG_TOL) -> float:
    """Classical Fisher information sum (dp)^2 / p."""
    p, dp = np.asarray(p, dtype=float), np.asarray(dp, dtype=float)
    ok = p > tol
    if np.any(np.abs(dp[~ok]) > 1e-8):
        warnings.warn("outcome with p ~ 0 has a non-zero derivative", SingularOutcome)
    return float(np.sum(dp[ok] ** 2 / p[ok]))


def block_fisher(rho_minus, rho, rho_plus, dh1: float, context: Optional[dict] = None):
    """Quantum and block-magnetization Fisher information from one stencil.

    Both use the same central difference of the density matrix, so the
    ordering F_C <= F_Q holds exactly up to rounding.
    """
    L = int(round(np.log2(_matrix(rho).shape[0])))
    drho = (_matrix(rho_plus) - _matrix(rho_minus)) / (2 * dh1)
    fq = qfi_spectral(rho, drho)
    dist = lambda r: block_magnetization_distribution(BlockState(_matrix(r), L))
    p = dist(rho)
    dp = (dist(rho_plus) - dist(rho_minus)) / (2 * dh1)
    ctx = dict(context or {}, L=L)
    return (FisherResult(fq, "quantum", ctx),
            FisherResult(cfi(p, dp), "classical", dict(ctx, measurement="block magnetization")))


def steady_average(series, n_min: int = 4000, n_max: int = 4400, ns=None) -> float:
    """Mean of the series over n_min <= n < n_max.

    ``series[i]`` is taken at period ``ns[i]`` (default ``i``).
    """
    if not n_max > n_min >= 0:
        raise ValueError("need n_max > n_min >= 0")
    series = np.asarray(series)
    ns = np.arange(len(series)) if ns is None else np.asarray(ns)
    sel = (ns >= n_min) & (ns < n_max)
    if not np.any(sel):
        raise ValueError("no samples inside the averaging window")
    return float(np.mean(series[sel], axis=0)) if series.ndim == 1 else np.mean(series[sel], axis=0)


@dataclass(frozen=True)
class ScalingFit:
    A: float
    eta: float
    residual: float  # sum of squared log-residuals
    L_range: tuple
    method: str = "loglog"

    def __call__(self, L):
        return self.A * np.asarray(L, dtype=float) ** self.eta


def fit_scaling(L, F, method: str = "loglog") -> ScalingFit:
    """Fit F = A L^eta.

    ``loglog`` is linear least squares on (log L, log F); ``linear``
    minimizes the squared error of F itself, started from the log-log fit,
    which weights the large blocks most.
    """
    L, F = np.asarray(L, dtype=float), np.asarray(F, dtype=float)
    if len(L) < 3 or len(L) != len(F):
        raise ValueError("need at least 3 (L, F) points")
    if np.any(L <= 0) or np.any(F <= 0):
        raise NonPositiveInput("scaling fit needs positive L and F")
    x, y = np.log(L), np.log(F)
    eta, logA = np.polyfit(x, y, 1)
    A = float(np.exp(logA))
    if method == "linear":
        (A, eta), _ = curve_fit(lambda l, a, e: a * l ** e, L, F, p0=(A, eta), maxfev=20000)
    elif method != "loglog":
        raise ValueError("method must be 'loglog' or 'linear'")
    res = float(np.sum((y - np.log(A) - eta * x) ** 2))
    return ScalingFit(float(A), float(eta), res, (float(L.min()), float(L.max())), method)


# --- measurement records and Bayesian inference --------------------------------

@dataclass(frozen=True)
class MeasurementRecord:
    counts: np.ndarray  # n_k for outcome k = 1..L+1

    @property
    def M(self) -> int:
        return int(np.sum(self.counts))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def simulate_measurements(dist, M: int, seed=None) -> MeasurementRecord:
    """Multinomial sample of M outcomes drawn from ``dist`` (PCG64)."""
    if M < 1:
        raise ValueError("M must be >= 1")
    p = np.clip(np.asarray(dist, dtype=float), 0.0, None)
    p = p / p.sum()
    return MeasurementRecord(_rng(seed).multinomial(M, p))


@dataclass(frozen=True)
class Posterior:
    grid: np.ndarray
    mass: np.ndarray
    map: float
    prior_id: str = "uniform"
    degenerate_map: bool = False

    @property
    def mean(self) -> float:
        return float(np.sum(self.grid * self.mass))


def log_likelihood(record: MeasurementRecord, probs: np.ndarray) -> np.ndarray:
    """sum_k n_k log p_k(h1) for each grid row of ``probs`` (G, K)."""
    n = np.asarray(record.counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    with np.errstate(divide="ignore"):
        logp = np.log(np.clip(probs, 0.0, None))
    terms = np.where(n[None, :] > 0, n[None, :] * logp, 0.0)
    return terms.sum(axis=1)


def bayes_posterior(record: MeasurementRecord, model: Union[Callable, np.ndarray],
                    grid, prior=None, prior_id: str = "uniform") -> Posterior:
    """Posterior over ``grid``; ``model`` maps h1 to outcome probabilities or is a (G, K) table."""
    grid = np.asarray(grid, dtype=float)
    probs = np.asarray(model) if not callable(model) else np.array([model(h) for h in grid])
    logpost = log_likelihood(record, probs)
    if prior is not None:
        with np.errstate(divide="ignore"):
            logpost = logpost + np.log(np.asarray(prior, dtype=float))
    top = np.max(logpost)
    if not np.isfinite(top):
        raise AllZeroLikelihood("every grid point has zero likelihood")
    w = np.exp(logpost - top)
    mass = w / w.sum()
    i = int(np.argmax(logpost))
    ties = np.count_nonzero(np.abs(logpost - top) <= 1e-12 * max(1.0, abs(top)))
    return Posterior(grid, mass, float(grid[i]), prior_id, ties > 1)


@dataclass(frozen=True)
class VarianceResult:
    variance: float
    estimates: np.ndarray
    cramer_rao: Optional[float] = None


def estimator_variance(pipeline: Callable[[np.random.Generator], float], R: int,
                       seed: int = 0, M: Optional[int] = None,
                       fisher_c: Optional[float] = None) -> VarianceResult:
    """Sample variance of ``pipeline`` estimates over R independently seeded runs."""
    if R < 2:
        raise ValueError("R must be >= 2")
    children = np.random.SeedSequence(seed).spawn(R)
    est = np.array([pipeline(np.random.Generator(np.random.PCG64(s))) for s in children])
    crb = 1.0 / (M * fisher_c) if M and fisher_c else None
    return VarianceResult(float(np.var(est, ddof=1)), est, crb)


__all__ = [
    "AllZeroLikelihood", "FisherResult", "MeasurementRecord", "NonPositiveInput", "Posterior",
    "ScalingFit", "SingularOutcome", "VarianceResult", "bayes_posterior", "block_fisher", "cfi",
    "estimator_variance", "fit_scaling", "log_likelihood", "qfi_single_site", "qfi_spectral",
    "simulate_measurements", "steady_average",
]
