"""Experiment runners shared by the command line and the acceptance suite."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import ed
from .core import InitialState, ModelParams, PolarizedUp
from .freefermion import (correlators_at, evolve_modes, floquet_gap, floquet_mode, gap_line,
                          initial_modes, magnetization, steady_modes)
from .gaussian import (MajoranaCovariance, block_state_from_gamma, gamma_from_correlators,
                       qfi_from_gamma, qfi_profile)
from .metrology import (VarianceResult, bayes_posterior, block_fisher, cfi, estimator_variance,
                        fit_scaling, simulate_measurements, steady_average)


def parallel_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Order-preserving map over a thread pool."""
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# --- free-fermion time series ---------------------------------------------------

def ff_series(params: ModelParams, Ls: Sequence[int], ns: Iterable[int],
              initial: InitialState = PolarizedUp(), dh1: float = 1e-3,
              classical: bool = False):
    """Rows (n, L, m_z, F_Q[, F_C]) from the free-fermion engine.

    F_Q comes from the covariance matrix. With ``classical`` the explicit
    block states at h1 and h1 +- dh1 are built and both F_Q and the
    block-magnetization F_C are taken from them.
    """
    ns = [int(n) for n in ns]
    Lmax = int(max(Ls))
    runs = []
    for h in (params.h1, params.h1 - dh1, params.h1 + dh1):
        p = params.with_h1(h)
        base = initial_modes(p, initial)
        runs.append((p, base, floquet_mode(p, base.k)))
    rows = []
    for n in ns:
        modes = [evolve_modes(p, b, n, floquet=fm) for p, b, fm in runs]
        G = [gamma_from_correlators(correlators_at(p, m, Lmax, label=n)).Gamma
             for (p, _, _), m in zip(runs, modes)]
        dG = (G[2] - G[1]) / (2 * dh1)
        mz = magnetization(modes[0])
        for L in Ls:
            s = slice(0, 2 * L)
            if classical:
                # paired spectral route so that F_C <= F_Q holds on the same stencil
                states = [block_state_from_gamma(MajoranaCovariance(g[s, s], L)) for g in G]
                fq, fc = block_fisher(states[1], states[0], states[2], dh1)
                rows.append((n, L, mz, fq.value, fc.value))
            else:
                rows.append((n, L, mz, qfi_from_gamma(G[0][s, s], dG[s, s])))
    return rows


def steady_qfi(params: ModelParams, Ls: Sequence[int], initial: InitialState = PolarizedUp(),
               dh1: float = 1e-3, method: str = "diagonal", window=(4000, 4400)) -> np.ndarray:
    """F^ss_Q per block size, from the diagonal ensemble or a time average."""
    if method == "diagonal":
        return qfi_profile(params, Ls, None, initial, dh1)
    if method == "average":
        rows = ff_series(params, Ls, range(window[0], window[1]), initial, dh1)
        F = np.array([r[3] for r in rows]).reshape(-1, len(Ls))
        return steady_average(F, window[0], window[1], ns=np.arange(window[0], window[1]))
    raise ValueError("method must be 'diagonal' or 'average'")


def scaling_table(params: ModelParams, Ls: Sequence[int], method: str = "diagonal",
                  fit_method: str = "linear", window=(4000, 4400), dh1: float = 1e-3,
                  initial: InitialState = PolarizedUp()):
    F = steady_qfi(params, Ls, initial, dh1, method, window)
    return F, fit_scaling(Ls, F, method=fit_method)


def gap_grid(params: ModelParams, h0s, h1s, threads: int = 1):
    pts = [(a, b) for a in h0s for b in h1s]
    res = parallel_map(lambda ab: floquet_gap(params.with_(h0=ab[0], h1=ab[1])), pts, threads)
    return [(a, b, g, k) for (a, b), (g, k) in zip(pts, res)]


def qfi_grid(params: ModelParams, h0s, h1s, L: int, dh1: float = 1e-3,
             initial: InitialState = PolarizedUp(), threads: int = 1, with_gap: bool = False):
    pts = [(a, b) for a in h0s for b in h1s]

    def one(ab):
        p = params.with_(h0=ab[0], h1=ab[1])
        F = float(qfi_profile(p, [L], None, initial, dh1)[0])
        mz = magnetization(steady_modes(p, initial))
        return (ab[0], ab[1], F, mz) + ((floquet_gap(p)[0],) if with_gap else ())
    return parallel_map(one, pts, threads)


# --- exact diagonalization ------------------------------------------------------

def ed_series(edp: ed.EDParams, L: int, ns: Iterable[int], initial: InitialState = PolarizedUp(),
              dh1: float = 1e-3, sector: str = "full"):
    """Rows (n, L, m_z, F_Q, F_C) from the exact engine."""
    eng = ed.engine_for(edp, sector)
    s0 = eng.initial_state(initial)
    ns = sorted(int(n) for n in ns)
    trajs = [eng.trajectory(s0, ns, h) for h in (edp.h1, edp.h1 - dh1, edp.h1 + dh1)]
    rows = []
    for (n, s), (_, sm), (_, sp) in zip(*trajs):
        blocks = [ed.partial_trace(x, L) for x in (s, sm, sp)]
        fq, fc = block_fisher(blocks[1], blocks[0], blocks[2], dh1)
        rows.append((n, L, ed.magnetization_ed(s), fq.value, fc.value))
    return rows


@dataclass(frozen=True)
class BayesSetup:
    grid: np.ndarray
    table: np.ndarray      # outcome probabilities on the grid, (G, L+1)
    truth: np.ndarray      # outcome probabilities at the true h1
    fisher_c: float        # block-magnetization Fisher information at the true h1


def bayes_setup(edp: ed.EDParams, L: int, n_obs: int, prior=(0.0, 0.32), points: int = 200,
                dh1: float = 1e-3, sector: str = "symmetric",
                initial: InitialState = PolarizedUp()) -> BayesSetup:
    """Outcome tables of the block-magnetization measurement after n_obs periods."""
    eng = ed.engine_for(edp, sector)
    s0 = eng.initial_state(initial)
    grid = np.linspace(prior[0], prior[1], points)
    h = edp.h1
    psis = eng.evolve_batch(s0, np.r_[grid, h, h - dh1, h + dh1], n_obs)
    P = ed.block_magnetization_batch(psis, edp.N, L)
    fc = cfi(P[-3], (P[-1] - P[-2]) / (2 * dh1))
    return BayesSetup(grid, P[:-3], P[-3], fc)


def bayes_variance(setup: BayesSetup, M: int, R: int, seed: int = 0) -> VarianceResult:
    """Variance of the MAP estimate over R seeded repetitions of M shots."""
    def pipeline(rng):
        rec = simulate_measurements(setup.truth, M, rng)
        return bayes_posterior(rec, setup.table, setup.grid).map
    return estimator_variance(pipeline, R, seed=seed, M=M, fisher_c=setup.fisher_c)


__all__ = [
    "BayesSetup", "bayes_setup", "bayes_variance", "ed_series", "ff_series", "gap_grid",
    "gap_line", "parallel_map", "qfi_grid", "scaling_table", "steady_qfi",
]
