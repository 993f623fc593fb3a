"""``sense`` command line: config parsing, experiment dispatch and CSV tables.

Config files hold one ``key = value`` per line; ``#`` starts a comment and
dotted keys group related settings. Grids are written ``start:stop:points``
and integer ranges ``first..last``; lists are comma separated.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, ed
from .core import (DeltaKick, GroundStateOfH0, InvalidParams, ModelParams, PolarizedUp,
                   SquarePulse, ThermalOfH0, validate)
from .experiments import (bayes_setup, bayes_variance, ed_series, ff_series, gap_grid, gap_line,
                          qfi_grid, scaling_table)
from .gaussian import NonPhysicalGamma
from .metrology import AllZeroLikelihood, NonPositiveInput

EXPERIMENTS = ("evolve", "gap-scan", "qfi-scan", "gap-line", "scale", "estimate", "ed-evolve",
               "square-pulse-scan")


class ConfigError(ValueError):
    def __init__(self, message: str, keys: Sequence[str] = ()):
        super().__init__(message)
        self.keys = list(keys)


class SchemaMismatch(ValueError):
    pass


# --- configuration ------------------------------------------------------------

DEFAULTS: Dict[str, str] = {
    "engine": "freefermion",
    "model.J": "1", "model.h0": "1", "model.h1": "0.1", "model.tau": "0.2", "model.N": "2000",
    "model.pulse": "delta", "model.w": "", "model.allow_large_tau": "false",
    "initial.state": "polarized", "initial.h0": "", "initial.beta": "1",
    "ed.alpha": "inf", "ed.boundary": "", "ed.sector": "full",
    "block.L": "4",
    "time.n": "0..400", "window.n_min": "4000", "window.n_max": "4400",
    "steady.method": "diagonal", "qfi.dh1": "1e-3", "qfi.classical": "false",
    "grid.h0": "0:2:101", "grid.h1": "0:0.5:101", "gap.bracket": "",
    "fit.method": "linear",
    "bayes.M": "1000,10000", "bayes.R": "50", "bayes.prior": "0:0.32", "bayes.points": "200",
    "bayes.n_obs": "500", "bayes.h1_true": "",
    "seed": "0", "output": "",
}


def parse_config_text(text: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", [line])
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key", [])
        out[key] = value
    return out


def _float(v: str, key: str) -> float:
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"{key}: '{v}' is not a number", [key]) from None


def _int(v: str, key: str) -> int:
    x = _float(v, key)
    if not x.is_integer():
        raise ConfigError(f"{key}: '{v}' is not an integer", [key])
    return int(x)


def _bool(v: str, key: str) -> bool:
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: '{v}' is not a boolean", [key])


def _ints(v: str, key: str) -> List[int]:
    out: List[int] = []
    for part in v.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..", 1)
            lo, hi = _int(a, key), _int(b, key)
            if hi < lo:
                raise ConfigError(f"{key}: empty range '{part}'", [key])
            out.extend(range(lo, hi + 1))
        elif part:
            out.append(_int(part, key))
    if not out:
        raise ConfigError(f"{key}: empty list", [key])
    return out


def _floats(v: str, key: str) -> List[float]:
    vals = [_float(p, key) for p in v.split(",") if p.strip()]
    if not vals:
        raise ConfigError(f"{key}: empty list", [key])
    return vals


def _grid(v: str, key: str) -> np.ndarray:
    parts = v.split(":")
    if len(parts) != 3:
        raise ConfigError(f"{key}: grid must be 'start:stop:points'", [key])
    a, b, n = _float(parts[0], key), _float(parts[1], key), _int(parts[2], key)
    if n < 1 or (n > 1 and b < a):
        raise ConfigError(f"{key}: grid needs points >= 1 and stop >= start", [key])
    return np.linspace(a, b, n)


def _interval(v: str, key: str) -> Tuple[float, float]:
    parts = v.split(":")
    if len(parts) != 2:
        raise ConfigError(f"{key}: interval must be 'lo:hi'", [key])
    lo, hi = _float(parts[0], key), _float(parts[1], key)
    if not hi > lo:
        raise ConfigError(f"{key}: interval must have hi > lo", [key])
    return lo, hi


@dataclass
class RunConfig:
    experiment: str
    raw: Dict[str, str]
    params: ModelParams
    initial: object
    engine: str
    Ls: List[int]
    seed: int
    output: Optional[str]
    edp: Optional[ed.EDParams] = None
    extra: Dict[str, object] = field(default_factory=dict)

    def echo(self) -> Dict[str, str]:
        return dict(sorted(self.raw.items()))


def build_config(experiment: str, values: Dict[str, str], seed: Optional[int] = None,
                 output: Optional[str] = None) -> RunConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{experiment}'", ["experiment"])
    unknown = sorted(set(values) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}", unknown)
    raw = {**DEFAULTS, **values}
    if seed is not None:
        raw["seed"] = str(seed)
    if output is not None:
        raw["output"] = output
    g = raw.get

    tau = _float(g("model.tau"), "model.tau")
    pulse_kind = g("model.pulse")
    if pulse_kind == "delta":
        pulse = DeltaKick()
    elif pulse_kind == "square":
        w = g("model.w") or str(tau / 2)
        pulse = SquarePulse(_float(w, "model.w"))
    else:
        raise ConfigError("model.pulse must be 'delta' or 'square'", ["model.pulse"])
    N = _int(g("model.N"), "model.N")
    params = ModelParams(J=_float(g("model.J"), "model.J"), h0=_float(g("model.h0"), "model.h0"),
                         h1=_float(g("model.h1"), "model.h1"), tau=tau, N=N, pulse=pulse,
                         allow_large_tau=_bool(g("model.allow_large_tau"), "model.allow_large_tau"))
    Ls = _ints(g("block.L"), "block.L")
    engine = g("engine")
    if engine not in ("freefermion", "ed"):
        raise ConfigError("engine must be 'freefermion' or 'ed'", ["engine"])
    if experiment in ("estimate", "ed-evolve"):
        engine = "ed"
    # odd chains are fine for exact diagonalization; check the rest on an even stand-in
    odd_ed = engine == "ed" and isinstance(N, int) and N % 2 == 1
    try:
        checked = validate(params.with_(N=N + 1) if odd_ed else params, L=max(Ls))
        params = checked.with_(N=N) if odd_ed else checked
    except InvalidParams as e:
        names = {"L": "block.L", "pulse.w": "model.w"}
        raise ConfigError(str(e), [names.get(k, f"model.{k}") for k in e.keys]) from None

    kind = g("initial.state")
    ih0 = _float(g("initial.h0"), "initial.h0") if g("initial.h0") else None
    if kind == "polarized":
        initial = PolarizedUp()
    elif kind == "ground":
        initial = GroundStateOfH0(ih0)
    elif kind == "thermal":
        beta = _float(g("initial.beta"), "initial.beta")
        if beta < 0:
            raise ConfigError("initial.beta must be >= 0", ["initial.beta"])
        initial = ThermalOfH0(beta, ih0)
    else:
        raise ConfigError("initial.state must be polarized, ground or thermal", ["initial.state"])

    edp = None
    if engine == "ed":
        boundary = g("ed.boundary") or None
        try:
            edp = ed.EDParams(N=N, alpha=_float(g("ed.alpha"), "ed.alpha"), J=params.J,
                              h0=params.h0, h1=params.h1, tau=tau, pulse=pulse,
                              boundary=boundary)
        except InvalidParams as e:
            raise ConfigError(str(e), [f"ed.{k}" if k in ("alpha", "boundary") else f"model.{k}"
                                       for k in e.keys]) from None
        if g("ed.sector") not in ("full", "symmetric"):
            raise ConfigError("ed.sector must be 'full' or 'symmetric'", ["ed.sector"])

    extra: Dict[str, object] = {
        "ns": _ints(g("time.n"), "time.n"),
        "window": (_int(g("window.n_min"), "window.n_min"), _int(g("window.n_max"), "window.n_max")),
        "dh1": _float(g("qfi.dh1"), "qfi.dh1"),
        "classical": _bool(g("qfi.classical"), "qfi.classical"),
        "method": g("steady.method"),
        "fit": g("fit.method"),
        "h0s": _grid(g("grid.h0"), "grid.h0"),
        "h1s": _grid(g("grid.h1"), "grid.h1"),
        "bracket": _interval(g("gap.bracket"), "gap.bracket") if g("gap.bracket") else None,
        "Ms": _ints(g("bayes.M"), "bayes.M"),
        "R": _int(g("bayes.R"), "bayes.R"),
        "prior": _interval(g("bayes.prior"), "bayes.prior"),
        "points": _int(g("bayes.points"), "bayes.points"),
        "n_obs": _int(g("bayes.n_obs"), "bayes.n_obs"),
        "h1_true": _floats(g("bayes.h1_true"), "bayes.h1_true") if g("bayes.h1_true") else [params.h1],
        "sector": g("ed.sector"),
    }
    w0, w1 = extra["window"]
    if not w1 > w0 >= 0:
        raise ConfigError("window needs n_max > n_min >= 0", ["window.n_min", "window.n_max"])
    if extra["dh1"] <= 0:
        raise ConfigError("qfi.dh1 must be > 0", ["qfi.dh1"])
    if min(extra["ns"]) < 0:
        raise ConfigError("time.n must be >= 0", ["time.n"])
    if extra["method"] not in ("diagonal", "average"):
        raise ConfigError("steady.method must be 'diagonal' or 'average'", ["steady.method"])
    if extra["fit"] not in ("linear", "loglog"):
        raise ConfigError("fit.method must be 'linear' or 'loglog'", ["fit.method"])
    if extra["R"] < 2:
        raise ConfigError("bayes.R must be >= 2", ["bayes.R"])
    if extra["points"] < 2 or min(extra["Ms"]) < 1 or extra["n_obs"] < 0:
        raise ConfigError("bayes.points >= 2, bayes.M >= 1 and bayes.n_obs >= 0 required",
                          ["bayes.points", "bayes.M", "bayes.n_obs"])
    out = g("output") or None
    if out:
        parent = os.path.dirname(os.path.abspath(out))
        if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
            raise ConfigError(f"output directory '{parent}' is not writable", ["output"])
    return RunConfig(experiment, raw, params, initial, engine, Ls,
                     _int(g("seed"), "seed"), out, edp, extra)


def load_config(experiment: str, path: str, **kw) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}", ["--config"]) from None
    return build_config(experiment, parse_config_text(text), **kw)


# --- tables ---------------------------------------------------------------------

@dataclass
class ResultTable:
    columns: List[Tuple[str, str]]  # (name, "int" | "float")
    rows: List[tuple]
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        for r in self.rows:
            if len(r) != len(self.columns):
                raise SchemaMismatch(f"row {r!r} does not match {len(self.columns)} columns")

    @property
    def names(self) -> List[str]:
        return [c[0] for c in self.columns]

    def column(self, name: str) -> np.ndarray:
        i = self.names.index(name)
        return np.array([r[i] for r in self.rows])

    def body(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.names) + "\n")
        for r in self.rows:
            buf.write(",".join(_fmt(v, t) for v, (_, t) in zip(r, self.columns)) + "\n")
        return buf.getvalue()

    def to_csv(self) -> str:
        meta = dict(self.metadata)
        meta["schema"] = self.columns
        head = "".join(f"# {k} = {json.dumps(v, sort_keys=True)}\n" for k, v in meta.items())
        return head + self.body()


def _fmt(v, kind: str) -> str:
    if kind == "int":
        return str(int(v))
    return f"{float(v):.17e}"


def read_csv(text: str) -> ResultTable:
    meta: Dict[str, object] = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, _, val = lines[i][1:].partition("=")
        meta[key.strip()] = json.loads(val)
        i += 1
    columns = [tuple(c) for c in meta.pop("schema")]
    names = lines[i].split(",")
    if names != [c[0] for c in columns]:
        raise SchemaMismatch("header does not match schema")
    conv = [int if t == "int" else float for _, t in columns]
    rows = [tuple(f(x) for f, x in zip(conv, ln.split(","))) for ln in lines[i + 1:] if ln]
    return ResultTable(columns, rows, meta)


@dataclass(frozen=True)
class DiffReport:
    passed: bool
    columns: Dict[str, Dict[str, float]]

    @property
    def failing(self) -> List[str]:
        return [k for k, v in self.columns.items() if not v["passed"]]


def diff_tables(a: ResultTable, b: ResultTable, atol: float = 1e-8, rtol: float = 0.0,
                tolerances: Optional[Dict[str, float]] = None) -> DiffReport:
    """Per-column max absolute / relative deviations; a column passes when
    every entry satisfies |a - b| <= atol + rtol |b| (per-column atol override)."""
    if a.columns != b.columns:
        raise SchemaMismatch(f"columns differ: {a.columns} vs {b.columns}")
    if len(a.rows) != len(b.rows):
        raise SchemaMismatch(f"row counts differ: {len(a.rows)} vs {len(b.rows)}")
    report = {}
    for name, _ in a.columns:
        x, y = a.column(name).astype(float), b.column(name).astype(float)
        d = np.abs(x - y)
        tol = (tolerances or {}).get(name, atol)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(d == 0, 0.0, d / np.abs(y))
        ok = bool(np.all(d <= tol + rtol * np.abs(y))) if len(d) else True
        report[name] = {"max_abs": float(d.max(initial=0.0)),
                        "max_rel": float(rel.max(initial=0.0)), "passed": ok}
    return DiffReport(all(v["passed"] for v in report.values()), report)


# --- experiments ----------------------------------------------------------------

F, I = "float", "int"


def _run_evolve(cfg: RunConfig, threads: int) -> ResultTable:
    x = cfg.extra
    p = cfg.params
    cols = [("n", I), ("t", F), ("L", I), ("mz", F), ("F_Q", F)]
    if cfg.engine == "ed":
        rows = []
        for L in cfg.Ls:
            rows += [(n, n * p.tau, L, mz, fq, fc) for n, L, mz, fq, fc in
                     ed_series(cfg.edp, L, x["ns"], cfg.initial, x["dh1"], x["sector"])]
        rows.sort(key=lambda r: (r[0], r[2]))
        return ResultTable(cols + [("F_C", F)], rows)
    rows = ff_series(p, cfg.Ls, x["ns"], cfg.initial, x["dh1"], x["classical"])
    rows = [(r[0], r[0] * p.tau) + tuple(r[1:]) for r in rows]
    return ResultTable(cols + ([("F_C", F)] if x["classical"] else []), rows)


def _run_gap_scan(cfg, threads):
    rows = gap_grid(cfg.params, cfg.extra["h0s"], cfg.extra["h1s"], threads)
    return ResultTable([("h0", F), ("h1", F), ("gap", F), ("argmin_k", F)], rows)


def _run_qfi_scan(cfg, threads, with_gap=False):
    rows = []
    for L in cfg.Ls:
        res = qfi_grid(cfg.params, cfg.extra["h0s"], cfg.extra["h1s"], L, cfg.extra["dh1"],
                       cfg.initial, threads, with_gap)
        rows += [(r[0], r[1], L) + tuple(r[2:]) for r in res]
    cols = [("h0", F), ("h1", F), ("L", I), ("F_ss", F), ("mz_ss", F)]
    cols += [("gap", F)] if with_gap else []
    return ResultTable(cols, rows)


def _run_gap_line(cfg, threads):
    pts = gap_line(cfg.params, cfg.extra["h0s"], bracket=cfg.extra["bracket"])
    return ResultTable([("h0", F), ("h1_analytic", F), ("h1_numeric", F), ("gap_numeric", F),
                        ("gap_analytic", F)],
                       [(q.h0, q.h1_analytic, q.h1_numeric, q.gap_numeric, q.gap_analytic)
                        for q in pts])


def _run_scale(cfg, threads):
    x = cfg.extra
    Fs, fit = scaling_table(cfg.params, cfg.Ls, x["method"], x["fit"], x["window"], x["dh1"],
                            cfg.initial)
    rows = [(L, f, float(fit(L))) for L, f in zip(cfg.Ls, Fs)]
    meta = {"fit": {"A": fit.A, "eta": fit.eta, "residual": fit.residual, "method": fit.method}}
    return ResultTable([("L", I), ("F_ss", F), ("F_fit", F)], rows, meta)


def _run_estimate(cfg, threads):
    x = cfg.extra
    L = cfg.Ls[0]
    rows = []
    for h in x["h1_true"]:
        setup = bayes_setup(cfg.edp.with_(h1=h), L, x["n_obs"], x["prior"], x["points"],
                            x["dh1"], x["sector"], cfg.initial)
        for M in x["Ms"]:
            v = bayes_variance(setup, M, x["R"], seed=cfg.seed)
            rows.append((h, M, v.variance, float(np.mean(v.estimates)),
                         v.cramer_rao if v.cramer_rao is not None else math.nan))
    return ResultTable([("h1_true", F), ("M", I), ("variance", F), ("mean_estimate", F),
                        ("cramer_rao", F)], rows)


def _run_ed_evolve(cfg, threads):
    return _run_evolve(cfg, threads)


def _run_square(cfg, threads):
    return _run_qfi_scan(cfg, threads, with_gap=True)


RUNNERS = {"evolve": _run_evolve, "gap-scan": _run_gap_scan, "qfi-scan": _run_qfi_scan,
           "gap-line": _run_gap_line, "scale": _run_scale, "estimate": _run_estimate,
           "ed-evolve": _run_ed_evolve, "square-pulse-scan": _run_square}


def run(cfg: RunConfig, threads: int = 1) -> ResultTable:
    t0 = time.perf_counter()
    table = RUNNERS[cfg.experiment](cfg, threads)
    table.metadata = {"experiment": cfg.experiment, "version": __version__,
                      "config": cfg.echo(), **table.metadata,
                      "wall_time_s": round(time.perf_counter() - t0, 3)}
    return table


def _error(code: str, message: str, keys: Sequence[str], status: int) -> int:
    sys.stderr.write(json.dumps({"code": code, "message": message,
                                 "offending_keys": list(keys)}) + "\n")
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = argparse.ArgumentParser(prog="sense", description="Kicked Ising chain AC-field sensing.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--out")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    threads = args.threads
    env = os.environ.get("SENSE_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            return _error("invalid_config", "SENSE_THREADS must be an integer",
                          ["SENSE_THREADS"], 1)
    try:
        cfg = load_config(args.experiment, args.config, seed=args.seed, output=args.out)
    except ConfigError as e:
        return _error("invalid_config", str(e), e.keys, 1)
    try:
        table = run(cfg, max(1, threads))
    except (NonPhysicalGamma, AllZeroLikelihood, NonPositiveInput, ArithmeticError,
            np.linalg.LinAlgError) as e:
        return _error("numerical_failure", f"{type(e).__name__}: {e}", [], 2)
    text = table.to_csv()
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
