"""Model parameters, pulse shapes, initial states and validation.

Units: J sets the energy scale and the Boltzmann constant is 1. For a delta
kick, ``h1`` is the dimensionless rotation angle accumulated during the kick;
for a square pulse it is a field (energy) applied for a time ``w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

#: Largest block for which an explicit 2^L density matrix is built.
EXPLICIT_CAP = 12


class InvalidParams(ValueError):
    """Raised with the full list of violated invariants."""

    def __init__(self, violations, keys=()):
        self.violations = list(violations)
        self.keys = list(keys)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class DeltaKick:
    """h(t) = h1 * sum_n delta(t - n tau)."""


@dataclass(frozen=True)
class SquarePulse:
    """Field h1 held for a time w, switched on during the last w of each period."""

    w: float


PulseShape = Union[DeltaKick, SquarePulse]


@dataclass(frozen=True)
class PolarizedUp:
    """All spins up: the vacuum of the Jordan-Wigner fermions (u_k=1, v_k=0)."""


@dataclass(frozen=True)
class GroundStateOfH0:
    """Ground state of the undriven chain at DC field ``h0``.

    ``h0=None`` means "use the run's own h0". The state is the BCS product
    over k>0; ``h0=0`` is the surrogate used for the x-ordered initial state.
    """

    h0: Optional[float] = None


@dataclass(frozen=True)
class ThermalOfH0:
    """Gibbs state exp(-beta H0)/Z of the undriven chain."""

    beta: float
    h0: Optional[float] = None


InitialState = Union[PolarizedUp, GroundStateOfH0, ThermalOfH0]


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of one run of the driven Ising chain."""

    J: float = 1.0
    h0: float = 1.0
    h1: float = 0.1
    tau: float = 0.2
    N: int = 2000
    pulse: PulseShape = field(default_factory=DeltaKick)
    allow_large_tau: bool = False

    def with_h1(self, h1: float) -> "ModelParams":
        return replace(self, h1=float(h1))

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class BlockSpec:
    L: int
    explicit_cap: int = EXPLICIT_CAP

    def __post_init__(self):
        if self.L < 1:
            raise InvalidParams([f"block length L={self.L} must be >= 1"], ["L"])
        if self.explicit_cap > EXPLICIT_CAP:
            raise InvalidParams(
                [f"explicit_cap={self.explicit_cap} exceeds hard cap {EXPLICIT_CAP}"],
                ["explicit_cap"],
            )

    @property
    def explicit(self) -> bool:
        return self.L <= self.explicit_cap


def _finite(x) -> bool:
    try:
        return math.isfinite(float(x))
    except (TypeError, ValueError):
        return False


def validate(params: ModelParams, L: Optional[int] = None) -> ModelParams:
    """Check every invariant of ``params`` and return a normalized copy.

    All violations are collected before raising, so the caller sees the whole
    list at once. ``L`` (optional) is checked against the chain length.
    """
    bad, keys = [], []

    def fail(msg, key):
        bad.append(msg)
        keys.append(key)

    for name in ("J", "h0", "h1", "tau"):
        if not _finite(getattr(params, name)):
            fail(f"{name} must be a finite number", name)
    if bad:
        raise InvalidParams(bad, keys)

    J, tau = float(params.J), float(params.tau)
    if J <= 0:
        fail(f"J={J} must be > 0", "J")
    if tau <= 0:
        fail(f"tau={tau} must be > 0", "tau")
    N = params.N
    if isinstance(N, float) and N.is_integer():
        N = int(N)
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool):
        fail(f"N={N!r} must be an integer", "N")
    elif N < 2 or N % 2:
        fail(f"N={N} must be even and >= 2", "N")
    if J > 0 and tau > 0 and J * tau > 1 and not params.allow_large_tau:
        fail(f"J*tau={J * tau:g} violates J*tau <= 1 (set allow_large_tau to override)", "tau")

    pulse = params.pulse
    if isinstance(pulse, SquarePulse):
        if not _finite(pulse.w) or not 0 < pulse.w <= tau:
            fail(f"square pulse width w={pulse.w} must satisfy 0 < w <= tau", "pulse.w")
    elif not isinstance(pulse, DeltaKick):
        fail(f"unknown pulse shape {pulse!r}", "pulse")

    if L is not None and isinstance(N, (int, np.integer)):
        if L < 1 or L > N:
            fail(f"block length L={L} must satisfy 1 <= L <= N={N}", "L")

    if bad:
        raise InvalidParams(bad, keys)
    if isinstance(pulse, SquarePulse):
        pulse = SquarePulse(float(pulse.w))
    return ModelParams(J=J, h0=float(params.h0), h1=float(params.h1), tau=tau,
                       N=int(N), pulse=pulse, allow_large_tau=bool(params.allow_large_tau))


def kgrid(N: int) -> np.ndarray:
    """Quasi-momenta pi/N, 3pi/N, ..., (N-1)pi/N of the even-parity sector."""
    if N < 2 or N % 2:
        raise InvalidParams([f"N={N} must be even and >= 2"], ["N"])
    return np.pi * (2 * np.arange(N // 2) + 1) / N
