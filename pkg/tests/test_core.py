import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from acsense.core import (BlockSpec, DeltaKick, InvalidParams, ModelParams, SquarePulse, kgrid,
                          validate)


def test_reference_parameters_accepted():
    p = validate(ModelParams(J=1, h0=1, h1=0.1, tau=0.2, N=2000, pulse=DeltaKick()))
    assert (p.J, p.h0, p.h1, p.tau, p.N) == (1.0, 1.0, 0.1, 0.2, 2000)


def test_zero_period_rejected():
    with pytest.raises(InvalidParams) as e:
        validate(ModelParams(J=1, tau=0))
    assert "tau" in e.value.keys


def test_long_period_needs_override():
    with pytest.raises(InvalidParams) as e:
        validate(ModelParams(J=1, tau=1.5))
    assert any("J*tau <= 1" in v for v in e.value.violations)
    assert validate(ModelParams(J=1, tau=1.5, allow_large_tau=True)).tau == 1.5


def test_all_violations_reported_together():
    with pytest.raises(InvalidParams) as e:
        validate(ModelParams(J=-1, tau=0.2, N=7, pulse=SquarePulse(0.5)), L=9)
    assert set(e.value.keys) == {"J", "N", "pulse.w", "L"}


def test_nonfinite_rejected():
    with pytest.raises(InvalidParams):
        validate(ModelParams(h1=math.nan))


@pytest.mark.parametrize("w", [0.0, -0.1, 0.3])
def test_square_pulse_width_bounds(w):
    with pytest.raises(InvalidParams):
        validate(ModelParams(tau=0.2, pulse=SquarePulse(w)))


def test_block_spec():
    assert BlockSpec(4).explicit and not BlockSpec(20).explicit
    with pytest.raises(InvalidParams):
        BlockSpec(0)
    with pytest.raises(InvalidParams):
        BlockSpec(3, explicit_cap=20)


def test_kgrid_examples():
    np.testing.assert_allclose(kgrid(4), [np.pi / 4, 3 * np.pi / 4])
    np.testing.assert_allclose(kgrid(2), [np.pi / 2])
    k = kgrid(2000)
    assert len(k) == 1000 and k.max() == pytest.approx(1999 * np.pi / 2000, abs=1e-15)
    with pytest.raises(InvalidParams):
        kgrid(5)


@given(st.integers(1, 500))
def test_kgrid_symmetric_and_inside_zone(half):
    k = kgrid(2 * half)
    assert np.all((k > 0) & (k < np.pi))
    np.testing.assert_allclose(np.sort(np.pi - k), k, atol=1e-12)
