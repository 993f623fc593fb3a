import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from acsense import ed
from acsense.core import GroundStateOfH0, ModelParams, PolarizedUp, SquarePulse, ThermalOfH0
from acsense.freefermion import (analytic_gap_line, correlators_at, evolve_modes,
                                 floquet_closed_form, floquet_gap, floquet_mode, gap_line,
                                 initial_modes, magnetization, minimize_gap, period_propagator,
                                 steady_correlators, steady_modes, stroboscopic)

SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)


def static_generator(p, k, extra=0.0):
    return np.sin(k) * p.J * SY + (p.h0 + p.J * np.cos(k) + extra) * SZ


def narrow_pulse_oracle(p, k, width):
    """Kick replaced by a square pulse of the given width and area h1."""
    on = expm(-1j * width * static_generator(p, k, p.h1 / width))
    return on @ expm(-1j * (p.tau - width) * static_generator(p, k))


params_st = st.builds(ModelParams, J=st.floats(0.2, 2), h0=st.floats(-2, 2),
                      h1=st.floats(-1.5, 1.5), tau=st.floats(0.01, 0.5), N=st.just(40))


@given(params_st, st.floats(0, np.pi))
def test_propagator_unitary(p, k):
    U = period_propagator(p, k)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(2), atol=1e-12)


@given(params_st)
def test_eigenphases_match_quasi_energy(p):
    fm = floquet_mode(p)
    for U, eps in zip(fm.U, fm.quasi_energy):
        ph = np.sort(np.angle(np.linalg.eigvals(U)))
        np.testing.assert_allclose(ph, [-eps * p.tau, eps * p.tau], atol=1e-10)


def test_no_kick_is_static_evolution():
    p = ModelParams(h0=0.7, h1=0.0, tau=0.3)
    np.testing.assert_allclose(period_propagator(p, 1.1),
                               expm(-1j * 0.3 * static_generator(p, 1.1)), atol=1e-13)


def test_full_width_pulse_is_shifted_static_field():
    p = ModelParams(h0=0.4, h1=0.25, tau=0.3, pulse=SquarePulse(0.3))
    np.testing.assert_allclose(period_propagator(p, 0.9),
                               expm(-1j * 0.3 * static_generator(p, 0.9, 0.25)), atol=1e-13)


def test_kick_against_narrow_pulse():
    p = ModelParams(J=1, h0=0.5, h1=0.3, tau=0.2)
    U = period_propagator(p, np.pi / 2)
    # the pulse width itself is an O(w |mu|) error: 6e-6 at tau/1e4, 6e-8 at tau/1e6
    np.testing.assert_allclose(U, narrow_pulse_oracle(p, np.pi / 2, p.tau / 1e4), atol=1e-5)
    np.testing.assert_allclose(U, narrow_pulse_oracle(p, np.pi / 2, p.tau / 1e6), atol=1e-6)


def test_narrow_square_pulse_tends_to_kick():
    p = ModelParams(J=1, h0=0.5, h1=0.3, tau=0.2)
    sq = p.with_(pulse=SquarePulse(p.tau / 1e6), h1=p.h1 / (p.tau / 1e6))
    np.testing.assert_allclose(period_propagator(sq, 0.8), period_propagator(p, 0.8), atol=1e-6)


def test_quasi_energy_against_narrow_pulse_oracle():
    p = ModelParams(J=1, h0=0.191, h1=0.161, tau=0.2)
    k = 3 * np.pi / 4
    eps = floquet_mode(p, k).quasi_energy[0]
    w = np.linalg.eigvals(narrow_pulse_oracle(p, k, p.tau / 1e6))
    assert eps == pytest.approx(abs(np.angle(w[0])) / p.tau, abs=1e-5)


@given(params_st, st.floats(0.01, np.pi - 0.01))
def test_closed_form_matches_propagator(p, k):
    fm = floquet_mode(p, k)
    eps, axis = floquet_closed_form(p, np.array([k]))
    np.testing.assert_allclose(eps, fm.quasi_energy, atol=1e-9)
    if not fm.degenerate[0] and np.sin(eps[0] * p.tau) > 1e-6:
        np.testing.assert_allclose(axis, fm.axis, atol=1e-7)


def test_gap_closes_at_k_pi_on_line():
    p = ModelParams(J=1, h0=0.4, tau=0.2)
    p = p.with_h1(float(analytic_gap_line(p, 0.4)))
    assert floquet_mode(p, np.pi).quasi_energy[0] == pytest.approx(0.0, abs=1e-7)


def test_no_kick_quasi_energy_is_mode_energy():
    p = ModelParams(J=1, h0=0.3, h1=0.0, tau=0.2)
    k = np.array([0.7])
    fm = floquet_mode(p, k)
    mu = np.array([0, np.sin(0.7), 0.3 + np.cos(0.7)])
    assert fm.quasi_energy[0] == pytest.approx(np.linalg.norm(mu), abs=1e-12)
    np.testing.assert_allclose(fm.axis[0], mu / np.linalg.norm(mu), atol=1e-12)


def test_degenerate_mode_flagged():
    # a rotation by pi about z gives U = -1 and no defined axis
    p = ModelParams(J=1e-13, h0=np.pi / 0.2 - 0.3, h1=0.3 * 0.2, tau=0.2)
    fm = floquet_mode(p, np.array([0.5]))
    assert fm.degenerate[0]


def test_eigvecs_diagonalize_propagator():
    p = ModelParams(h0=0.6, h1=0.2)
    fm = floquet_mode(p)
    for U, V, eps in zip(fm.U, fm.eigvecs, fm.quasi_energy):
        np.testing.assert_allclose(U @ V[:, 0], np.exp(-1j * eps * p.tau) * V[:, 0], atol=1e-12)
        np.testing.assert_allclose(U @ V[:, 1], np.exp(1j * eps * p.tau) * V[:, 1], atol=1e-12)


def test_evolution_identity_at_zero():
    p = ModelParams(N=20)
    m0 = initial_modes(p, GroundStateOfH0(0.3))
    assert evolve_modes(p, m0, 0) is m0


def test_field_only_keeps_vacuum():
    p = ModelParams(J=1e-300, h0=0.4, h1=0.3, N=16)
    m = evolve_modes(p, PolarizedUp(), 37)
    np.testing.assert_allclose(np.abs(m.amps[:, 0]), 1, atol=1e-12)
    np.testing.assert_allclose(m.amps[:, 1], 0, atol=1e-12)
    assert magnetization(m) == pytest.approx(1.0, abs=1e-12)


def test_closed_form_power_matches_repeated_products():
    p = ModelParams(h0=0.8, h1=0.3, N=12)
    m = initial_modes(p, PolarizedUp())
    U = period_propagator(p, m.k)
    amps = m.amps.copy()
    for _ in range(23):
        amps = np.einsum("kij,kj->ki", U, amps)
    np.testing.assert_allclose(evolve_modes(p, m, 23).amps, amps, atol=1e-12)


def test_vacuum_correlators_vanish():
    p = ModelParams(N=10)
    c = correlators_at(p, initial_modes(p, PolarizedUp()), 4)
    assert np.all(c.C == 0) and np.all(c.I == 0)
    assert magnetization(initial_modes(p, PolarizedUp())) == 1.0


@given(params_st, st.integers(0, 300), st.integers(1, 8))
@settings(max_examples=40)
def test_correlator_structure(p, n, L):
    c = correlators_at(p, evolve_modes(p, PolarizedUp(), n), L)
    np.testing.assert_allclose(c.C, c.C.conj().T, atol=1e-12)
    np.testing.assert_allclose(c.I, -c.I.T, atol=1e-12)
    assert np.all(np.real(np.diag(c.C)) > -1e-12) and np.all(np.real(np.diag(c.C)) < 1 + 1e-12)


def test_stationary_ground_state_without_kick():
    p = ModelParams(h0=0.6, h1=0.0, N=40)
    ref = correlators_at(p, initial_modes(p, GroundStateOfH0()), 5)
    for n, m in stroboscopic(p, GroundStateOfH0(), [1, 17, 400]):
        c = correlators_at(p, m, 5)
        np.testing.assert_allclose(c.C, ref.C, atol=1e-10)
        np.testing.assert_allclose(c.I, ref.I, atol=1e-10)
    s = steady_correlators(p, GroundStateOfH0(), 5)
    np.testing.assert_allclose(s.C, ref.C, atol=1e-10)
    np.testing.assert_allclose(s.I, ref.I, atol=1e-10)


def test_dephasing_against_time_average():
    p = ModelParams(J=1, h0=0.191, h1=0.161, tau=0.2, N=2000)
    base = initial_modes(p, PolarizedUp())
    fm = floquet_mode(p, base.k)
    C = np.zeros((4, 4), complex)
    I = np.zeros((4, 4), complex)
    for n in range(4000, 4400):
        c = correlators_at(p, evolve_modes(p, base, n, floquet=fm), 4)
        C += c.C / 400
        I += c.I / 400
    s = steady_correlators(p, PolarizedUp(), 4)
    assert np.abs(s.C - C).max() <= 1e-2 * np.abs(s.C).max()
    assert np.abs(s.I - I).max() <= 1e-2 * np.abs(s.I).max()


def test_steady_state_is_invariant_under_one_period():
    p = ModelParams(h0=0.5, h1=0.2, N=30)
    s = steady_modes(p, PolarizedUp())
    s1 = evolve_modes(p, s, 1)
    np.testing.assert_allclose(s1.rho, s.rho, atol=1e-12)


def test_thermal_infinite_temperature_is_half_filled():
    p = ModelParams(N=20)
    m = initial_modes(p, ThermalOfH0(0.0))
    np.testing.assert_allclose(m.occupation, 0.5)
    assert magnetization(m) == pytest.approx(0.0, abs=1e-14)


# --- against exact diagonalization -----------------------------------------

def _ed_momentum_occupation(psi, N, k):
    """<c_k^+ c_k> from real-space fermion correlators of an ED state."""
    from acsense.gaussian import majorana_operators
    a = majorana_operators(N)
    f = [(a[2 * j] + 1j * a[2 * j + 1]) / 2 for j in range(N)]  # annihilators
    G = np.array([[np.vdot(psi, f[i].conj().T @ (f[j] @ psi)) for j in range(N)] for i in range(N)])
    x = np.arange(N)
    ph = np.exp(1j * k * x) / np.sqrt(N)
    return np.real(ph.conj() @ G @ ph)


def test_mode_occupations_match_ed():
    p = ModelParams(J=1, h0=1, h1=0.1, tau=0.2, N=8)
    m = evolve_modes(p, PolarizedUp(), 50)
    edp = ed.EDParams.from_model(p)
    psi = ed.evolve_ed(edp, PolarizedUp(), 50).psi
    for k, occ in zip(m.k, m.occupation):
        assert _ed_momentum_occupation(psi, 8, k) == pytest.approx(occ, abs=1e-8)
        assert _ed_momentum_occupation(psi, 8, -k) == pytest.approx(occ, abs=1e-8)


@pytest.mark.parametrize("initial", [PolarizedUp(), GroundStateOfH0(0.3)])
def test_correlators_match_ed(initial):
    from acsense.gaussian import gamma_from_correlators, majorana_expectations
    p = ModelParams(J=1, h0=1, h1=0.1, tau=0.2, N=8)
    edp = ed.EDParams.from_model(p)
    eng = ed.engine_for(edp)
    for n, s in eng.trajectory(eng.initial_state(initial), [0, 3, 50, 200]):
        m = evolve_modes(p, initial, n)
        corr = correlators_at(p, m, 4)
        G_ed = majorana_expectations(ed.partial_trace(s, 4))
        np.testing.assert_allclose(gamma_from_correlators(corr).Gamma, G_ed, atol=1e-8)
        assert magnetization(m) == pytest.approx(ed.magnetization_ed(s), abs=1e-8)


# --- gap -------------------------------------------------------------------

def test_gap_positive_off_line():
    assert floquet_gap(ModelParams(h0=0.6, h1=0.2, tau=0.2, N=2000))[0] > 0.1


def test_critical_gap_closes_with_size():
    gaps = [floquet_gap(ModelParams(h0=1, h1=0, N=N))[0] for N in (100, 1000, 10000)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-3


def test_line_through_critical_point():
    assert analytic_gap_line(ModelParams(), 1.0) == 0.0


def test_fig5b_point_on_line():
    assert float(analytic_gap_line(ModelParams(tau=0.2), 0.83)) == pytest.approx(0.034, abs=1e-12)


def test_gap_line_numeric_vs_analytic():
    p = ModelParams(tau=0.2, N=2000)
    pts = gap_line(p, np.linspace(0, 1, 6))
    dev = max(abs(q.h1_numeric - q.h1_analytic) for q in pts)
    assert dev < 2e-3


def test_minimizer_finds_critical_field():
    h1, g = minimize_gap(ModelParams(h0=1.0, tau=0.2, N=2000), (0, 0.2))
    assert h1 < 2e-3 and g < 4e-3


def test_modular_gap_detects_zone_edge():
    p = ModelParams(J=1, h0=1.5, h1=0.5, tau=1.0, pulse=SquarePulse(0.5), N=400)
    g, _ = floquet_gap(p)
    gm, _ = floquet_gap(p, modular=True)
    assert gm <= g
