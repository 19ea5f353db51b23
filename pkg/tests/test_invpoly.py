import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import comb
from scipy.stats import binom

from qlinsolve.errors import ConversionError, InvalidInputError, NonConvergenceError
from qlinsolve.invpoly import (
    REFLECTION,
    WX,
    PhaseSequence,
    binomial_tail_log,
    chebyshev_inverse_coefficients,
    convert_phases_reflection,
    degree_parameters,
    evaluate_chebyshev,
    find_phases_wx,
    fit_phases,
    inverse_phases,
    inverse_series_coefficient,
    inverse_target_eval,
    operator_distance_mod_phase,
    plus_amplitude,
    qsp_polynomial,
    qsp_unitary,
    signal_matrices,
)

A_GRID = np.linspace(-1.0, 1.0, 21)


@pytest.fixture(scope="module")
def phases4():
    return inverse_phases(4.0, 0.1)


@pytest.fixture(scope="module")
def wx4():
    return find_phases_wx(chebyshev_inverse_coefficients(4.0, 0.1))


def test_degree_parameters_kappa4():
    b, d = degree_parameters(4, 0.1)
    assert b == math.ceil(16 * math.log(40)) == 60
    raw = math.ceil(math.sqrt(60 * math.log(2400)))
    assert d == (raw if raw % 2 else raw + 1) == 23
    assert d % 2 == 1


def test_degree_parameters_small_kappa():
    b, d = degree_parameters(1.0001, 0.9)
    assert b >= 1 and d >= 1 and d % 2 == 1


def test_degree_parameters_monotone():
    b4, d4 = degree_parameters(4, 0.1)
    b8, d8 = degree_parameters(8, 0.1)
    assert b8 > b4 and d8 > d4


@pytest.mark.parametrize("kappa,eps", [(1.0, 0.1), (0.5, 0.1), (4, 0.0), (4, 1.0), (float("inf"), 0.1)])
def test_degree_parameters_errors(kappa, eps):
    with pytest.raises(InvalidInputError):
        degree_parameters(kappa, eps)


@given(st.floats(1.01, 64), st.floats(1e-4, 0.9), st.floats(1.01, 2.0))
def test_degree_parameters_property(kappa, eps, grow):
    b, d = degree_parameters(kappa, eps)
    assert d % 2 == 1 and b >= 1
    b2, d2 = degree_parameters(kappa * grow, eps)
    assert b2 >= b and d2 >= d


def test_inverse_target_eval_cases():
    for b in (1, 7, 60):
        assert inverse_target_eval(1.0, b) == pytest.approx(1.0, abs=1e-15)
    assert inverse_target_eval(0.0, 10) == 0.0
    v = inverse_target_eval(0.5, 10)
    assert abs(v - 2.0) == pytest.approx(0.75**10 / 0.5, rel=1e-12)


def test_inverse_target_eval_small_x():
    # f_b(x) ~ b x near zero
    x = 1e-9
    assert inverse_target_eval(x, 60) == pytest.approx(60 * x, rel=1e-6)
    assert np.allclose(inverse_target_eval(-A_GRID, 9), -inverse_target_eval(A_GRID, 9))


@pytest.mark.parametrize("b", [1, 5, 60, 400, 2000])
def test_tail_matches_scipy(b):
    j = np.arange(b)
    ref = binom.sf(b + j, 2 * b, 0.5)
    got = np.exp(binomial_tail_log(b))
    ok = ref > 1e-300
    assert np.allclose(got[ok], ref[ok], rtol=1e-9, atol=0)


def test_coefficient_exact_sum():
    b = 12
    for j in range(b):
        exact = 4 * (-1) ** j * sum(comb(2 * b, b + i, exact=True) for i in range(j + 1, b + 1)) / 4**b
        assert inverse_series_coefficient(j, b) == pytest.approx(exact, rel=1e-12)
    assert inverse_series_coefficient(b, b) == 0.0


@pytest.mark.parametrize("b", [3, 60, 517])
def test_last_coefficient(b):
    assert inverse_series_coefficient(b - 1, b) == pytest.approx(4 * (-1) ** (b - 1) * 4.0**-b, rel=1e-10)


def test_full_series_reproduces_target():
    b = 40
    c = np.zeros(2 * b + 1)
    c[1::2] = [inverse_series_coefficient(j, b) for j in range(b)]
    x = np.linspace(-1, 1, 101)
    assert np.max(np.abs(evaluate_chebyshev(c, x) - inverse_target_eval(x, b))) <= 1e-12


def test_chebyshev_single_terms():
    x = np.linspace(-1, 1, 7)
    assert np.allclose(evaluate_chebyshev([0, 1], x), x)
    assert evaluate_chebyshev([0, 0, 0, 1], 0.5) == pytest.approx(-1.0, abs=1e-15)
    assert evaluate_chebyshev([2.5], 0.3) == 2.5


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=40))
def test_clenshaw_matches_trig_form(coeffs):
    x = np.linspace(-1, 1, 100)
    k = np.arange(len(coeffs))
    naive = np.cos(np.outer(np.arccos(x), k)) @ np.array(coeffs)
    assert np.max(np.abs(evaluate_chebyshev(coeffs, x) - naive)) <= 1e-12 * max(1.0, np.sum(np.abs(coeffs)))


def test_inverse_polynomial_vs_trig_oracle():
    P = chebyshev_inverse_coefficients(4, 0.1)
    x = np.linspace(-1, 1, 100)
    k = np.arange(P.degree + 1)
    naive = np.cos(np.outer(np.arccos(x), k)) @ P.full_coeffs()
    assert np.max(np.abs(P(x) - naive)) <= 1e-12


@pytest.mark.parametrize("kappa", [2.0, 4.0, 8.0, 16.0])
def test_two_eps_bound(kappa):
    P = chebyshev_inverse_coefficients(kappa, 0.1)
    x = np.linspace(1 / kappa, 1, 1000)
    assert np.max(np.abs(P(x) - 1 / x)) <= 0.2
    assert P.degree == 2 * P.d + 1
    c = P.chebyshev_coeffs
    assert np.all(np.sign(c[c != 0]) == np.where(np.arange(c.size) % 2, -1, 1)[c != 0])


def test_polynomial_odd():
    P = chebyshev_inverse_coefficients(8, 0.1)
    x = np.linspace(0, 1, 50)
    assert np.array_equal(P(-x), -P(x))


def test_identity_polynomial_phases():
    seq = PhaseSequence(WX, np.zeros(2))
    a = A_GRID
    assert np.allclose(plus_amplitude(seq, a), a + 1j * np.sqrt(1 - a * a), atol=1e-15)
    assert np.allclose(qsp_polynomial(seq, a), a, atol=1e-15)


def test_fit_identity_target():
    phases, err = fit_phases(lambda x: 0.7 * x, 1)
    assert err <= 1e-6
    v = qsp_polynomial(PhaseSequence(WX, phases), A_GRID).real
    assert np.allclose(v, 0.7 * A_GRID, atol=1e-6)


def test_fit_even_target():
    target = lambda x: 0.8 * (2 * x * x - 1)
    phases, err = fit_phases(target, 2)
    assert err <= 1e-6
    v = qsp_polynomial(PhaseSequence(WX, phases), A_GRID).real
    assert np.allclose(v, target(A_GRID), atol=1e-6)


def test_fit_nonconvergence():
    with pytest.raises(NonConvergenceError) as info:
        fit_phases(lambda x: 0.9 * x**3, 1)
    assert info.value.residual > 1e-6


def test_wx_inverse_fit(wx4):
    P = chebyshev_inverse_coefficients(4, 0.1)
    assert wx4.convention == WX and wx4.degree == P.degree == 47
    assert wx4.residual <= 1e-6
    assert 0 < wx4.beta <= 1
    assert wx4.beta == pytest.approx(0.9 / P.max_abs())
    x = np.linspace(-1, 1, 401)
    realized = qsp_polynomial(wx4, x).real
    assert np.max(np.abs(realized - wx4.beta * P(x))) <= 1e-6
    xs = np.linspace(0.25, 1, 400)
    assert np.max(np.abs(qsp_polynomial(wx4, xs).real - wx4.beta / xs)) <= 2 * 0.1 * wx4.beta
    assert np.allclose(wx4.phases, wx4.phases[::-1])


def test_wx_plus_amplitude_real_part(wx4):
    x = np.linspace(-1, 1, 41)
    assert np.allclose(plus_amplitude(wx4, x).real, qsp_polynomial(wx4, x).real, atol=1e-12)


def test_oddness_and_bounded(phases4):
    a = np.linspace(0, 1, 101)
    p = qsp_polynomial(phases4, a).real
    m = qsp_polynomial(phases4, -a).real
    assert np.max(np.abs(p + m)) <= 1e-10
    assert np.all(np.abs(qsp_polynomial(phases4, np.linspace(-1, 1, 1001))) <= 1 + 1e-12)


def test_conversion_identity_trivial():
    out = convert_phases_reflection(PhaseSequence(WX, np.zeros(2)))
    assert out.convention == REFLECTION
    assert out.phase_correction == pytest.approx(np.pi / 2)
    U = qsp_unitary(out.phases, A_GRID, REFLECTION)
    V = qsp_unitary(np.zeros(2), A_GRID, WX)
    assert operator_distance_mod_phase(U, V) <= 1e-10
    assert np.allclose(qsp_polynomial(out, A_GRID), A_GRID, atol=1e-15)


def test_reflection_plus_amplitude():
    seq = PhaseSequence(REFLECTION, np.zeros(2))
    assert np.allclose(plus_amplitude(seq, A_GRID), np.sqrt(1 - A_GRID**2), atol=1e-15)


def test_reflection_signal_is_reflection():
    R = signal_matrices(A_GRID, REFLECTION)
    assert np.allclose(R @ R, np.eye(2))
    assert np.allclose(R, R.conj().transpose(0, 2, 1))


def test_conversion_preserves_polynomial(wx4, phases4):
    x = np.linspace(-1, 1, 501)
    assert np.max(np.abs(qsp_polynomial(phases4, x) - qsp_polynomial(wx4, x))) <= 1e-9
    assert phases4.beta == wx4.beta


@given(st.lists(st.floats(-np.pi, np.pi), min_size=1, max_size=12))
@settings(max_examples=30)
def test_conversion_property(phases):
    wx = PhaseSequence(WX, np.array(phases))
    out = convert_phases_reflection(wx)
    U = qsp_unitary(out.phases, A_GRID, REFLECTION)
    V = qsp_unitary(wx.phases, A_GRID, WX)
    assert operator_distance_mod_phase(U, V) <= 1e-10
    assert np.allclose(qsp_polynomial(out, A_GRID), qsp_polynomial(wx, A_GRID), atol=1e-10)
    assert out.parity == wx.parity


def test_conversion_errors():
    with pytest.raises(InvalidInputError):
        convert_phases_reflection(PhaseSequence(REFLECTION, np.zeros(2)))
    with pytest.raises(ConversionError):
        convert_phases_reflection(PhaseSequence(WX, np.zeros(4)), tol=-1.0)


def test_phase_sequence_validation():
    with pytest.raises(InvalidInputError):
        PhaseSequence("Other", np.zeros(2))
    with pytest.raises(InvalidInputError):
        PhaseSequence(WX, np.array([]))
    with pytest.raises(InvalidInputError):
        PhaseSequence(WX, np.array([0.0, np.nan]))


def test_phase_reuse_on_subinterval():
    seq = inverse_phases(8.0, 0.1)
    for k1 in (2.0, 4.0, 8.0):
        x = np.linspace(1 / k1, 1, 1000)
        assert np.max(np.abs(qsp_polynomial(seq, x).real / seq.beta - 1 / x)) <= 0.2 + 1e-5 / seq.beta
