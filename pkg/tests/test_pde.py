import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from qlinsolve.errors import InvalidInputError, ResourceLimitError, StabilityError
from qlinsolve.pde import (
    HeatConfig,
    QuadraticODE,
    burgers_carleman_evolve,
    burgers_grid,
    burgers_ode,
    burgers_reference_explicit,
    carleman_dimension,
    carleman_implicit_system,
    carleman_initial_state,
    carleman_matrix,
    heat_evolve,
    heat_explicit_evolve,
    heat_explicit_step,
    heat_matrix,
    heat_stability_threshold,
    heat_system,
    random_complex_tridiagonal,
    tridiagonal_toeplitz,
)


def test_heat_reference_matrix():
    cfg = HeatConfig()
    assert cfg.lam == pytest.approx(0.64)
    A = heat_matrix(cfg)
    assert np.allclose(np.diag(A), 2.28)
    assert np.allclose(np.diag(A, 1), -0.64)
    assert np.allclose(np.diag(A, -1)[:-1], -0.64)
    assert A[7, 6] == pytest.approx(-1.28)
    assert np.count_nonzero(np.triu(A, 2)) == 0 and np.count_nonzero(np.tril(A, -2)) == 0


def test_heat_rhs_reference():
    _, b = heat_system(HeatConfig(), np.zeros(8))
    assert np.allclose(b, [0.64] + [0] * 7)


def test_heat_rhs_neumann():
    cfg = HeatConfig(neumann_right=0.5)
    _, b = heat_system(cfg, np.ones(8))
    assert b[-1] == pytest.approx(1 + 2 * 0.64 * 0.5 * 0.125)


def test_heat_small_lambda_is_identity():
    cfg = HeatConfig(dt=1e-300)
    A, b = heat_system(cfg, np.arange(8.0))
    assert np.allclose(A, np.eye(8)) and np.allclose(b, np.arange(8.0))


def test_heat_config_errors():
    for kw in ({"nu": 0}, {"dx": -1}, {"dt": float("nan")}, {"n_unknowns": 1}, {"initial": np.zeros(3)}):
        with pytest.raises(InvalidInputError):
            HeatConfig(**kw)


def test_explicit_constant_state():
    cfg = HeatConfig(dirichlet_left=2.0)
    u = heat_explicit_step(cfg, np.full(8, 2.0))
    assert np.allclose(u, 2.0)


def test_explicit_single_step():
    u = heat_explicit_step(HeatConfig(), np.zeros(8))
    assert np.allclose(u, [0.64] + [0] * 7)


def test_explicit_stencil_rows_sum_to_one():
    cfg = HeatConfig(dirichlet_left=0.0, dt=0.3)
    rows = np.array([heat_explicit_step(cfg, e) for e in np.eye(8)]).T
    assert np.allclose(rows[1:-1].sum(axis=1), 1.0, rtol=0, atol=1e-15)


def test_explicit_divergence_and_stability():
    unstable = heat_explicit_evolve(HeatConfig(), 100)
    assert np.max(np.abs(unstable[-1])) > 1e3
    cfg = HeatConfig(dt=0.2 * 0.125**2 / 0.01)
    assert cfg.lam == pytest.approx(0.2)
    stable = heat_explicit_evolve(cfg, 100)
    assert max(np.max(np.abs(u)) for u in stable) <= 1.0 + 1e-12


def test_stability_threshold():
    cfg = HeatConfig()
    assert heat_stability_threshold(cfg) == pytest.approx(0.78125)
    assert heat_stability_threshold(HeatConfig(dx=0.25)) == pytest.approx(4 * 0.78125)
    assert cfg.dt > heat_stability_threshold(cfg)


@given(st.floats(0.005, 0.1))
def test_implicit_explicit_agree(lam):
    cfg = HeatConfig(dt=lam * 0.125**2 / 0.01, dirichlet_left=0.0)
    x = np.arange(1, 9) * 0.125
    u = np.cos(np.pi * x / 2)
    A, b = heat_system(cfg, u)
    implicit = np.linalg.solve(A, b)
    explicit = heat_explicit_step(cfg, u)
    assert np.max(np.abs(implicit - explicit)) <= 10 * cfg.lam**2


def test_heat_evolve_edges_and_monotone():
    cfg = HeatConfig()
    assert len(heat_evolve(cfg, 0)) == 1
    traj = np.real(np.array(heat_evolve(cfg, 100)))
    assert traj.shape == (101, 8)
    assert np.all(np.diff(traj, axis=0) >= -1e-12)
    assert np.all(traj <= 1 + 1e-12)
    with pytest.raises(InvalidInputError):
        heat_evolve(cfg, 1, solver="lu")
    with pytest.raises(InvalidInputError):
        heat_evolve(cfg, -1)


def test_heat_evolve_qsvt_short():
    cfg = HeatConfig()
    q = np.array(heat_evolve(cfg, 5, solver="qsvt"))
    c = np.array(heat_evolve(cfg, 5))
    assert np.max(np.abs(q - c)) <= 1e-2


def test_heat_evolve_error_carries_step(monkeypatch):
    from qlinsolve import qsvt
    from qlinsolve.errors import PostSelectionError

    def fail(self, y):
        raise PostSelectionError("no weight on the zero flags", 1e-20)

    monkeypatch.setattr(qsvt.PreparedSolver, "solve", fail)
    with pytest.raises(PostSelectionError, match="step 1") as info:
        heat_evolve(HeatConfig(), 2, solver="qsvt")
    assert info.value.probability == 1e-20


def test_carleman_single_level():
    ode = burgers_ode(7, 0.01)
    sys = carleman_matrix(ode, 1)
    assert sys.dimension == 5
    assert np.array_equal(sys.A, ode.F1)


def test_carleman_burgers_dimension():
    sys = carleman_matrix(burgers_ode(7, 0.01), 2)
    assert sys.dimension == 30
    assert np.count_nonzero(sys.A[5:, :5]) == 0
    assert (1, 2) in sys.blocks and np.count_nonzero(sys.blocks[(1, 2)]) == 0


def test_carleman_dimension_examples():
    assert carleman_dimension(2, 3) == 14
    F = np.zeros((2, 4))
    assert carleman_matrix(QuadraticODE(None, np.eye(2), F), 3).dimension == 14


@given(st.integers(2, 5), st.integers(1, 3))
def test_carleman_dimension_formula(n, N):
    assert carleman_dimension(n, N) == (n ** (N + 1) - n) // (n - 1)
    rng = np.random.default_rng(n * 10 + N)
    ode = QuadraticODE(rng.standard_normal(n), rng.standard_normal((n, n)), rng.standard_normal((n, n * n)))
    sys = carleman_matrix(ode, N)
    assert sys.dimension == carleman_dimension(n, N)
    assert np.array_equal(sys.b[:n], ode.F0) and not sys.b[n:].any()


def test_carleman_resource_limit():
    ode = QuadraticODE(None, np.eye(16), np.zeros((16, 256)))
    with pytest.raises(ResourceLimitError):
        carleman_matrix(ode, 3)


def test_carleman_linear_fidelity():
    rng = np.random.default_rng(2)
    n = 3
    F1 = rng.standard_normal((n, n)) * 0.3
    ode = QuadraticODE(None, F1, np.zeros((n, n * n)))
    sys = carleman_matrix(ode, 3)
    u0 = rng.standard_normal(n)
    y = carleman_initial_state(u0, 3)
    t = 0.7
    level1 = (expm(sys.A * t) @ y)[:n]
    assert np.allclose(level1, expm(F1 * t) @ u0, atol=1e-12)
    L, B = carleman_implicit_system(sys, y, 0.1)
    step = np.linalg.solve(L, B)[:n]
    assert np.allclose(step, np.linalg.solve(np.eye(n) - 0.1 * F1, u0), atol=1e-14)


def test_carleman_quadratic_structure():
    rng = np.random.default_rng(4)
    n = 2
    ode = QuadraticODE(rng.standard_normal(n), rng.standard_normal((n, n)), rng.standard_normal((n, n * n)))
    sys = carleman_matrix(ode, 2)
    u = rng.standard_normal(n)
    y = carleman_initial_state(u, 2)
    # level-1 rows of A y + b give the exact ODE right-hand side
    assert np.allclose((sys.A @ y + sys.b)[:n], ode.rhs(u))
    uu = np.kron(u, u)
    d_uu = np.kron(ode.rhs(u), u) + np.kron(u, ode.rhs(u))
    truncated = d_uu - np.kron(ode.F2 @ uu, u) - np.kron(u, ode.F2 @ uu)
    assert np.allclose((sys.A @ y)[n:], truncated)


def test_carleman_initial_state():
    e1 = np.array([1.0, 0.0])
    y = carleman_initial_state(e1, 3)
    assert np.array_equal(y, np.concatenate([e1, np.eye(4)[0], np.eye(8)[0]]))
    assert np.array_equal(carleman_initial_state([1, 1], 2), np.ones(6))
    u = np.sin(2 * np.pi * burgers_grid(7))
    y = carleman_initial_state(u, 2)
    assert np.allclose(y[5:].reshape(5, 5), np.outer(u, u), atol=0)
    with pytest.raises(InvalidInputError):
        carleman_initial_state(u, 0)


def test_carleman_implicit_system():
    sys = carleman_matrix(burgers_ode(7, 0.01), 2)
    y = np.arange(30.0)
    L, B = carleman_implicit_system(sys, y, 0.0)
    assert np.array_equal(L, np.eye(30)) and np.array_equal(B, y)
    with pytest.raises(InvalidInputError):
        carleman_implicit_system(sys, np.zeros(5), 0.1)


def test_burgers_coefficients():
    ode = burgers_ode(7, 0.01)
    assert ode.n == 5
    assert ode.F1[0, 1] == pytest.approx(0.36)
    assert np.allclose(np.diag(ode.F1), -0.72)
    assert ode.F2[0, 1] == pytest.approx(-3.0)
    assert ode.F2[1, 5] == pytest.approx(3.0)
    assert not ode.F0.any()
    zero_nu = burgers_ode(7, 0.0)
    assert not zero_nu.F1.any() and np.array_equal(zero_nu.F2, ode.F2)
    with pytest.raises(InvalidInputError):
        burgers_ode(3, 0.01)


def test_burgers_advection_sign():
    # -u u_x > 0 where u > 0 and u decreasing
    ode = burgers_ode(7, 0.0)
    u = np.array([1.0, 1.0, 0.0, 0.0, 0.0])
    assert ode.rhs(u)[1] > 0


def test_burgers_L_entries(burgers_L):
    vals = set(np.round(np.real(burgers_L[burgers_L != 0]), 10))
    assert vals == {-0.036, 1.072, 1.144, 0.3, -0.3}
    assert np.allclose(np.diag(burgers_L)[:5], 1.072)
    assert np.allclose(np.diag(burgers_L)[5:], 1.144)


def test_burgers_implicit_consistency(burgers_L):
    sys = carleman_matrix(burgers_ode(7, 0.01), 2)
    y = carleman_initial_state(np.sin(2 * np.pi * burgers_grid(7)), 2)
    L, B = carleman_implicit_system(sys, y, 0.1)
    nxt = np.linalg.solve(L, B)
    assert np.allclose(L @ nxt, B, atol=1e-13)
    assert np.array_equal(L, burgers_L)


def test_burgers_reference_properties():
    t, s = burgers_reference_explicit(7, 0.01, 1e-3, 0.3, u0=np.zeros(5))
    assert all(not u.any() for u in s)
    t, s = burgers_reference_explicit(7, 0.01, 1e-3, 0.3, sample_times=[0.0, 0.1, 0.2, 0.3])
    assert t == [0.0, 0.1, 0.2, 0.3]
    assert all(u[0] == 0 and u[-1] == 0 for u in s)
    # dissipation shows once the grid resolves the viscous scale
    _, fine = burgers_reference_explicit(51, 0.01, 1e-3, 0.3)
    assert np.max(np.abs(fine[-1])) < np.max(np.abs(fine[0]))


def test_burgers_reference_instability():
    with pytest.raises(StabilityError):
        burgers_reference_explicit(51, 0.01, 0.05, 1.0)
    with pytest.raises(InvalidInputError):
        burgers_reference_explicit(7, 0.01, 0.0, 0.3)


def test_burgers_carleman_boundaries():
    t, s = burgers_carleman_evolve(7, 0.01, 0.1, 0.3)
    assert np.allclose(t, [0, 0.1, 0.2, 0.3])
    assert all(abs(u[0]) <= 1e-12 and abs(u[-1]) <= 1e-12 for u in s)


def test_random_tridiagonal_reproducible():
    A1, y1 = random_complex_tridiagonal(3, 42)
    A2, y2 = random_complex_tridiagonal(3, 42)
    assert np.array_equal(A1, A2) and np.array_equal(y1, y2)
    A3, _ = random_complex_tridiagonal(3, 43)
    assert not np.array_equal(A1, A3)


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_random_tridiagonal_structure(nq, seed):
    A, y = random_complex_tridiagonal(nq, seed)
    N = 1 << nq
    assert A.shape == (N, N) and y.shape == (N,)
    assert np.all(np.abs(y.real) <= 1) and np.all(np.abs(y.imag) <= 1)
    assert len(set(np.diag(A))) == 1
    if N > 1:
        assert len(set(np.diag(A, 1))) == 1 and len(set(np.diag(A, -1))) == 1
    assert np.count_nonzero(np.triu(A, 2)) == 0 and np.count_nonzero(np.tril(A, -2)) == 0
    z = [A[1, 0], A[0, 0], A[0, 1]] if N > 1 else [A[0, 0]]
    assert all(abs(v.real) <= 1 and abs(v.imag) <= 1 for v in z)


def test_toeplitz_identity():
    assert np.array_equal(tridiagonal_toeplitz(4, 0, 1, 0), np.eye(4))
    with pytest.raises(InvalidInputError):
        random_complex_tridiagonal(0, 1)
