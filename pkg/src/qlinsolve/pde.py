"""Problem builders: heat equation, Carleman-linearized Burgers, random tridiagonal systems."""
import copy
from dataclasses import dataclass, field

import numpy as np

from qlinsolve.errors import InvalidInputError, QLinSolveError, ResourceLimitError, StabilityError
from qlinsolve.numerics import as_matrix, as_vector

MAX_CARLEMAN_DIM = 4096


# -- heat equation -------------------------------------------------------------------


@dataclass
class HeatConfig:
    """Implicit/explicit FDM for ``u_t = nu u_xx``.

    Unknowns are ``u_1..u_N``: the left Dirichlet node ``u_0`` is
    eliminated and the right Neumann node ``u_N`` is kept, with its ghost
    ``u_{N+1} = u_{N-1} + 2 dx g`` substituted.
    """

    nu: float = 0.01
    dx: float = 0.125
    dt: float = 1.0
    dirichlet_left: float = 1.0
    neumann_right: float = 0.0
    n_unknowns: int = 8
    initial: np.ndarray = None

    def __post_init__(self):
        for name in ("nu", "dx", "dt"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise InvalidInputError(f"{name} must be positive and finite, got {v}")
        if int(self.n_unknowns) < 2:
            raise InvalidInputError("need at least two unknowns")
        self.n_unknowns = int(self.n_unknowns)
        if self.initial is None:
            self.initial = np.zeros(self.n_unknowns)
        self.initial = as_vector(self.initial, "initial state")
        if self.initial.size != self.n_unknowns:
            raise InvalidInputError(f"initial state has {self.initial.size} entries, expected {self.n_unknowns}")

    @property
    def lam(self):
        return self.nu * self.dt / self.dx**2


def heat_matrix(config):
    N, lam = config.n_unknowns, config.lam
    A = np.diag(np.full(N, 1 + 2 * lam)) + np.diag(np.full(N - 1, -lam), 1) + np.diag(np.full(N - 1, -lam), -1)
    A[N - 1, N - 2] = -2 * lam
    return A.astype(np.complex128)


def heat_rhs(config, u_n):
    lam = config.lam
    b = as_vector(u_n, "state").copy()
    b[0] += lam * config.dirichlet_left
    b[-1] += 2 * lam * config.neumann_right * config.dx
    return b


def heat_system(config, u_n):
    """``(A, b)`` of the implicit step ``A u^{n+1} = b^n``."""
    return heat_matrix(config), heat_rhs(config, u_n)


def heat_explicit_step(config, u_n):
    lam = config.lam
    u = as_vector(u_n, "state")
    left = np.concatenate([[config.dirichlet_left], u[:-1]])
    ghost = u[-2] + 2 * config.dx * config.neumann_right
    right = np.concatenate([u[1:], [ghost]])
    return lam * right + (1 - 2 * lam) * u + lam * left


def heat_stability_threshold(config):
    """Largest stable explicit time step ``dx^2 / (2 nu)``."""
    return config.dx**2 / (2 * config.nu)


def _at_step(exc, step):
    """Copy of ``exc`` (attributes kept) whose message names the failing step."""
    out = copy.copy(exc)
    out.args = (f"step {step}: {exc}",) + exc.args[1:]
    return out


def heat_evolve(config, steps, solver="classical", epsilon=0.1, kappa=None, cache=None):
    """Trajectory ``[u^0, u^1, ..., u^steps]`` of implicit steps.

    ``solver`` is ``'classical'`` (dense solve) or ``'qsvt'``; the QSVT
    solver is prepared once since the matrix is fixed.
    """
    steps = int(steps)
    if steps < 0:
        raise InvalidInputError("steps must be nonnegative")
    A = heat_matrix(config)
    if solver == "classical":
        step = lambda b: np.linalg.solve(A, b)  # noqa: E731
    elif solver == "qsvt":
        from qlinsolve.qsvt import PreparedSolver

        prepared = PreparedSolver(A, epsilon, kappa, cache)
        step = lambda b: prepared.solve(b).solution  # noqa: E731
    else:
        raise InvalidInputError(f"unknown solver {solver!r}")
    traj = [config.initial.copy()]
    for k in range(steps):
        try:
            traj.append(step(heat_rhs(config, traj[-1])))
        except QLinSolveError as exc:
            raise _at_step(exc, k + 1) from exc
    return traj


def heat_explicit_evolve(config, steps):
    traj = [config.initial.copy()]
    for _ in range(int(steps)):
        traj.append(heat_explicit_step(config, traj[-1]))
    return traj


# -- Carleman linearization --------------------------------------------------------------


@dataclass
class QuadraticODE:
    """``du/dt = F0 + F1 u + F2 (u kron u)``."""

    F0: np.ndarray
    F1: np.ndarray
    F2: np.ndarray

    def __post_init__(self):
        self.F1 = as_matrix(self.F1, "F1")
        n = self.F1.shape[0]
        if self.F1.shape != (n, n):
            raise InvalidInputError("F1 must be square")
        self.F0 = np.zeros(n, dtype=np.complex128) if self.F0 is None else as_vector(self.F0, "F0")
        self.F2 = as_matrix(self.F2, "F2")
        if self.F0.size != n or self.F2.shape != (n, n * n):
            raise InvalidInputError(f"inconsistent shapes: F0 {self.F0.shape}, F1 {self.F1.shape}, F2 {self.F2.shape}")

    @property
    def n(self):
        return self.F1.shape[0]

    def rhs(self, u):
        return self.F0 + self.F1 @ u + self.F2 @ np.kron(u, u)


@dataclass
class CarlemanSystem:
    truncation: int
    n: int
    blocks: dict
    A: np.ndarray
    b: np.ndarray
    y_in: np.ndarray = None
    offsets: list = field(default_factory=list)

    @property
    def dimension(self):
        return self.A.shape[0]


def carleman_dimension(n, N):
    return sum(n**j for j in range(1, N + 1))


def _kron_chain(parts):
    out = np.ones((1, 1), dtype=np.complex128)
    for p in parts:
        out = np.kron(out, p)
    return out


def _level_sum(F, n, j):
    """``sum_k I^{k-1} kron F kron I^{j-k}`` over the ``j`` tensor slots."""
    I = np.eye(n, dtype=np.complex128)
    return sum(_kron_chain([I] * k + [F] + [I] * (j - 1 - k)) for k in range(j))


def carleman_matrix(ode, N):
    """Block-tridiagonal truncation at level ``N``; ``b`` holds ``F0`` on level 1."""
    N = int(N)
    if N < 1:
        raise InvalidInputError("truncation order must be >= 1")
    n = ode.n
    dim = carleman_dimension(n, N)
    if dim > MAX_CARLEMAN_DIM:
        raise ResourceLimitError(f"Carleman dimension {dim} exceeds {MAX_CARLEMAN_DIM}")
    offsets = np.cumsum([0] + [n**j for j in range(1, N + 1)]).tolist()
    A = np.zeros((dim, dim), dtype=np.complex128)
    blocks = {}
    F0 = ode.F0.reshape(n, 1)
    for j in range(1, N + 1):
        rows = slice(offsets[j - 1], offsets[j])
        blocks[(j, j)] = _level_sum(ode.F1, n, j)
        A[rows, rows] = blocks[(j, j)]
        if j < N:
            blocks[(j + 1, j)] = _level_sum(ode.F2, n, j)
            A[rows, offsets[j]:offsets[j + 1]] = blocks[(j + 1, j)]
        if j > 1:
            blocks[(j - 1, j)] = _level_sum(F0, n, j)
            A[rows, offsets[j - 2]:offsets[j - 1]] = blocks[(j - 1, j)]
    b = np.zeros(dim, dtype=np.complex128)
    b[:n] = ode.F0
    return CarlemanSystem(N, n, blocks, A, b, None, offsets)


def carleman_initial_state(u_in, N):
    """``[u, u kron u, ..., u^{kron N}]``."""
    u = as_vector(u_in, "initial state")
    if int(N) < 1:
        raise InvalidInputError("truncation order must be >= 1")
    levels, cur = [], np.ones(1, dtype=np.complex128)
    for _ in range(int(N)):
        cur = np.kron(cur, u)
        levels.append(cur)
    return np.concatenate(levels)


def carleman_implicit_system(sys, y_k, dt):
    """``L = I - A dt`` and ``B = y_k + b dt``."""
    y_k = as_vector(y_k, "Carleman state")
    if y_k.size != sys.dimension:
        raise InvalidInputError(f"state has {y_k.size} entries, system dimension is {sys.dimension}")
    L = np.eye(sys.dimension, dtype=np.complex128) - sys.A * dt
    return L, y_k + sys.b * dt


def burgers_ode(S, nu):
    """Central-difference Burgers on ``S`` grid points with zero Dirichlet ends.

    ``F1 = nu/dx^2 tridiag(1, -2, 1)``; ``F2`` couples ``u_i`` with
    ``u_{i+1}`` (coefficient ``-1/(2 dx)``) and ``u_{i-1}`` (``+1/(2 dx)``),
    the discretization of ``-u u_x``.
    """
    S = int(S)
    if S < 4:
        raise InvalidInputError("need at least 4 grid points")
    n = S - 2
    dx = 1.0 / (S - 1)
    lam1 = nu / dx**2
    lam2 = -1.0 / (2 * dx)
    F1 = lam1 * (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1))
    F2 = np.zeros((n, n * n))
    for i in range(n):
        if i + 1 < n:
            F2[i, i * n + i + 1] = lam2
        if i - 1 >= 0:
            F2[i, i * n + i - 1] = -lam2
    return QuadraticODE(None, F1, F2)


def burgers_grid(S):
    """Interior grid points ``x_i = i/(S-1)``, ``i = 1..S-2``."""
    return np.arange(1, S - 1) / (S - 1)


def burgers_reference_explicit(S, nu, dt_ref, T, u0=None, sample_times=None):
    """Forward-Euler trajectory of the discretized Burgers ODE.

    Returns ``(times, states)`` with full-grid states including the zero
    boundary values, sampled at ``sample_times`` (default: ``0`` and ``T``).
    """
    ode = burgers_ode(S, nu)
    x = burgers_grid(S)
    u = np.sin(2 * np.pi * x).astype(np.complex128) if u0 is None else as_vector(u0, "initial state").copy()
    if dt_ref <= 0:
        raise InvalidInputError("dt_ref must be positive")
    sample_times = [0.0, T] if sample_times is None else sorted(sample_times)
    n_steps = int(round(T / dt_ref))
    targets = {int(round(t / dt_ref)): t for t in sample_times}
    ref = max(np.max(np.abs(u)), 1e-300)
    times, states = [], []
    for k in range(n_steps + 1):
        if k in targets:
            times.append(targets[k])
            states.append(np.concatenate([[0.0], u, [0.0]]))
        if k == n_steps:
            break
        u = u + dt_ref * ode.rhs(u)
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 10 * ref:
            raise StabilityError(f"explicit Burgers integration blew up at step {k + 1}")
    return times, states


def burgers_carleman_evolve(S, nu, dt, T, N=2, solver="classical", epsilon=0.1, kappa=None, cache=None):
    """Implicit Carleman steps; returns ``(times, full-grid level-1 states)``."""
    ode = burgers_ode(S, nu)
    sys = carleman_matrix(ode, N)
    u0 = np.sin(2 * np.pi * burgers_grid(S))
    y = carleman_initial_state(u0, N)
    sys.y_in = y
    L, _ = carleman_implicit_system(sys, y, dt)
    if solver == "classical":
        step = lambda B: np.linalg.solve(L, B)  # noqa: E731
    elif solver == "qsvt":
        from qlinsolve.qsvt import PreparedSolver

        prepared = PreparedSolver(L, epsilon, kappa, cache)
        step = lambda B: prepared.solve(B).solution  # noqa: E731
    else:
        raise InvalidInputError(f"unknown solver {solver!r}")
    n_steps = int(round(T / dt))
    times = [0.0]
    states = [np.concatenate([[0.0], y[: ode.n], [0.0]])]
    for k in range(n_steps):
        _, B = carleman_implicit_system(sys, y, dt)
        try:
            y = step(B)
        except QLinSolveError as exc:
            raise _at_step(exc, k + 1) from exc
        times.append((k + 1) * dt)
        states.append(np.concatenate([[0.0], y[: ode.n], [0.0]]))
    return times, states


# -- random complex tridiagonal ------------------------------------------------------------


def random_complex_tridiagonal(n_qubits, seed):
    """Toeplitz tridiagonal ``A`` (sub ``z1``, diagonal ``z2``, super ``z3``) and ``y``.

    Draw order from ``numpy.random.default_rng(seed)``: the six reals
    ``a..f`` of ``z1 = a + bi``, ``z2 = c + di``, ``z3 = e + fi``, then the
    real parts of ``y``, then its imaginary parts; all ``U(-1, 1)``.
    """
    n_qubits = int(n_qubits)
    if n_qubits < 1:
        raise InvalidInputError("n_qubits must be >= 1")
    N = 1 << n_qubits
    rng = np.random.default_rng(seed)
    a, b, c, d, e, f = rng.uniform(-1.0, 1.0, 6)
    g = rng.uniform(-1.0, 1.0, N)
    h = rng.uniform(-1.0, 1.0, N)
    return tridiagonal_toeplitz(N, complex(a, b), complex(c, d), complex(e, f)), g + 1j * h


def tridiagonal_toeplitz(N, z1, z2, z3):
    A = np.diag(np.full(N, z2, dtype=np.complex128))
    A += np.diag(np.full(N - 1, z1, dtype=np.complex128), -1)
    A += np.diag(np.full(N - 1, z3, dtype=np.complex128), 1)
    return A
