"""Dense complex linear algebra and curve fitting.

Vectors and matrices are plain ``numpy`` arrays of ``complex128``; the
``as_vector``/``as_matrix`` helpers enforce the finiteness and shape
invariants at module boundaries.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from qlinsolve import kernels
from qlinsolve.errors import FitError, InvalidInputError, NonConvergenceError

RANK_TOL = 1e-12
_JACOBI_TOL = 1e-15
_MAX_SWEEPS = 80
_NOISE = 1e-14


def as_vector(v, name="vector"):
    arr = np.asarray(v, dtype=np.complex128)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a nonempty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def as_matrix(M, name="matrix"):
    arr = np.asarray(M, dtype=np.complex128)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a nonempty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class SVDResult:
    """Thin SVD ``M = W @ diag(sigma) @ V^H`` with ``sigma`` nonincreasing."""

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray
    rank: int

    def reconstruct(self):
        return (self.left_vectors * self.singular_values) @ self.right_vectors.conj().T


def _complete_columns(W, good):
    """Replace the columns of ``W`` not flagged ``good`` by an orthonormal completion."""
    m, n = W.shape
    basis = W[:, good]
    fill = []
    for e in np.eye(m, dtype=complex):
        if len(fill) == n - basis.shape[1]:
            break
        cur = np.column_stack([basis] + fill) if fill or basis.size else np.zeros((m, 0))
        for _ in range(2):
            e = e - cur @ (cur.conj().T @ e)
        nrm = np.linalg.norm(e)
        if nrm > 1e-8:
            fill.append((e / nrm)[:, None])
    out = W.copy()
    out[:, ~good] = np.column_stack(fill) if fill else out[:, ~good]
    return out


def svd(M):
    """Singular value decomposition by one-sided (Hestenes) Jacobi rotations.

    Right singular vectors are phase-fixed so that the largest-magnitude
    entry of each is real and nonnegative; the matching left vector gets
    the same phase so the product is unchanged.
    """
    M = as_matrix(M)
    m, n = M.shape
    if m < n:
        r = svd(M.conj().T)
        W, V = r.right_vectors, r.left_vectors
        return _finish(W, r.singular_values.copy(), V)

    g = np.array(M.T, order="C", copy=True)
    vrows = np.eye(n, dtype=np.complex128)
    # columns this small are rounding noise; rotating them never settles
    floor = (_NOISE * np.linalg.norm(g)) ** 2
    for _ in range(_MAX_SWEEPS):
        if kernels.jacobi_sweep(g, vrows, _JACOBI_TOL, floor) == 0:
            break
    else:  # pragma: no cover - Jacobi converges quadratically at desk scale
        raise NonConvergenceError("one-sided Jacobi did not converge")

    sigma = np.sqrt(np.einsum("ij,ij->i", g.real, g.real) + np.einsum("ij,ij->i", g.imag, g.imag))
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    g = g[order]
    V = vrows[order].T
    W = np.zeros((m, n), dtype=np.complex128)
    cutoff = max(sigma[0], 1.0) * 1e-14 if sigma.size else 0.0
    good = sigma > cutoff
    W[:, good] = (g[good] / sigma[good, None]).T
    if not np.all(good):
        W = _complete_columns(W, good)
    return _finish(W, sigma, V)


def _finish(W, sigma, V):
    W = W.copy()
    V = V.copy()
    for k in range(V.shape[1]):
        col = V[:, k]
        i = int(np.argmax(np.abs(col) - 1e-13 * np.arange(col.size)))
        if abs(col[i]) > 0:
            ph = col[i] / abs(col[i])
            V[:, k] *= np.conj(ph)
            W[:, k] *= np.conj(ph)
    rank = int(np.count_nonzero(sigma > RANK_TOL))
    return SVDResult(W, sigma, V, rank)


def singular_extrema(M):
    """``(sigma_max, sigma_min)``; ``sigma_min`` is 0 for rank-deficient ``M``."""
    r = svd(M)
    s = r.singular_values
    smin = s[-1] if r.rank == s.size else 0.0
    return float(s[0]), float(smin)


def smallest_nonzero_singular_value(M):
    s = svd(M).singular_values
    nz = s[s > RANK_TOL]
    return float(nz[-1]) if nz.size else 0.0


def pseudoinverse_solve(M, y):
    """Return ``M^+ y`` using the rank threshold ``RANK_TOL``."""
    M = as_matrix(M)
    y = as_vector(y, "right-hand side")
    if M.shape[0] != y.size:
        raise InvalidInputError(f"dimension mismatch: matrix {M.shape}, vector {y.size}")
    r = svd(M)
    inv = np.where(r.singular_values > RANK_TOL, 1.0 / np.where(r.singular_values > RANK_TOL, r.singular_values, 1.0), 0.0)
    return r.right_vectors @ (inv * (r.left_vectors.conj().T @ y))


@dataclass(frozen=True)
class DoubleExpFit:
    """``y(x) = A exp(-B x) + C exp(-D x)``; terms ordered so that ``B <= D``."""

    A: float
    B: float
    C: float
    D: float
    residual_rms: float
    degraded: bool = False

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.A * np.exp(-self.B * x) + self.C * np.exp(-self.D * x)


def _model(p, x):
    a, b, c, d = p
    return a * np.exp(-b * x) + c * np.exp(-d * x)


def _model_jac(p, x):
    a, b, c, d = p
    eb, ed = np.exp(-b * x), np.exp(-d * x)
    return np.column_stack([eb, -a * x * eb, ed, -c * x * ed])


def _linear_amplitudes(b, d, x, y):
    basis = np.column_stack([np.exp(-b * x), np.exp(-d * x)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return coef


def fit_double_exponential(xs, ys, n_starts=12, max_nfev=4000):
    """Least-squares fit of a two-term exponential with deterministic multi-start.

    Each start fixes a pair of decay rates on a log grid scaled to the span
    of ``xs``, solves the linear amplitudes, then runs Levenberg-Marquardt
    on all four parameters. The lowest-residual result is returned; if no
    start reports convergence the result is flagged ``degraded``.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise InvalidInputError("xs and ys must be 1-D arrays of equal length")
    if x.size < 4:
        raise InvalidInputError(f"need at least 4 points for a 4-parameter fit, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidInputError("non-finite data")
    if np.any(y <= 0):
        raise InvalidInputError("ys must be positive")

    span = max(np.ptp(x), 1e-12)
    rates = np.concatenate([[0.0], np.geomspace(0.05, 20.0, 7) / span])
    pairs = [(b, d) for i, b in enumerate(rates) for d in rates[i + 1:]]
    pick = np.unique(np.linspace(0, len(pairs) - 1, max(n_starts, 8)).round().astype(int))
    starts = [pairs[i] for i in pick]

    best = None
    any_converged = False
    for b0, d0 in starts:
        a0, c0 = _linear_amplitudes(b0, d0, x, y)
        try:
            res = least_squares(
                lambda p: _model(p, x) - y,
                np.array([a0, b0, c0, d0]),
                jac=lambda p: _model_jac(p, x),
                method="lm",
                xtol=1e-15,
                ftol=1e-15,
                gtol=1e-15,
                max_nfev=max_nfev,
            )
        except (ValueError, FloatingPointError):
            continue
        if not np.all(np.isfinite(res.x)) or not np.all(np.isfinite(res.fun)):
            continue
        rms = float(np.sqrt(np.mean(res.fun**2)))
        any_converged |= res.status > 0
        if best is None or rms < best[1]:
            best = (res.x, rms)
    if best is None:
        raise FitError("all fit starts produced non-finite parameters")
    a, b, c, d = best[0]
    if b > d:
        a, b, c, d = c, d, a, b
    return DoubleExpFit(float(a), float(b), float(c), float(d), best[1], degraded=not any_converged)
