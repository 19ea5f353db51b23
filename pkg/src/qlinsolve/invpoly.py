"""Polynomial approximation of ``1/x`` and QSP phase factors.

The target is ``f_b(x) = (1 - (1 - x^2)^b) / x``, an odd function that is
within ``eps`` of ``1/x`` on ``[1/kappa, 1]``. Its Chebyshev series has
only odd orders,

    f_b(x) = 4 sum_j (-1)^j P(X >= b + j + 1) T_{2j+1}(x),  X ~ Bin(2b, 1/2),

and truncating after ``j = d`` gives an odd polynomial of degree
``2d + 1`` that is a ``2 eps`` approximation.

Phases are found in the W_X convention

    U(x) = e^{i p0 Z} W(x) e^{i p1 Z} ... W(x) e^{i pd Z},
    W(x) = [[x, i sqrt(1 - x^2)], [i sqrt(1 - x^2), x]],

by fitting ``Re <0|U(x)|0>`` (equal to ``Re <+|U(x)|+>``) to a scaled
target at positive Chebyshev nodes, with symmetric phases and a
Levenberg-Marquardt least-squares solver.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from qlinsolve import kernels
from qlinsolve.errors import ConversionError, InvalidInputError, NonConvergenceError

SAFETY_SCALE = 0.9
FIT_TOL = 1e-6
CONVERSION_TOL = 1e-10
WX = "WX"
REFLECTION = "Reflection"


def degree_parameters(kappa, epsilon, log=math.log):
    """Return ``(b, d)``: ``b = ceil(k^2 log(k/eps))``, ``d = ceil(sqrt(b log(4b/eps)))`` made odd.

    The Chebyshev series keeps orders ``1, 3, ..., 2d + 1``.
    """
    kappa = float(kappa)
    epsilon = float(epsilon)
    if not (kappa > 1 and math.isfinite(kappa)):
        raise InvalidInputError(f"kappa must be finite and > 1, got {kappa}")
    if not 0 < epsilon < 1:
        raise InvalidInputError(f"epsilon must lie in (0, 1), got {epsilon}")
    b = max(1, math.ceil(kappa**2 * log(kappa / epsilon)))
    d = max(1, math.ceil(math.sqrt(b * log(4 * b / epsilon))))
    if d % 2 == 0:
        d += 1
    return b, d


def inverse_target_eval(x, b):
    """``(1 - (1 - x^2)^b) / x`` evaluated as ``-expm1(b log1p(-x^2)) / x``; 0 at ``x = 0``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        num = -np.expm1(b * np.log1p(-(x * x)))
        out = np.where(x == 0, 0.0, num / np.where(x == 0, 1.0, x))
    return out if out.ndim else float(out)


def binomial_tail_log(b):
    """``log P(X >= b + j + 1)`` for ``j = 0..b-1`` with ``X ~ Bin(2b, 1/2)``."""
    i = np.arange(b + 1, 2 * b + 1)
    logpmf = (
        math.lgamma(2 * b + 1)
        - np.array([math.lgamma(k + 1) + math.lgamma(2 * b - k + 1) for k in i])
        - 2 * b * math.log(2.0)
    )
    # tail[j] = logsumexp(logpmf[j:])
    return np.logaddexp.accumulate(logpmf[::-1])[::-1]


def inverse_series_coefficient(j, b):
    """Coefficient of ``T_{2j+1}`` in the untruncated series (0 for ``j >= b``)."""
    if j >= b:
        return 0.0
    return 4.0 * (-1) ** j * math.exp(binomial_tail_log(b)[j])


def evaluate_chebyshev(coeffs, x):
    """``sum_k coeffs[k] T_k(x)`` by the Clenshaw recurrence (vectorized over ``x``)."""
    c = np.asarray(coeffs, dtype=float)
    x = np.asarray(x, dtype=float)
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    for ck in c[:0:-1]:
        b1, b2 = 2.0 * x * b1 - b2 + ck, b1
    out = x * b1 - b2 + (c[0] if c.size else 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class InversePolynomial:
    """Truncated odd Chebyshev series for ``1/x``.

    ``chebyshev_coeffs[j]`` multiplies ``T_{2j+1}``; ``degree = 2 * d + 1``.
    """

    kappa: float
    epsilon: float
    b: int
    d: int
    chebyshev_coeffs: np.ndarray

    @property
    def degree(self):
        return 2 * (len(self.chebyshev_coeffs) - 1) + 1

    def full_coeffs(self):
        c = np.zeros(self.degree + 1)
        c[1::2] = self.chebyshev_coeffs
        return c

    def __call__(self, x):
        return evaluate_chebyshev(self.full_coeffs(), x)

    def max_abs(self, n_grid=20001):
        """``max |P|`` over ``[-1, 1]`` (odd, so only ``[0, 1]`` is scanned)."""
        x = np.concatenate([np.linspace(0.0, 1.0, n_grid), np.cos(np.pi * np.arange(self.degree + 1) / (2 * self.degree))])
        return float(np.max(np.abs(self(x))))


def chebyshev_inverse_coefficients(kappa, epsilon):
    b, d = degree_parameters(kappa, epsilon)
    tail = binomial_tail_log(b)
    n_terms = d + 1
    coeffs = np.zeros(n_terms)
    m = min(n_terms, b)
    coeffs[:m] = 4.0 * np.exp(tail[:m]) * np.where(np.arange(m) % 2, -1.0, 1.0)
    return InversePolynomial(float(kappa), float(epsilon), b, d, coeffs)


# -- QSP -------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseSequence:
    """QSP phases ``p0..pd``.

    ``phase_correction`` is the angle ``c`` such that ``e^{ic} <0|U|0>`` is the
    W_X polynomial; it is 0 for W_X sequences and ``d pi / 2`` after
    conversion to the reflection convention. ``beta`` is the scale of the
    realized polynomial relative to its target (``~ beta / x`` for
    inversion).
    """

    convention: str
    phases: np.ndarray
    beta: float = 1.0
    kappa: float = float("nan")
    epsilon: float = float("nan")
    phase_correction: float = 0.0
    residual: float = 0.0

    def __post_init__(self):
        if self.convention not in (WX, REFLECTION):
            raise InvalidInputError(f"unknown convention {self.convention!r}")
        ph = np.asarray(self.phases, dtype=float)
        if ph.ndim != 1 or ph.size == 0 or not np.all(np.isfinite(ph)):
            raise InvalidInputError("phases must be a nonempty finite 1-D array")
        object.__setattr__(self, "phases", ph)

    @property
    def degree(self):
        return self.phases.size - 1

    @property
    def parity(self):
        return self.degree % 2


def signal_matrices(x, convention=WX):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    W = np.empty((x.size, 2, 2), dtype=np.complex128)
    if convention == WX:
        W[:, 0, 0] = x
        W[:, 1, 1] = x
        W[:, 0, 1] = 1j * s
        W[:, 1, 0] = 1j * s
    else:
        W[:, 0, 0] = x
        W[:, 1, 1] = -x
        W[:, 0, 1] = s
        W[:, 1, 0] = s
    return W


def qsp_unitary(phases, x, convention=WX):
    """Full 2x2 QSP products, shape ``(len(x), 2, 2)``."""
    phases = np.asarray(phases, dtype=float)
    W = signal_matrices(x, convention)
    out = np.broadcast_to(np.diag(np.exp(1j * np.array([phases[0], -phases[0]]))), W.shape).copy()
    for p in phases[1:]:
        out = out @ W * np.exp(1j * np.array([p, -p]))[None, None, :]
    return out


def qsp_polynomial(seq, x):
    """Complex ``e^{ic} <0|U(x)|0>``; its real part is the realized polynomial."""
    vals, _ = kernels.qsp_response(np.ascontiguousarray(seq.phases), signal_matrices(x, seq.convention), False)
    return np.exp(1j * seq.phase_correction) * vals


def plus_amplitude(seq, x):
    """``<+|U(x)|+>`` without the phase correction."""
    U = qsp_unitary(seq.phases, x, seq.convention)
    return 0.5 * U.sum(axis=(1, 2))


def chebyshev_nodes(degree):
    """``degree + 1`` positive Chebyshev nodes ``cos((2j - 1) pi / (4 (degree + 1)))``."""
    j = np.arange(1, degree + 2)
    return np.cos((2 * j - 1) * np.pi / (4 * (degree + 1)))


def _full_from_reduced(theta, degree):
    half = (degree + 1) // 2
    ph = np.empty(degree + 1)
    ph[: theta.size] = theta
    ph[degree + 1 - half:] = theta[:half][::-1]
    return ph


def fit_phases(target, degree, nodes=None, tol=FIT_TOL, max_nfev=200):
    """Symmetric W_X phases whose ``Re <0|U|0>`` matches ``target`` at the nodes.

    ``target`` is a callable of definite parity ``degree mod 2`` with
    ``max |target| < 1``. Starts from ``(pi/4, 0, ..., 0, pi/4)``, which
    realizes the zero real part.
    """
    degree = int(degree)
    if degree < 0:
        raise InvalidInputError("degree must be nonnegative")
    x = chebyshev_nodes(degree) if nodes is None else np.asarray(nodes, dtype=float)
    y = np.asarray(target(x), dtype=float)
    W = signal_matrices(x, WX)
    n_free = degree // 2 + 1
    half = (degree + 1) // 2

    def resid(theta):
        vals, _ = kernels.qsp_response(_full_from_reduced(theta, degree), W, False)
        return vals.real - y

    def jac(theta):
        _, J = kernels.qsp_response(_full_from_reduced(theta, degree), W, True)
        J = J.real
        out = J[:, :n_free].copy()
        out[:, :half] += J[:, degree:degree - half:-1] if half else 0.0
        return out

    theta0 = np.zeros(n_free)
    theta0[0] = np.pi / 4 if degree > 0 else 0.0
    if degree == 0:
        theta0[0] = math.acos(float(np.clip(y.mean(), -1.0, 1.0))) if y.size else 0.0
    res = least_squares(resid, theta0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev * n_free)
    err = float(np.max(np.abs(res.fun))) if res.fun.size else 0.0
    if not err <= tol:
        raise NonConvergenceError(f"phase fit stalled at max node error {err:.3e} > {tol:.1e}", residual=err)
    return _full_from_reduced(res.x, degree), err


def find_phases_wx(poly, safety=SAFETY_SCALE, tol=FIT_TOL):
    """Phases realizing ``beta * P`` with ``beta = safety / max |P|``."""
    beta = safety / poly.max_abs()
    phases, err = fit_phases(lambda x: beta * poly(x), poly.degree, tol=tol)
    return PhaseSequence(WX, phases, beta, poly.kappa, poly.epsilon, 0.0, err)


def operator_distance_mod_phase(U, V):
    """Max over a batch of ``min_theta ||U - e^{i theta} V||_2``."""
    tr = np.einsum("kij,kij->k", V.conj(), U)
    ph = np.where(np.abs(tr) > 0, tr / np.where(np.abs(tr) > 0, np.abs(tr), 1.0), 1.0)
    diff = U - ph[:, None, None] * V
    return float(np.max(np.linalg.norm(diff, ord=2, axis=(1, 2))))


def convert_phases_reflection(phi_wx, tol=CONVERSION_TOL):
    """Reflection-convention phases with the same QSP product up to ``(-i)^d``.

    Uses ``R(x) = -i e^{i pi Z / 4} W(x) e^{i pi Z / 4}``: inner phases shift
    by ``-pi/2`` and the two end phases by ``-pi/4``.
    """
    if phi_wx.convention != WX:
        raise InvalidInputError("input sequence must use the W_X convention")
    d = phi_wx.degree
    ph = phi_wx.phases.copy()
    if d > 0:
        ph[1:d] -= np.pi / 2
        ph[0] -= np.pi / 4
        ph[d] -= np.pi / 4
    out = PhaseSequence(
        REFLECTION, ph, phi_wx.beta, phi_wx.kappa, phi_wx.epsilon,
        phi_wx.phase_correction + d * np.pi / 2, phi_wx.residual,
    )
    grid = np.linspace(-1.0, 1.0, 21)
    dist = operator_distance_mod_phase(qsp_unitary(ph, grid, REFLECTION), qsp_unitary(phi_wx.phases, grid, WX))
    if dist > tol:
        raise ConversionError(f"converted sequence violates the QSP identity by {dist:.3e}")
    return out


def inverse_phases(kappa, epsilon, convention=REFLECTION):
    """Inverse-function phases for ``(kappa, epsilon)`` in the requested convention."""
    seq = find_phases_wx(chebyshev_inverse_coefficients(kappa, epsilon))
    return convert_phases_reflection(seq) if convention == REFLECTION else seq
