"""Quantum singular value transformation and the linear-system solve.

The encoded matrix is ``M = A^dag / alpha``. With reflection-convention
phases the alternating sequence

    Pi_{p0} U [Pi_{p1} U^dag Pi_{p2} U] ... Pi_{pd}

has ancilla-zero block ``sum_k P(s_k) |w_k><v_k|`` for odd ``d`` where
``M = sum_k s_k |w_k><v_k|``. For ``M = A^dag / alpha`` and
``P(s) ~ beta / s`` this block is ``beta * alpha * A^{-1}``.

Each projector phase ``e^{i p (2 Pi - I)}`` is an MCX from the flag
register (controlled on all zeros) onto the QSP qubit, a phase
``diag(e^{-ip}, e^{ip})`` on that qubit, and the same MCX again. The QSP
qubit in ``|->`` instead of ``|+>`` sees ``-p``, so a Hadamard before and
after turns the circuit into ``(U_p + U_{-p}) / 2`` on the ``|0>``
branch, whose block is the real part of the polynomial.
"""
import os
import threading
from dataclasses import dataclass

import numpy as np

from qlinsolve import formats
from qlinsolve.blockenc import (
    BlockEncoding,
    banded_spec_from_matrix,
    build_block_encoding,
    build_dilation_encoding,
    pad_to_power_of_two,
)
from qlinsolve.errors import ConditioningError, InvalidInputError, ResourceLimitError
from qlinsolve.invpoly import REFLECTION, inverse_phases, qsp_polynomial
from qlinsolve.numerics import as_matrix, as_vector, singular_extrema, svd
from qlinsolve.statevector import (
    MAX_UNITARY_QUBITS,
    MCX,
    Circuit,
    QuantumState,
    SingleQubitGate,
    apply_gates,
    circuit_columns,
    offset_gate,
    postselect,
)

KAPPA_LADDER = (2.0, 4.0, 8.0, 16.0, 32.0)
HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
_PROBE = np.diag([1.0, 0.5])


@dataclass
class QSVTConfig:
    encoding: BlockEncoding
    phases: object
    real_part: bool = True

    def __post_init__(self):
        if self.phases.convention != REFLECTION:
            raise InvalidInputError("QSVT needs reflection-convention phases")


def _projector_phase(flag, phi):
    ctrl = MCX(flag, 0, (0,) * len(flag), label="Pi")
    rot = SingleQubitGate(0, np.diag([np.exp(-1j * phi), np.exp(1j * phi)]), label=f"Z({phi:.4g})")
    return [ctrl, rot, ctrl]


def assemble_qsvt_circuit(config):
    """Circuit on the layout with one QSP qubit prepended (qubit 0)."""
    enc = config.encoding
    if enc.layout.n_qsp:
        raise InvalidInputError("encoding already carries a QSP qubit")
    layout = enc.layout.with_qsp()
    fwd = [offset_gate(g, 1) for g in enc.circuit.gates]
    bwd = [g.inverse() for g in reversed(fwd)]
    flag = tuple(q + 1 for q in enc.col_projector)
    ph = config.phases.phases
    d = ph.size - 1

    circ = Circuit(layout)
    if config.real_part:
        circ.append(SingleQubitGate(0, HADAMARD, "H"))
    for k in range(d, 0, -1):
        circ.extend(_projector_phase(flag, ph[k]))
        circ.extend(fwd if (d - k) % 2 == 0 else bwd)
    circ.extend(_projector_phase(flag, ph[0]))
    c = config.phases.phase_correction
    circ.append(SingleQubitGate(0, np.diag([np.exp(1j * c), np.exp(-1j * c)]), "corr"))
    if config.real_part:
        circ.append(SingleQubitGate(0, HADAMARD, "H"))
    return circ


def qsvt_block(config):
    """Ancilla-zero block (QSP and flag qubits in ``|0>``) of the QSVT circuit."""
    circ = assemble_qsvt_circuit(config)
    if circ.layout.total > MAX_UNITARY_QUBITS:
        raise ResourceLimitError(f"{circ.layout.total} qubits exceeds the extraction cap of {MAX_UNITARY_QUBITS}")
    idx = np.arange(1 << circ.layout.n_matrix)
    return circuit_columns(circ, idx)[idx, :]


def realized_polynomial(phases, real_part=True):
    """Scalar function the QSVT applies to each singular value."""

    def P(s):
        v = qsp_polynomial(phases, np.atleast_1d(s))
        return v.real if real_part else v

    return P


def svd_polynomial_transform(M, poly, parity):
    """``sum_k P(s_k) |w_k><v_k|`` (odd) or ``sum_k P(s_k) |v_k><v_k|`` (even) from a dense SVD of ``M``."""
    r = svd(as_matrix(M))
    p = poly(r.singular_values)
    if parity % 2:
        return (r.left_vectors * p) @ r.right_vectors.conj().T
    return (r.right_vectors * p) @ r.right_vectors.conj().T


# -- phase cache -------------------------------------------------------------------


class PhaseCache:
    """Reflection-convention inverse phases keyed by ``(kappa, epsilon)``.

    With a directory, sequences are read from and written to phase files;
    writes go through a temporary file and an atomic rename.
    """

    def __init__(self, directory=None):
        self.directory = directory
        self._mem = {}
        self._locks = {}
        self._guard = threading.Lock()

    def _path(self, kappa, epsilon):
        return os.path.join(self.directory, f"phases_k{kappa:.17g}_e{epsilon:.17g}.txt")

    def get(self, kappa, epsilon):
        key = (float(kappa), float(epsilon))
        with self._guard:
            if key in self._mem:
                return self._mem[key]
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key in self._mem:
                return self._mem[key]
            seq = None
            if self.directory:
                path = self._path(*key)
                if os.path.exists(path):
                    seq = formats.read_phase_file(path)
            if seq is None:
                seq = inverse_phases(*key)
                if self.directory:
                    os.makedirs(self.directory, exist_ok=True)
                    formats.write_phase_file(self._path(*key), seq)
            self._mem[key] = seq
            return seq


_DEFAULT_CACHE = PhaseCache()


def default_phase_cache():
    return _DEFAULT_CACHE


_BETA_CACHE = {}
_BETA_LOCK = threading.Lock()


def effective_beta(phases):
    """Scale of the realized ``s P(s)`` measured on a diagonal probe with ``s = 1, 0.5``.

    Runs the assembled QSVT circuit on a dilation encoding of
    ``diag(1, 0.5)`` and averages ``s P(s)`` over the two diagonal entries.
    """
    key = phases.phases.tobytes()
    with _BETA_LOCK:
        if key in _BETA_CACHE:
            return _BETA_CACHE[key]
    enc = build_dilation_encoding(_PROBE, 1.0)
    block = qsvt_block(QSVTConfig(enc, phases, True))
    s = np.diag(_PROBE)
    val = float(np.mean(s * np.real(np.diag(block))))
    with _BETA_LOCK:
        _BETA_CACHE[key] = val
    return val


# -- solve ------------------------------------------------------------------------


@dataclass
class SolveReport:
    solution: np.ndarray
    success_probability: float
    rescale: float
    kappa_used: float
    degree_used: int
    alpha: float = float("nan")
    sigma_min: float = float("nan")
    beta: float = float("nan")
    residual: float = float("nan")


def choose_kappa(sigma_min_scaled, ladder=KAPPA_LADDER):
    """Smallest ladder value with ``1/kappa < sigma_min``."""
    for k in ladder:
        if 1.0 / k < sigma_min_scaled:
            return float(k)
    raise ConditioningError(
        f"subnormalized sigma_min={sigma_min_scaled:.4g} is below 1/kappa for every kappa in {ladder}",
        sigma_min_scaled,
    )


class PreparedSolver:
    """QSVT inversion of a fixed matrix, reusable across right-hand sides.

    Builds the banded block encoding of ``A^dag`` (zero-padded to a power
    of two), selects ``kappa`` from the ladder unless given, fetches
    phases and assembles the circuit once.
    """

    def __init__(self, A, epsilon=0.1, kappa=None, cache=None):
        A = as_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise InvalidInputError(f"matrix must be square, got {A.shape}")
        self.dim = A.shape[0]
        self.A = A
        self.epsilon = float(epsilon)
        padded = pad_to_power_of_two(A)
        self.encoding = build_block_encoding(banded_spec_from_matrix(padded.conj().T))
        self.alpha = self.encoding.alpha
        _, smin = singular_extrema(A)
        self.sigma_min = smin
        scaled = smin / self.alpha
        if kappa is None:
            self.kappa = choose_kappa(scaled)
        else:
            self.kappa = float(kappa)
            if not 1.0 / self.kappa < scaled:
                raise ConditioningError(f"subnormalized sigma_min={scaled:.4g} does not exceed 1/kappa={1 / self.kappa:.4g}", scaled)
        self.phases = (cache or default_phase_cache()).get(self.kappa, self.epsilon)
        self.beta = effective_beta(self.phases)
        self.circuit = assemble_qsvt_circuit(QSVTConfig(self.encoding, self.phases, True))
        self.layout = self.circuit.layout

    @property
    def degree(self):
        return self.phases.degree

    def run(self, y):
        """Post-selected state and its probability for right-hand side ``y``."""
        y = as_vector(y, "right-hand side")
        if y.size > self.dim:
            raise InvalidInputError(f"right-hand side has {y.size} entries, matrix dimension is {self.dim}")
        norm = np.linalg.norm(y)
        if norm == 0:
            raise InvalidInputError("right-hand side is zero")
        psi = np.zeros((self.layout.dim, 1), dtype=np.complex128)
        psi[: y.size, 0] = y / norm
        apply_gates(psi, self.layout.total, self.circuit.gates)
        state = QuantumState(self.layout, psi[:, 0])
        ancilla = tuple(range(self.layout.n_qsp + self.layout.n_flag))
        return postselect(state, ancilla, (0,) * len(ancilla))

    def solve(self, y):
        y = as_vector(y, "right-hand side")
        post, prob = self.run(y)
        norm = float(np.linalg.norm(y))
        rescale = norm / (self.alpha * self.beta)
        amps = post.amplitudes[: 1 << self.layout.n_matrix]
        x = amps[: self.dim] * np.sqrt(prob) * rescale
        rhs = np.zeros(self.dim, dtype=np.complex128)
        rhs[: y.size] = y
        residual = float(np.linalg.norm(self.A @ x - rhs) / norm)
        return SolveReport(x, prob, rescale, self.kappa, self.degree, self.alpha, self.sigma_min, self.beta, residual)


def solve_linear_system(A, y, epsilon=0.1, kappa=None, cache=None):
    """Solve ``A x = y`` by real-part QSVT inversion of the encoded ``A^dag``."""
    return PreparedSolver(A, epsilon, kappa, cache).solve(y)
