"""Small-register state-vector simulator.

Qubits are numbered from the most significant bit: qubit 0 is the
leftmost character of a bitstring and carries weight ``2**(n-1)``.
Registers are laid out QSP, flag (data qubits then the delete qubit),
matrix.

Amplitude arrays are handled internally as ``(2**n, batch)`` blocks so a
circuit can be pushed through several basis columns at once; this is how
block extraction avoids building full unitaries.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from qlinsolve import kernels
from qlinsolve.errors import InvalidInputError, PostSelectionError, ResourceLimitError
from qlinsolve.numerics import as_matrix, as_vector

MAX_QUBITS = 16
MAX_UNITARY_QUBITS = 12
NORM_TOL = 1e-10


@dataclass(frozen=True)
class RegisterLayout:
    """Qubit counts per register. ``n_flag`` includes the delete qubit."""

    n_qsp: int = 0
    n_flag: int = 0
    n_matrix: int = 1

    def __post_init__(self):
        if self.n_qsp not in (0, 1):
            raise InvalidInputError("n_qsp must be 0 or 1")
        if self.n_flag < 0 or self.n_matrix < 0:
            raise InvalidInputError("register sizes must be nonnegative")
        if self.total < 1:
            raise InvalidInputError("layout has no qubits")
        if self.total > MAX_QUBITS:
            raise ResourceLimitError(f"{self.total} qubits exceeds the desk-scale cap of {MAX_QUBITS}")

    @property
    def total(self):
        return self.n_qsp + self.n_flag + self.n_matrix

    @property
    def dim(self):
        return 1 << self.total

    def register(self, name):
        """Qubit indices of ``qsp``, ``flag``, ``data``, ``delete``, ``matrix`` or ``ancilla``."""
        q0, f0 = 0, self.n_qsp
        m0 = f0 + self.n_flag
        regs = {
            "qsp": range(q0, f0),
            "flag": range(f0, m0),
            "data": range(f0, max(f0, m0 - 1)),
            "delete": range(m0 - 1, m0) if self.n_flag else range(0),
            "matrix": range(m0, m0 + self.n_matrix),
            "ancilla": range(0, m0),
        }
        try:
            return tuple(regs[name])
        except KeyError:
            raise InvalidInputError(f"unknown register {name!r}") from None

    def with_qsp(self):
        return RegisterLayout(1, self.n_flag, self.n_matrix)

    def without_qsp(self):
        return RegisterLayout(0, self.n_flag, self.n_matrix)


def _check_qubits(qubits, n):
    for q in qubits:
        if not 0 <= q < n:
            raise InvalidInputError(f"qubit {q} outside 0..{n - 1}")
    if len(set(qubits)) != len(qubits):
        raise InvalidInputError(f"repeated qubit in {qubits}")


def _ctrl_mask(controls, polarities, n):
    mask = val = 0
    for q, p in zip(controls, polarities):
        bit = 1 << (n - 1 - q)
        mask |= bit
        if p:
            val |= bit
    return mask, val


def _polarities(controls, polarities):
    if polarities is None:
        return (1,) * len(controls)
    polarities = tuple(int(bool(p)) for p in polarities)
    if len(polarities) != len(controls):
        raise InvalidInputError("one polarity per control qubit required")
    return polarities


# -- gates -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SingleQubitGate:
    qubit: int
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        u = np.asarray(self.matrix, dtype=np.complex128)
        if u.shape != (2, 2) or not np.allclose(u.conj().T @ u, np.eye(2), atol=1e-12):
            raise InvalidInputError("single-qubit gate matrix must be a 2x2 unitary")
        object.__setattr__(self, "matrix", np.ascontiguousarray(u))

    @property
    def qubits(self):
        return (self.qubit,)

    def inverse(self):
        return SingleQubitGate(self.qubit, self.matrix.conj().T, self.label)


@dataclass(frozen=True)
class MCX:
    """Multi-controlled X; ``polarities[i] == 0`` means control on ``|0>``."""

    controls: tuple
    target: int
    polarities: tuple = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(int(c) for c in self.controls))
        object.__setattr__(self, "polarities", _polarities(self.controls, self.polarities))
        if self.target in self.controls:
            raise InvalidInputError("MCX target is also a control")

    @property
    def qubits(self):
        return self.controls + (self.target,)

    def inverse(self):
        return self


@dataclass(frozen=True)
class RegisterPermutation:
    """Basis permutation ``|v> -> |perm[v]>`` on ``qubits`` (MSB first), optionally controlled."""

    qubits: tuple
    perm: tuple
    controls: tuple = ()
    polarities: tuple = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "perm", tuple(int(p) for p in self.perm))
        object.__setattr__(self, "controls", tuple(int(c) for c in self.controls))
        object.__setattr__(self, "polarities", _polarities(self.controls, self.polarities))
        if sorted(self.perm) != list(range(1 << len(self.qubits))):
            raise InvalidInputError("perm is not a bijection on the register basis")
        if set(self.controls) & set(self.qubits):
            raise InvalidInputError("control overlaps permuted register")

    def inverse(self):
        inv = [0] * len(self.perm)
        for i, p in enumerate(self.perm):
            inv[p] = i
        return RegisterPermutation(self.qubits, tuple(inv), self.controls, self.polarities, self.label)

    @property
    def all_qubits(self):
        return self.controls + self.qubits


@dataclass(frozen=True, eq=False)
class RegisterUnitary:
    """Dense unitary on ``qubits`` (MSB first), optionally controlled."""

    qubits: tuple
    matrix: np.ndarray
    controls: tuple = ()
    polarities: tuple = None
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "controls", tuple(int(c) for c in self.controls))
        object.__setattr__(self, "polarities", _polarities(self.controls, self.polarities))
        u = np.asarray(self.matrix, dtype=np.complex128)
        k = 1 << len(self.qubits)
        if u.shape != (k, k):
            raise InvalidInputError(f"register unitary must be {k}x{k}, got {u.shape}")
        if not np.allclose(u.conj().T @ u, np.eye(k), atol=1e-12):
            raise InvalidInputError("register matrix is not unitary")
        if set(self.controls) & set(self.qubits):
            raise InvalidInputError("control overlaps target register")
        object.__setattr__(self, "matrix", u)

    def inverse(self):
        return RegisterUnitary(self.qubits, self.matrix.conj().T, self.controls, self.polarities, self.label)

    @property
    def all_qubits(self):
        return self.controls + self.qubits


@dataclass
class Circuit:
    layout: RegisterLayout
    gates: list = field(default_factory=list)

    def append(self, gate):
        qs = gate.all_qubits if hasattr(gate, "all_qubits") else gate.qubits
        _check_qubits(qs, self.layout.total)
        self.gates.append(gate)
        return self

    def extend(self, gates):
        for g in gates:
            self.append(g)
        return self

    def inverse(self):
        return Circuit(self.layout, [g.inverse() for g in reversed(self.gates)])

    def __len__(self):
        return len(self.gates)

    def count(self, kind):
        return sum(isinstance(g, kind) for g in self.gates)


def offset_gate(gate, k):
    """Copy of ``gate`` with every qubit index shifted by ``k``."""
    if isinstance(gate, SingleQubitGate):
        return SingleQubitGate(gate.qubit + k, gate.matrix, gate.label)
    if isinstance(gate, MCX):
        return MCX(tuple(c + k for c in gate.controls), gate.target + k, gate.polarities, gate.label)
    shifted = tuple(q + k for q in gate.qubits)
    ctrls = tuple(c + k for c in gate.controls)
    if isinstance(gate, RegisterPermutation):
        return RegisterPermutation(shifted, gate.perm, ctrls, gate.polarities, gate.label)
    return RegisterUnitary(shifted, gate.matrix, ctrls, gate.polarities, gate.label)


# -- application -------------------------------------------------------------


@lru_cache(maxsize=1024)
def _permutation_map(n, gate):
    idx = np.arange(1 << n)
    k = len(gate.qubits)
    sub = np.zeros_like(idx)
    for q in gate.qubits:
        sub = (sub << 1) | ((idx >> (n - 1 - q)) & 1)
    new_sub = np.asarray(gate.perm)[sub]
    cleared = idx.copy()
    for pos, q in enumerate(gate.qubits):
        bit = 1 << (n - 1 - q)
        val = ((new_sub >> (k - 1 - pos)) & 1) * bit
        cleared = (cleared & ~bit) | val
    mask, cval = _ctrl_mask(gate.controls, gate.polarities, n)
    active = (idx & mask) == cval
    return np.where(active, cleared, idx)


def _apply_register_unitary(psi, n, gate):
    nb = psi.shape[1]
    tensor = psi.reshape((2,) * n + (nb,))
    index = [slice(None)] * (n + 1)
    for q, p in zip(gate.controls, gate.polarities):
        index[q] = p
    view = tensor[tuple(index)]
    # remaining axes after integer indexing keep their relative order
    free = [q for q in range(n) if q not in gate.controls]
    axes = [free.index(q) for q in gate.qubits]
    moved = np.moveaxis(view, axes, range(len(axes)))
    shp = moved.shape
    k = 1 << len(gate.qubits)
    out = (gate.matrix @ moved.reshape(k, -1)).reshape(shp)
    view[...] = np.moveaxis(out, range(len(axes)), axes)


def apply_gates(psi, n, gates):
    """Apply ``gates`` in order to a ``(2**n, batch)`` C-contiguous array, in place."""
    for g in gates:
        if isinstance(g, MCX):
            mask, val = _ctrl_mask(g.controls, g.polarities, n)
            kernels.apply_mcx(psi, mask, val, 1 << (n - 1 - g.target))
        elif isinstance(g, SingleQubitGate):
            kernels.apply_1q(psi, n, g.qubit, g.matrix)
        elif isinstance(g, RegisterPermutation):
            mp = _permutation_map(n, g)
            out = np.empty_like(psi)
            out[mp] = psi
            psi[...] = out
        elif isinstance(g, RegisterUnitary):
            _apply_register_unitary(psi, n, g)
        else:
            raise InvalidInputError(f"unsupported gate {g!r}")
    return psi


@dataclass
class QuantumState:
    layout: RegisterLayout
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        amps = as_vector(self.amplitudes, "amplitudes")
        if amps.size != self.layout.dim:
            raise InvalidInputError(f"state has {amps.size} amplitudes, layout needs {self.layout.dim}")
        if self.normalized and abs(np.linalg.norm(amps) - 1.0) > NORM_TOL:
            raise InvalidInputError("state is not normalized")
        self.amplitudes = amps

    @classmethod
    def zero(cls, layout):
        amps = np.zeros(layout.dim, dtype=np.complex128)
        amps[0] = 1.0
        return cls(layout, amps)

    @property
    def norm(self):
        return float(np.linalg.norm(self.amplitudes))


def apply_circuit(state, circuit):
    if state.layout != circuit.layout:
        raise InvalidInputError("state and circuit layouts differ")
    psi = np.ascontiguousarray(state.amplitudes.reshape(-1, 1).copy())
    apply_gates(psi, state.layout.total, circuit.gates)
    return QuantumState(state.layout, psi[:, 0], normalized=state.normalized)


def circuit_columns(circuit, columns):
    """``U[:, columns]`` for the circuit unitary ``U`` without forming ``U``."""
    n = circuit.layout.total
    columns = np.asarray(columns, dtype=int)
    psi = np.zeros((1 << n, columns.size), dtype=np.complex128)
    psi[columns, np.arange(columns.size)] = 1.0
    return apply_gates(psi, n, circuit.gates)


def circuit_unitary(circuit):
    n = circuit.layout.total
    if n > MAX_UNITARY_QUBITS:
        raise ResourceLimitError(f"full unitary of {n} qubits exceeds the cap of {MAX_UNITARY_QUBITS}")
    return circuit_columns(circuit, np.arange(1 << n))


def householder_completion(v):
    """Unitary whose first column is ``v / ||v||``."""
    v = as_vector(v)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise InvalidInputError("cannot prepare the zero vector")
    u = v / nrm
    theta = np.angle(u[0]) if abs(u[0]) > 0 else 0.0
    x = u * np.exp(-1j * theta)
    w = x.copy()
    w[0] -= 1.0
    wn = np.linalg.norm(w)
    H = np.eye(u.size, dtype=np.complex128)
    if wn > 1e-15:
        w /= wn
        H -= 2.0 * np.outer(w, w.conj())
    return np.exp(1j * theta) * H


def prepare_state(v, layout, target="matrix"):
    """Circuit loading ``v / ||v||`` (zero-padded) into register ``target``."""
    v = as_vector(v)
    qubits = layout.register(target)
    cap = 1 << len(qubits)
    if not qubits or v.size > cap:
        raise InvalidInputError(f"vector of length {v.size} does not fit register {target!r}")
    padded = np.zeros(cap, dtype=np.complex128)
    padded[: v.size] = v
    circ = Circuit(layout)
    circ.append(RegisterUnitary(qubits, householder_completion(padded), label=f"prep[{target}]"))
    return circ


def _outcome_mask(layout, qubits, outcome):
    qubits = tuple(qubits)
    _check_qubits(qubits, layout.total)
    if isinstance(outcome, str):
        outcome = [int(ch) for ch in outcome]
    outcome = [int(b) for b in outcome]
    if len(outcome) != len(qubits):
        raise InvalidInputError("one outcome bit per selected qubit required")
    mask, val = _ctrl_mask(qubits, outcome, layout.total)
    idx = np.arange(layout.dim)
    return (idx & mask) == val


def postselect(state, qubits, outcome):
    """Project onto ``qubits == outcome``; return the renormalized state and its probability."""
    sel = _outcome_mask(state.layout, qubits, outcome)
    amps = state.amplitudes
    prob = float(np.sum(np.abs(amps[sel]) ** 2))
    if prob <= 1e-30:
        raise PostSelectionError(f"post-selection probability {prob:.3e} is zero", prob)
    out = np.zeros_like(amps)
    out[sel] = amps[sel] / np.sqrt(prob)
    return QuantumState(state.layout, out), prob


def sample_counts(state, shots, seed):
    """Multinomial measurement record of all qubits, keyed by bitstring (qubit 0 first)."""
    if int(shots) != shots or shots < 1:
        raise InvalidInputError("shots must be a positive integer")
    p = np.abs(state.amplitudes) ** 2
    p = p / p.sum()
    counts = np.random.default_rng(seed).multinomial(int(shots), p)
    n = state.layout.total
    return {format(i, f"0{n}b"): int(c) for i, c in enumerate(counts) if c}


def expectation(state, M):
    M = as_matrix(M, "observable")
    if M.shape != (state.layout.dim, state.layout.dim):
        raise InvalidInputError(f"observable must be {state.layout.dim}x{state.layout.dim}")
    psi = state.amplitudes
    return complex(np.vdot(psi, M @ psi))
