import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qlinsolve.errors import InvalidInputError, PostSelectionError, ResourceLimitError
from qlinsolve.statevector import (
    MCX,
    Circuit,
    QuantumState,
    RegisterLayout,
    RegisterPermutation,
    RegisterUnitary,
    SingleQubitGate,
    apply_circuit,
    circuit_unitary,
    expectation,
    householder_completion,
    offset_gate,
    postselect,
    prepare_state,
    sample_counts,
)

from conftest import random_complex

X = np.array([[0, 1], [1, 0]])
H = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
Z = np.diag([1, -1])


def layout(n):
    return RegisterLayout(0, 0, n)


def basis(n, i):
    v = np.zeros(1 << n, dtype=complex)
    v[i] = 1
    return QuantumState(layout(n), v)


def test_layout_registers():
    lay = RegisterLayout(1, 3, 2)
    assert lay.total == 6 and lay.dim == 64
    assert lay.register("qsp") == (0,)
    assert lay.register("flag") == (1, 2, 3)
    assert lay.register("data") == (1, 2)
    assert lay.register("delete") == (3,)
    assert lay.register("matrix") == (4, 5)
    with pytest.raises(ResourceLimitError):
        RegisterLayout(1, 10, 6)


def test_x_and_h():
    out = apply_circuit(basis(1, 0), Circuit(layout(1)).append(SingleQubitGate(0, X)))
    assert np.allclose(out.amplitudes, [0, 1])
    out = apply_circuit(basis(1, 0), Circuit(layout(1)).append(SingleQubitGate(0, H)))
    assert np.allclose(out.amplitudes, [1 / np.sqrt(2)] * 2)


def test_mcx_definition():
    c = Circuit(layout(3)).append(MCX((0, 1), 2))
    assert np.argmax(np.abs(apply_circuit(basis(3, 0b110), c).amplitudes)) == 0b111
    assert np.argmax(np.abs(apply_circuit(basis(3, 0b100), c).amplitudes)) == 0b100


def test_mcx_zero_polarity():
    c = Circuit(layout(2)).append(MCX((0,), 1, (0,)))
    assert np.argmax(np.abs(apply_circuit(basis(2, 0b00), c).amplitudes)) == 0b01
    assert np.argmax(np.abs(apply_circuit(basis(2, 0b10), c).amplitudes)) == 0b10


def test_circuit_unitary_examples():
    assert np.allclose(circuit_unitary(Circuit(layout(2))), np.eye(4))
    assert np.allclose(circuit_unitary(Circuit(layout(1)).append(SingleQubitGate(0, X))), X)
    hzh = Circuit(layout(1)).extend([SingleQubitGate(0, H), SingleQubitGate(0, Z), SingleQubitGate(0, H)])
    assert np.max(np.abs(circuit_unitary(hzh) - X)) <= 1e-12
    with pytest.raises(ResourceLimitError):
        circuit_unitary(Circuit(layout(13)))


def test_controlled_register_unitary_matches_kron():
    rng = np.random.default_rng(1)
    q, _ = np.linalg.qr(random_complex(rng, (4, 4)))
    c = Circuit(layout(3)).append(RegisterUnitary((1, 2), q, (0,), (1,)))
    expect = np.block([[np.eye(4), np.zeros((4, 4))], [np.zeros((4, 4)), q]])
    assert np.allclose(circuit_unitary(c), expect, atol=1e-13)


def test_register_permutation_and_inverse():
    g = RegisterPermutation((1, 2), (1, 2, 3, 0), (0,), (1,))
    U = circuit_unitary(Circuit(layout(3)).append(g))
    assert [int(np.argmax(U[:, i])) for i in range(8)] == [0, 1, 2, 3, 5, 6, 7, 4]
    V = circuit_unitary(Circuit(layout(3)).extend([g, g.inverse()]))
    assert np.allclose(V, np.eye(8))


def test_gate_validation():
    with pytest.raises(InvalidInputError):
        SingleQubitGate(0, np.array([[1, 1], [0, 1]]))
    with pytest.raises(InvalidInputError):
        MCX((0, 1), 1)
    with pytest.raises(InvalidInputError):
        RegisterPermutation((0,), (0, 0))
    with pytest.raises(InvalidInputError):
        Circuit(layout(2)).append(SingleQubitGate(2, X))


def test_offset_gate():
    g = MCX((0,), 1, (0,))
    assert offset_gate(g, 2).controls == (2,) and offset_gate(g, 2).target == 3
    c = Circuit(layout(3)).append(offset_gate(RegisterPermutation((0,), (1, 0)), 2))
    assert np.allclose(circuit_unitary(c), np.kron(np.eye(4), X))


@given(st.integers(0, 2**31 - 1))
def test_random_circuit_unitary_and_norm(seed):
    rng = np.random.default_rng(seed)
    n = 4
    gates = []
    for _ in range(8):
        kind = rng.integers(3)
        if kind == 0:
            q, _ = np.linalg.qr(random_complex(rng, (2, 2)))
            gates.append(SingleQubitGate(int(rng.integers(n)), q))
        elif kind == 1:
            qs = rng.permutation(n)
            gates.append(MCX(tuple(int(v) for v in qs[:2]), int(qs[2]), tuple(int(v) for v in rng.integers(0, 2, 2))))
        else:
            q, _ = np.linalg.qr(random_complex(rng, (4, 4)))
            gates.append(RegisterUnitary((2, 3), q, (0,), (int(rng.integers(2)),)))
    c = Circuit(layout(n)).extend(gates)
    U = circuit_unitary(c)
    assert np.max(np.abs(U.conj().T @ U - np.eye(1 << n))) <= 1e-10
    psi = random_complex(rng, 1 << n)
    out = apply_circuit(QuantumState(layout(n), psi / np.linalg.norm(psi)), c)
    assert abs(np.linalg.norm(out.amplitudes) - 1) <= 1e-10
    assert np.allclose(circuit_unitary(c.inverse()) @ U, np.eye(1 << n), atol=1e-10)


def test_apply_circuit_layout_mismatch():
    with pytest.raises(InvalidInputError):
        apply_circuit(basis(2, 0), Circuit(layout(3)))


def test_householder_completion():
    rng = np.random.default_rng(4)
    v = random_complex(rng, 8)
    Q = householder_completion(v)
    assert np.allclose(Q[:, 0], v / np.linalg.norm(v), atol=1e-12)
    assert np.allclose(Q.conj().T @ Q, np.eye(8), atol=1e-12)


def test_prepare_state_examples():
    lay = RegisterLayout(0, 1, 3)
    c = prepare_state(np.eye(8)[0], lay)
    assert np.allclose(apply_circuit(QuantumState.zero(lay), c).amplitudes, QuantumState.zero(lay).amplitudes)
    c = prepare_state([1, 1], layout(1))
    assert np.allclose(apply_circuit(QuantumState.zero(layout(1)), c).amplitudes, [1 / np.sqrt(2)] * 2)
    rng = np.random.default_rng(9)
    v = random_complex(rng, 8)
    out = apply_circuit(QuantumState.zero(lay), prepare_state(v, lay))
    assert np.allclose(out.amplitudes[:8], v / np.linalg.norm(v), atol=1e-12)
    with pytest.raises(InvalidInputError):
        prepare_state(np.zeros(4), lay)
    with pytest.raises(InvalidInputError):
        prepare_state(np.ones(9), lay)


def test_postselect_examples():
    st0, p = postselect(basis(2, 0), (0,), (0,))
    assert p == 1.0 and np.allclose(st0.amplitudes, basis(2, 0).amplitudes)
    bell = QuantumState(layout(2), np.array([1, 0, 0, 1]) / np.sqrt(2))
    st1, p = postselect(bell, (0,), (0,))
    assert p == pytest.approx(0.5) and np.allclose(st1.amplitudes, [1, 0, 0, 0])
    with pytest.raises(PostSelectionError) as err:
        postselect(basis(2, 0), (0,), (1,))
    assert err.value.probability == 0.0


def test_postselect_probability_is_slice_norm():
    rng = np.random.default_rng(12)
    psi = random_complex(rng, 16)
    psi /= np.linalg.norm(psi)
    _, p = postselect(QuantumState(layout(4), psi), (0, 1), (1, 0))
    assert p == float(np.sum(np.abs(psi[8:12]) ** 2))


def test_sample_counts():
    counts = sample_counts(basis(3, 0), 100, seed=1)
    assert counts == {"000": 100}
    plus = QuantumState(layout(1), np.array([1, 1]) / np.sqrt(2))
    c = sample_counts(plus, 100000, seed=2)
    assert sum(c.values()) == 100000
    assert abs(c["0"] - 50000) <= 5 * np.sqrt(100000 * 0.25)
    assert sample_counts(plus, 1000, seed=3) == sample_counts(plus, 1000, seed=3)
    with pytest.raises(InvalidInputError):
        sample_counts(plus, 0, seed=1)


def test_sampling_heat_solution_distribution(heat_A):
    x = np.linalg.solve(heat_A, np.eye(8)[0] * 0.64)
    state = QuantumState(layout(3), x / np.linalg.norm(x))
    counts = sample_counts(state, 100000, seed=5)
    emp = np.array([counts.get(format(i, "03b"), 0) for i in range(8)]) / 100000
    exact = np.abs(x) ** 2 / np.sum(np.abs(x) ** 2)
    assert 0.5 * np.sum(np.abs(emp - exact)) <= 0.02


def test_expectation():
    plus = QuantumState(layout(1), np.array([1, 1]) / np.sqrt(2))
    assert expectation(plus, np.eye(2)) == pytest.approx(1)
    assert expectation(plus, np.diag([1, 0])) == pytest.approx(0.5)
    rng = np.random.default_rng(6)
    M = random_complex(rng, (8, 8))
    M = M + M.conj().T
    psi = random_complex(rng, 8)
    psi /= np.linalg.norm(psi)
    assert abs(expectation(QuantumState(layout(3), psi), M) - psi.conj() @ M @ psi) <= 1e-12
    with pytest.raises(InvalidInputError):
        expectation(plus, np.eye(4))
