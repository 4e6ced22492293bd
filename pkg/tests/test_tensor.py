import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrepeater.states import BELL_VECTORS, I2, X, Z, bell_basis, computational_basis
from qrepeater.tensor import (
    apply_on_qubits,
    density,
    is_unitary,
    kron,
    measure,
    num_qubits,
    partial_trace,
    validate_density,
)


def rand_state(rng, n):
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return v / np.linalg.norm(v)


def test_num_qubits():
    assert num_qubits(8) == 3
    with pytest.raises(ValueError):
        num_qubits(6)


def test_kron_hand_expansion():
    a = np.array([[1, 2], [3, 4]])
    b = np.array([[0, 5], [6, 7]])
    expected = np.array([[0, 5, 0, 10], [6, 7, 12, 14], [0, 15, 0, 20], [18, 21, 24, 28]])
    assert np.array_equal(kron(a, b), expected)


def test_apply_matches_full_kron():
    rng = np.random.default_rng(0)
    psi = rand_state(rng, 3)
    # X on qubit 0, Z on qubit 2
    full = kron(X, I2, Z) @ psi
    out = apply_on_qubits(apply_on_qubits(psi, X, [0]), Z, [2])
    assert np.allclose(out, full)


def test_apply_two_qubit_reversed_targets():
    rng = np.random.default_rng(1)
    psi = rand_state(rng, 3)
    cnot = np.eye(4)[[0, 1, 3, 2]]
    # control qubit 2, target qubit 0, built by hand on basis states
    full = np.zeros((8, 8))
    for i in range(8):
        b = [(i >> 2) & 1, (i >> 1) & 1, i & 1]
        if b[2]:
            b[0] ^= 1
        full[b[0] * 4 + b[1] * 2 + b[2], i] = 1
    assert np.allclose(apply_on_qubits(psi, cnot, [2, 0]), full @ psi)


def test_apply_on_density_matches_vector():
    rng = np.random.default_rng(2)
    psi = rand_state(rng, 3)
    u = kron(X, Z)
    rho = apply_on_qubits(density(psi), u, [1, 2])
    assert np.allclose(rho, density(apply_on_qubits(psi, u, [1, 2])))


def test_apply_rejects_bad_targets():
    psi = np.zeros(4)
    psi[0] = 1
    with pytest.raises(ValueError):
        apply_on_qubits(psi, kron(X, X), [0, 0])
    with pytest.raises(ValueError):
        apply_on_qubits(psi, X, [0, 1])
    with pytest.raises(ValueError):
        apply_on_qubits(psi, X, [5])


def test_partial_trace_of_product():
    rng = np.random.default_rng(3)
    a, b, c = (rand_state(rng, 1) for _ in range(3))
    rho = density(kron(a, b, c))
    assert np.allclose(partial_trace(rho, [2, 0]), density(kron(c, a)))
    assert np.allclose(partial_trace(rho, [1]), density(b))


def test_partial_trace_bell_is_mixed():
    rho = density(BELL_VECTORS[0])
    assert np.allclose(partial_trace(rho, [0]), I2 / 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_partial_trace_keeps_trace(seed):
    rng = np.random.default_rng(seed)
    rho = density(rand_state(rng, 3))
    red = partial_trace(rho, [1, 2])
    validate_density(red)


def test_validate_density_rejects():
    with pytest.raises(ValueError):
        validate_density(np.diag([1.5, -0.5]))
    with pytest.raises(ValueError):
        validate_density(np.array([[0.5, 1], [0, 0.5]]))


def test_measure_probabilities_sum():
    rng = np.random.default_rng(4)
    psi = rand_state(rng, 3)
    br = measure(psi, bell_basis(), [0, 2])
    assert abs(sum(b.probability for b in br) - 1) < 1e-12
    br = measure(psi, computational_basis(1), [1], normalize=True)
    for b in br:
        assert abs(np.linalg.norm(b.post_state) - 1) < 1e-12


def test_measure_bell_state():
    br = measure(BELL_VECTORS[2], bell_basis(), [0, 1])
    assert [round(b.probability, 12) for b in br] == [0, 0, 1, 0]


def test_bell_vectors_orthonormal():
    assert np.allclose(BELL_VECTORS @ BELL_VECTORS.conj().T, np.eye(4))
    assert is_unitary(BELL_VECTORS)
