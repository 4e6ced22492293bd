"""Dense linear algebra on a handful of qubits.

A pure state on n qubits is a complex vector of length 2**n and a mixed
state is a 2**n x 2**n density matrix.  Qubit 0 is the leftmost ket label,
so |q0 q1 ... q_{n-1}> has q0 as the most significant bit.

The ``*_tensor`` helpers work on arrays whose first n axes are qubit axes of
size 2 followed by any number of trailing axes (input column, batch, ...).
The protocol engine uses them to push whole parameter batches through one
pass.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

STRUCT_TOL = 1e-10
NORM_TOL = 1e-12
FORMULA_TOL = 1e-9


def num_qubits(dim):
    """Number of qubits for a Hilbert space of dimension ``dim``."""
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def kron(*ops):
    """Kronecker product of the arguments, left to right."""
    if not ops:
        raise ValueError("kron needs at least one operand")
    return reduce(np.kron, [np.asarray(op, dtype=complex) for op in ops])


def is_unitary(op, tol=STRUCT_TOL):
    op = np.asarray(op)
    return np.allclose(op.conj().T @ op, np.eye(op.shape[0]), atol=tol)


def is_hermitian(op, tol=STRUCT_TOL):
    op = np.asarray(op)
    return np.allclose(op, op.conj().T, atol=tol)


def is_normalized(psi, tol=NORM_TOL):
    return abs(np.vdot(psi, psi).real - 1.0) <= tol


def validate_density(rho, tol=STRUCT_TOL):
    """Raise ValueError unless ``rho`` is Hermitian, unit-trace and PSD."""
    rho = np.asarray(rho)
    if not is_hermitian(rho, tol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError("density matrix trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def density(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def _check_targets(targets, n):
    targets = list(targets)
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate target index in {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise ValueError(f"qubit index {t} out of range for {n} qubits")
    return targets


def apply_tensor(tensor, op, targets):
    """Apply ``op`` on qubit axes ``targets`` of a qubit-first tensor."""
    k = len(targets)
    op_t = np.asarray(op).reshape([2] * (2 * k))
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), list(targets)))
    return np.moveaxis(out, list(range(k)), list(targets))


def project_tensor(tensor, vec, targets):
    """Contract ``<vec|`` into qubit axes ``targets``; those axes disappear."""
    k = len(targets)
    bra = np.asarray(vec).conj().reshape([2] * k)
    return np.tensordot(bra, tensor, axes=(list(range(k)), list(targets)))


def apply_on_qubits(state, op, targets):
    """Apply ``op`` to the listed qubits of a pure or mixed state.

    The first target is the most significant qubit of ``op``.
    """
    state = np.asarray(state, dtype=complex)
    op = np.asarray(op, dtype=complex)
    n = num_qubits(state.shape[0])
    targets = _check_targets(targets, n)
    if op.shape != (2 ** len(targets),) * 2:
        raise ValueError(f"operator shape {op.shape} does not fit {len(targets)} targets")
    if state.ndim == 1:
        t = apply_tensor(state.reshape([2] * n), op, targets)
        return t.reshape(-1)
    if state.ndim == 2 and state.shape[0] == state.shape[1]:
        # rows first, then columns through the adjoint
        t = apply_tensor(state.reshape([2] * n + [-1]), op, targets).reshape(state.shape)
        t = apply_tensor(t.conj().T.reshape([2] * n + [-1]), op, targets).reshape(state.shape)
        return t.conj().T
    raise ValueError("state must be a vector or a square matrix")


def partial_trace(rho, keep):
    """Reduced density matrix on the qubits in ``keep`` (in that order)."""
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits(rho.shape[0])
    keep = _check_targets(keep, n)
    traced = [q for q in range(n) if q not in keep]
    t = rho.reshape([2] * (2 * n))
    # trace the highest index first so remaining axis numbers stay valid
    for q in sorted(traced, reverse=True):
        m = t.ndim // 2
        t = np.trace(t, axis1=q, axis2=q + m)
    # remaining axes follow sorted(keep); reorder to the requested order
    order = np.argsort(np.argsort(keep))
    m = len(keep)
    t = np.transpose(t, list(order) + [m + i for i in order])
    return t.reshape(2**m, 2**m)


@dataclass(frozen=True)
class MeasurementBasis:
    """Orthonormal basis on k qubits; row i of ``vectors`` is element i."""

    name: str
    labels: tuple
    vectors: np.ndarray

    @property
    def num_qubits(self):
        return num_qubits(self.vectors.shape[1])

    def check(self, tol=STRUCT_TOL):
        v = self.vectors
        if v.shape[0] != v.shape[1] or len(self.labels) != v.shape[0]:
            raise ValueError(f"basis {self.name} is not complete")
        if not np.allclose(v.conj() @ v.T, np.eye(v.shape[0]), atol=tol):
            raise ValueError(f"basis {self.name} is not orthonormal")
        return self


@dataclass(frozen=True)
class MeasurementBranch:
    """One outcome of a projective measurement.

    ``post_state`` is the projected residual on the unmeasured qubits.  It is
    left unnormalized (its squared norm is ``probability``) unless
    ``normalized`` is set.
    """

    label: str
    probability: float
    post_state: np.ndarray
    normalized: bool = False


def measure(state, basis, targets, normalize=False):
    """Branch a pure state on a projective measurement of ``targets``."""
    state = np.asarray(state, dtype=complex)
    n = num_qubits(state.shape[0])
    targets = _check_targets(targets, n)
    basis.check()
    if basis.num_qubits != len(targets):
        raise ValueError("basis size does not match the number of targets")
    t = state.reshape([2] * n)
    out = []
    for label, vec in zip(basis.labels, basis.vectors):
        post = project_tensor(t, vec, targets).reshape(-1)
        prob = float(np.vdot(post, post).real)
        if normalize and prob > 0:
            post = post / np.sqrt(prob)
        out.append(MeasurementBranch(label, prob, post, normalize and prob > 0))
    return out
