"""Channel states, measurement bases, Haar inputs and local noise channels."""

from dataclasses import dataclass

import numpy as np

from .tensor import NORM_TOL, MeasurementBasis

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([I2, X, Y, Z])
PAULI_NAMES = ("I", "X", "Y", "Z")

BELL_LABELS = ("phi+", "phi-", "psi+", "psi-")
_S = 1 / np.sqrt(2)
BELL_VECTORS = np.array(
    [[_S, 0, 0, _S], [_S, 0, 0, -_S], [0, _S, _S, 0], [0, _S, -_S, 0]], dtype=complex
)

NOISE_MODELS = ("bitflip", "phaseflip", "bitphaseflip", "ampdamp", "phasedamp")


def _check_open(name, v):
    if not 0 < v < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {v}")


def gghz_amplitudes(alpha, phi=0.0):
    """Vectorised gGHZ amplitudes, shape (8,) + broadcast shape of inputs."""
    alpha, phi = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(phi, float))
    out = np.zeros((8,) + alpha.shape, dtype=complex)
    out[0] = np.sqrt(alpha)
    out[7] = np.sqrt(1 - alpha) * np.exp(1j * phi)
    return out


def gw_amplitudes(alpha, beta):
    """Vectorised gW amplitudes on |001>, |010>, |100>."""
    alpha, beta = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(beta, float))
    out = np.zeros((8,) + alpha.shape, dtype=complex)
    out[1] = np.sqrt(alpha)
    out[2] = np.sqrt(beta)
    out[4] = np.sqrt(1 - alpha - beta)
    return out


def make_gghz(alpha, phi=0.0):
    """sqrt(a)|000> + sqrt(1-a) e^{i phi} |111>."""
    _check_open("alpha", alpha)
    return gghz_amplitudes(alpha, phi)


def make_gw(alpha, beta):
    """sqrt(a)|001> + sqrt(b)|010> + sqrt(1-a-b)|100>."""
    _check_open("alpha", alpha)
    _check_open("beta", beta)
    if alpha + beta >= 1:
        raise ValueError(f"alpha + beta must be < 1, got {alpha + beta}")
    return gw_amplitudes(alpha, beta)


def bell_basis():
    return MeasurementBasis("bell", BELL_LABELS, BELL_VECTORS.copy())


def computational_basis(k=1):
    labels = tuple(format(i, f"0{k}b") for i in range(2**k))
    return MeasurementBasis("computational", labels, np.eye(2**k, dtype=complex))


def mbasis(x, theta):
    """{|M>, |M_perp>} with |M> = sqrt(x)|0> + e^{i theta} sqrt(1-x)|1>."""
    if not 0 <= x <= 1:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    e = np.exp(1j * theta)
    vecs = np.array(
        [[np.sqrt(x), e * np.sqrt(1 - x)], [np.sqrt(1 - x), -e * np.sqrt(x)]], dtype=complex
    )
    return MeasurementBasis(f"mbasis({x:g},{theta:g})", ("M", "Mperp"), vecs)


@dataclass(frozen=True)
class NoiseChannel:
    name: str
    p: float
    kraus: tuple

    def completeness_error(self):
        s = sum(k.conj().T @ k for k in self.kraus)
        return float(np.abs(s - I2).max())

    def apply(self, rho):
        return sum(k @ rho @ k.conj().T for k in self.kraus)


def make_noise(name, p):
    """Single-qubit noise channel.

    Flip channels keep the state with probability ``p`` and flip it with
    probability ``1 - p``.  Damping channels damp with strength ``p``.
    """
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    sp, sq = np.sqrt(p), np.sqrt(1 - p)
    if name == "bitflip":
        kraus = (sp * I2, sq * X)
    elif name == "phaseflip":
        kraus = (sp * I2, sq * Z)
    elif name == "bitphaseflip":
        kraus = (sp * I2, sq * Y)
    elif name == "ampdamp":
        kraus = (np.array([[1, 0], [0, sq]], dtype=complex), np.array([[0, sp], [0, 0]], dtype=complex))
    elif name == "phasedamp":
        kraus = (
            sq * I2,
            np.array([[sp, 0], [0, 0]], dtype=complex),
            np.array([[0, 0], [0, sp]], dtype=complex),
        )
    else:
        raise ValueError(f"unknown noise model {name!r}; choose from {NOISE_MODELS}")
    ch = NoiseChannel(name, float(p), kraus)
    if ch.completeness_error() > NORM_TOL:
        raise ValueError(f"{name} Kraus set is not complete")
    return ch


def identity_channel():
    return NoiseChannel("none", 1.0, (I2.copy(),))


def make_rng(seed, *key):
    """Counter-based generator for ``seed``; ``key`` derives independent streams."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def haar_qubits(rng, n):
    """``n`` Haar-random qubit states as an (n, 2) array."""
    g = rng.standard_normal((n, 4))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g[:, 0::2] + 1j * g[:, 1::2]


def haar_qubit(rng):
    return haar_qubits(rng, 1)[0]
