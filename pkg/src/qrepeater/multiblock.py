"""Chains of repeater blocks and the two-chain heterogeneous link."""

from dataclasses import dataclass

import numpy as np

from .analytics import closed_form
from .protocol import ProtocolSpec, completeness_error, operators, ops_fidelity, two_hop_operators
from .states import I2

PRUNE_TOL = 1e-14


@dataclass(frozen=True)
class BlockChain:
    m: int
    spec: ProtocolSpec

    def __post_init__(self):
        if int(self.m) < 1:
            raise ValueError("a chain needs at least one block")


def compress_kraus(ops, tol=PRUNE_TOL):
    """Canonical Kraus family of the same channel (at most four operators).

    Uses the eigendecomposition of the Choi-type matrix sum_i |K_i>><<K_i|;
    any isometric recombination leaves the channel, hence the fidelity,
    unchanged.
    """
    vecs = ops.reshape(len(ops), 4)
    choi = vecs.T @ vecs.conj()
    lam, v = np.linalg.eigh(choi)
    keep = lam > tol
    return (v[:, keep] * np.sqrt(lam[keep])).T.reshape(-1, 2, 2)


def prune(ops, tol=PRUNE_TOL):
    norms = np.linalg.norm(ops.reshape(len(ops), -1), axis=1)
    return ops[norms >= tol]


def compose_blocks(chain, compress=True):
    """End-to-end Kraus family of ``chain.m`` identical blocks in series."""
    block = prune(operators(chain.spec))
    if compress:
        block = compress_kraus(block)
    total = block
    for _ in range(int(chain.m) - 1):
        total = np.einsum("iab,jbc->ijac", block, total).reshape(-1, 2, 2)
        total = compress_kraus(total) if compress else prune(total)
    err = completeness_error(total)
    if err > 1e-9:
        raise RuntimeError(f"composed Kraus family is incomplete (error {err:.3g})")
    return total


def chain_fidelity(chain, compress=True):
    return float(ops_fidelity(compose_blocks(chain, compress)))


def multiblock_closed_form(formula_id, m, **params):
    """m-block closed forms: gghz_blocks, gghz_single_blocks, gw_blocks, gw_single_blocks."""
    if formula_id not in ("gghz_blocks", "gghz_single_blocks", "gw_blocks", "gw_single_blocks"):
        raise KeyError(f"{formula_id!r} is not a multi-block formula")
    return closed_form(formula_id, m=m, **params)


def _schmidt_chain(alpha):
    """sqrt(a)|00> + sqrt(1-a)|11> as a (1, 2, 2) component stack."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return np.array([[[np.sqrt(alpha), 0], [0, np.sqrt(1 - alpha)]]], dtype=complex)


def heterogeneous_chain(alpha1, alpha2):
    """Fidelity of two Schmidt-form links A-C1 and C1-B in series."""
    return closed_form("hetero_chain", alpha1=alpha1, alpha2=alpha2)


def heterogeneous_chain_simulated(alpha1, alpha2):
    """Same quantity by explicit two-hop teleportation with Pauli corrections."""
    chi1 = _schmidt_chain(alpha1)
    # second link is written (C1, B); the hop routine expects (B, C1)
    chi2 = np.swapaxes(_schmidt_chain(alpha2), 1, 2)
    ops = two_hop_operators(chi1, chi2, I2[None], I2[None], substitute=False)
    return float(ops_fidelity(ops.reshape(-1, 2, 2)))
