import numpy as np
import pytest

from qrepeater import analytics as an
from qrepeater import multiblock as mb
from qrepeater import protocol as pr


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_gghz_chain(m):
    for a in (0.2, 0.5, 0.7):
        f = mb.chain_fidelity(mb.BlockChain(m, pr.ProtocolSpec("gghz", a)))
        assert abs(f - (2 / 3 + 4**m / 3 * (a * (1 - a)) ** m)) < 1e-12


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_gw_chain(m):
    a, b = 0.3, 0.2
    c = 1 - a - b
    f = mb.chain_fidelity(mb.BlockChain(m, pr.ProtocolSpec("gw", a, b)))
    assert abs(f - 2 / 3 * (1 + 2 ** (m - 1) * ((2 * a + b) * c) ** m)) < 1e-12


def test_gw_single_chain_simulated():
    a, b = 0.3, 0.2
    for m in (1, 2, 3):
        f = mb.chain_fidelity(mb.BlockChain(m, pr.ProtocolSpec("gw", a, b, mode="single")))
        assert abs(f - (2 / 3 + 4**m / 3 * (b * (1 - a - b)) ** m)) < 1e-12


def test_compression_matches_plain_composition():
    spec = pr.ProtocolSpec("gw", 0.25, 0.4, noise="ampdamp", p=0.2)
    chain = mb.BlockChain(3, spec)
    assert abs(mb.chain_fidelity(chain) - mb.chain_fidelity(chain, compress=False)) < 1e-12


def test_compress_kraus_preserves_channel():
    ops = pr.operators(pr.ProtocolSpec("gghz", 0.3, noise="phasedamp", p=0.4))
    small = mb.compress_kraus(ops)
    assert len(small) <= 4
    rho = np.array([[0.6, 0.2 - 0.1j], [0.2 + 0.1j, 0.4]])
    out = lambda ks: sum(k @ rho @ k.conj().T for k in ks)  # noqa: E731
    assert np.allclose(out(ops), out(small))


def test_chain_of_one_is_block():
    spec = pr.ProtocolSpec("gw", 0.1, 0.6, mode="single", noise="bitflip", p=0.7)
    assert abs(mb.chain_fidelity(mb.BlockChain(1, spec)) - an.fidelity(spec)) < 1e-12


def test_blockchain_validation():
    with pytest.raises(ValueError):
        mb.BlockChain(0, pr.ProtocolSpec("gghz", 0.3))
    with pytest.raises(KeyError):
        mb.multiblock_closed_form("gw_tdtc", 2, alpha=0.3, beta=0.2)


def test_gghz_single_blocks_identity():
    for m in range(1, 6):
        for a in (0.1, 0.45):
            assert mb.multiblock_closed_form("gghz_blocks", m, alpha=a) == mb.multiblock_closed_form(
                "gghz_single_blocks", m, alpha=a
            )


@pytest.mark.parametrize("a1", [0.1, 0.5, 0.8])
@pytest.mark.parametrize("a2", [0.2, 0.5, 0.9])
def test_heterogeneous_chain(a1, a2):
    ref = 2 / 3 + 4 / 3 * np.sqrt(a1 * a2 * (1 - a1) * (1 - a2))
    assert abs(mb.heterogeneous_chain_simulated(a1, a2) - ref) < 1e-12
    assert abs(mb.heterogeneous_chain(a1, a2) - ref) < 1e-15


def test_heterogeneous_equal_links():
    assert abs(mb.heterogeneous_chain_simulated(0.5, 0.5) - 1) < 1e-12
