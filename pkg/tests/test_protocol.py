from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrepeater import protocol as pr
from qrepeater.analytics import fidelity
from qrepeater.states import BELL_LABELS, NOISE_MODELS, make_rng
from qrepeater.tensor import apply_on_qubits, kron, measure
from qrepeater.states import BELL_VECTORS, PAULIS, bell_basis, make_gghz


def f_gghz(a):
    return 2 / 3 + 4 / 3 * a * (1 - a)


def f_gw_tdtc(a, b):
    return 2 / 3 + 2 / 3 * (2 * a + b) * (1 - a - b)


def brute_tdtc(psi, alpha):
    """Step-by-step gGHZ TD-TC on an explicit 7-qubit vector, all branches.

    Qubits: 0 input, 1-3 copy one (A, C1, C2), 4-6 copy two (B, C1', C2').
    Returns the summed output fidelity |<psi|out>|^2 over branches.
    """
    s = make_gghz(alpha)
    state = kron(psi, s, s)
    table = pr.derive_bob_corrections("gghz", alpha)
    total = 0.0
    for ba in measure(state, bell_basis(), [0, 1]):
        st5 = ba.post_state
        # remaining qubits: C1, C2, B, C1', C2'
        st5 = apply_on_qubits(st5, pr.GGHZ_CLAIRE[ba.label], [0, 1])
        for b1 in measure(st5, bell_basis(), [0, 3]):
            for b2 in measure(b1.post_state, bell_basis(), [0, 2]):
                out = b2.post_state
                pauli = PAULIS["IXYZ".index(table[(ba.label, b1.label, b2.label)])]
                out = pauli @ out
                total += abs(np.vdot(psi, out)) ** 2
    return total


def test_brute_force_matches_engine():
    rng = make_rng(1)
    for alpha in (0.2, 0.5, 0.8):
        psi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        psi /= np.linalg.norm(psi)
        ops = pr.operators(pr.ProtocolSpec("gghz", alpha))
        engine = sum(abs(np.vdot(psi, k @ psi)) ** 2 for k in ops)
        assert abs(brute_tdtc(psi, alpha) - engine) < 1e-12


@pytest.mark.parametrize("alpha", np.arange(1, 10) / 10)
def test_gghz_tdtc(alpha):
    assert abs(fidelity(pr.ProtocolSpec("gghz", alpha)) - f_gghz(alpha)) < 1e-12


@pytest.mark.parametrize("a,b", [(0.1, 0.2), (0.3, 0.3), (0.6, 0.1), (0.05, 0.9)])
def test_gw_tdtc(a, b):
    assert abs(fidelity(pr.ProtocolSpec("gw", a, b)) - f_gw_tdtc(a, b)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0, 2 * np.pi))
def test_phase_dependence_and_absorption(a, phi):
    f = fidelity(pr.ProtocolSpec("gghz", a, phi=phi))
    assert abs(f - (2 / 3 + 4 / 3 * a * (1 - a) * np.cos(phi) ** 2)) < 1e-12
    g = fidelity(pr.ProtocolSpec("gghz", a, phi=phi, phase_absorption=True))
    assert abs(g - f_gghz(a)) < 1e-12


def test_ghz_every_branch_perfect():
    for br in pr.run_tdtc(pr.ProtocolSpec("gghz", 0.5)):
        if br.probability > 1e-12:
            k = br.k / np.sqrt(br.probability)
            # proportional to the identity up to a phase
            assert abs(abs(np.trace(k)) - 2) < 1e-12


def test_gghz_derived_table_alpha_independent():
    ref = pr.derive_bob_corrections("gghz", 0.3)
    for a in (0.1, 0.5, 0.77):
        assert pr.derive_bob_corrections("gghz", a) == ref


def test_gw_table_agrees_with_derived_on_occurring_branches():
    branches = pr.run_tdtc(pr.ProtocolSpec("gw", 0.3, 0.2))
    prob = {b.outcomes: b.probability for b in branches}
    derived = pr.derive_bob_corrections("gw", 0.3, 0.2)
    for key, name in pr.GW_BOB.items():
        if prob[key] > 1e-12:
            assert derived[key] == name, key


def test_gw_branch_operators_diagonal():
    for br in pr.run_tdtc(pr.ProtocolSpec("gw", 0.2, 0.5)):
        assert abs(br.k[0, 1]) + abs(br.k[1, 0]) < 1e-12


def test_gw_branch_values_at_points():
    # inline reference for 8 |<psi|K|psi>|^2, Alice phi class, input |0>
    a, b = 0.2, 0.5
    c = 1 - a - b
    br = {x.outcomes: x for x in pr.run_tdtc(pr.ProtocolSpec("gw", a, b))}
    e0 = np.array([1, 0])
    val = lambda key: 8 * abs(br[key].k[0, 0]) ** 2  # noqa: E731
    assert np.isclose(val(("phi+", "phi+", "phi+")), (a + b) ** 2)
    assert np.isclose(val(("phi+", "phi+", "phi-")), (a - b) ** 2)
    assert np.isclose(val(("phi+", "psi+", "psi+")), 4 * a * b)
    assert np.isclose(val(("phi+", "phi+", "psi+")), a * c)
    assert np.isclose(val(("phi+", "psi+", "phi-")), b * c)
    assert np.isclose(val(("phi+", "psi+", "psi-")), 0)
    assert np.isclose(val(("psi-", "phi-", "phi-")), c**2)
    assert e0 @ e0 == 1


def test_probabilities_sum_to_one():
    for spec in (pr.ProtocolSpec("gghz", 0.3, noise="ampdamp", p=0.4),
                 pr.ProtocolSpec("gw", 0.3, 0.2, mode="single", noise="bitflip", p=0.6)):
        assert abs(sum(b.probability for b in pr.run(spec)) - 1) < 1e-12


@pytest.mark.parametrize("noise", NOISE_MODELS)
@pytest.mark.parametrize("mode", pr.MODES)
@pytest.mark.parametrize("family", pr.FAMILIES)
def test_completeness(family, mode, noise):
    spec = pr.ProtocolSpec(family, 0.3, 0.2 if family == "gw" else None, mode=mode, noise=noise, p=0.35, p2=0.8)
    assert pr.completeness_error(pr.operators(spec)) < 1e-12


@pytest.mark.parametrize("policy", ["bitflip", "bitphaseflip"])
@pytest.mark.parametrize("a,p", [(0.2, 0.1), (0.5, 0.5), (0.8, 0.9), (0.35, 0.0)])
def test_rectification_restores_noiseless(policy, a, p):
    f = fidelity(pr.ProtocolSpec("gghz", a, noise=policy, p=p, correction_policy=policy))
    assert abs(f - f_gghz(a)) < 1e-12


def test_rectifier_needed():
    # without the rectifier a bit flip spoils the opposite-class branches
    f = fidelity(pr.ProtocolSpec("gghz", 0.4, noise="bitflip", p=0.5))
    assert f < f_gghz(0.4) - 0.05


def test_rectification_tables():
    bf = pr.rectification_table("bitflip")
    bpf = pr.rectification_table("bitphaseflip")
    assert len(bf) == 8 and set(bf) == set(bpf)
    mult = {("I", "Z"): "Z", ("Z", "Z"): "I", ("X", "Z"): "Y", ("Y", "Z"): "X"}
    for key in bf:
        assert bpf[key] == mult[(bf[key], "Z")]
    with pytest.raises(ValueError):
        pr.rectification_table("ampdamp")


def test_detect_noise_class():
    det = lambda **kw: pr.detect_noise_class(pr.run_tdtc(pr.ProtocolSpec("gghz", 0.3, **kw)))  # noqa: E731
    assert det() == "SameBellClass"
    assert det(noise="phaseflip", p=0.2) == "SameBellClass"
    assert det(noise="phasedamp", p=0.2) == "SameBellClass"
    # one certain flip on C1's first qubit, none on the second
    assert det(noise="bitflip", p=0.0, p2=1.0) == "OppositeBellClass"
    assert det(noise="bitflip", p=0.0) == "SameBellClass"
    assert det(noise="bitflip", p=0.5) == "Mixed"
    assert det(noise="ampdamp", p=0.3) == "Mixed"


def test_single_path_gghz():
    for a in (0.1, 0.4, 0.9):
        assert abs(fidelity(pr.ProtocolSpec("gghz", a, mode="single")) - f_gghz(a)) < 1e-12


def test_single_path_gw_and_mixed():
    for a, b in ((0.1, 0.2), (1 / 3, 1 / 3), (0.5, 0.25)):
        c = 1 - a - b
        assert abs(fidelity(pr.ProtocolSpec("gw", a, b, mode="single")) - (2 / 3 + 4 / 3 * b * c)) < 1e-12
        mixed = pr.run_single_path_mixed(pr.ProtocolSpec("gw", a, b, mode="mixed"))
        assert abs(mixed - (2 / 3 + 2 / 3 * (2 * b * c - a * (1 - a)))) < 1e-12


def test_gghz_mixed_is_classical():
    assert abs(pr.run_single_path_mixed(pr.ProtocolSpec("gghz", 0.3, mode="mixed")) - 2 / 3) < 1e-12


def test_noise_stage():
    # Pauli and dephasing noise commute through the Claire unitaries up to
    # relabelling; amplitude damping does not
    for noise in ("bitflip", "phaseflip", "phasedamp"):
        kw = dict(noise=noise, p=0.3, correction_policy="bitflip")
        pre = fidelity(pr.ProtocolSpec("gghz", 0.3, **kw))
        post = fidelity(pr.ProtocolSpec("gghz", 0.3, noise_stage="post", **kw))
        assert abs(pre - post) < 1e-12
    pre = fidelity(pr.ProtocolSpec("gghz", 0.3, noise="ampdamp", p=0.3))
    post = fidelity(pr.ProtocolSpec("gghz", 0.3, noise="ampdamp", p=0.3, noise_stage="post"))
    assert abs(pre - post) > 1e-3


def test_independent_p_defaults_equal():
    a = fidelity(pr.ProtocolSpec("gw", 0.3, 0.2, noise="ampdamp", p=0.4))
    b = fidelity(pr.ProtocolSpec("gw", 0.3, 0.2, noise="ampdamp", p=0.4, p2=0.4))
    c = fidelity(pr.ProtocolSpec("gw", 0.3, 0.2, noise="ampdamp", p=0.4, p2=0.1))
    assert a == b and a != c


def test_spec_validation():
    with pytest.raises(ValueError):
        pr.ProtocolSpec("gw", 0.3)
    with pytest.raises(ValueError):
        pr.ProtocolSpec("gw", 0.3, 0.2, correction_policy="bitflip")
    with pytest.raises(ValueError):
        pr.ProtocolSpec("gghz", 0.3, noise="depolarizing")
    with pytest.raises(ValueError):
        pr.ProtocolSpec("gghz", 0.3, mode="three-path")
    with pytest.raises(ValueError):
        pr.ProtocolSpec("gghz", 0.3, noise="bitflip", p=1.5)


def test_batch_matches_scalar():
    a = np.array([0.1, 0.3, 0.6])
    b = np.array([0.2, 0.3, 0.1])
    for mode in ("tdtc", "single"):
        spec = pr.ProtocolSpec("gw", 0.3, 0.2, mode=mode, noise="phasedamp", p=0.3)
        batch = pr.ops_fidelity(pr.operators(spec, a, b))
        for i in range(3):
            s = pr.ProtocolSpec("gw", a[i], b[i], mode=mode, noise="phasedamp", p=0.3)
            assert abs(batch[i] - fidelity(s)) < 1e-12


def test_branch_labels():
    br = pr.run_tdtc(pr.ProtocolSpec("gghz", 0.3))
    assert len(br) == 64
    assert {b.outcomes for b in br} == set(product(BELL_LABELS, repeat=3))
    assert BELL_VECTORS.shape == (4, 4)
