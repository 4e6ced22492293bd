"""Protocol engine: multipath TD-TC, measured single path and the mixed variant.

Every run reduces to a family of 2x2 operators K on the input qubit, one per
chain of measurement outcomes (and per noise Kraus element).  The unnormalized
state Bob holds on a branch is K (a, b)^T.

Internally the engine works on stacked arrays of shape (..., 2, 2, *batch)
where the batch axes let a whole grid of channel parameters go through a
single pass.  The public ``run_*`` functions wrap the scalar case into
:class:`BranchOperator` lists.

Qubit layout for TD-TC: 0 = input (A'), copy one on (A, C1, C2), copy two on
(B, C1', C2').  Channel states are written with the sender's qubit first.
"""

from dataclasses import dataclass
from itertools import product

import numpy as np

from .states import (
    BELL_LABELS,
    BELL_VECTORS,
    I2,
    NOISE_MODELS,
    PAULI_NAMES,
    PAULIS,
    X,
    Y,
    Z,
    gghz_amplitudes,
    gw_amplitudes,
    make_gghz,
    make_gw,
    make_noise,
    mbasis,
)
from .tensor import STRUCT_TOL, kron, project_tensor

FAMILIES = ("gghz", "gw")
MODES = ("tdtc", "single", "mixed")
POLICIES = ("noiseless", "bitflip", "bitphaseflip")
STAGES = ("pre", "post")

_BELL_BRA = BELL_VECTORS.conj().reshape(4, 2, 2)
_PIDX = {n: i for i, n in enumerate(PAULI_NAMES)}
_BIDX = {n: i for i, n in enumerate(BELL_LABELS)}

# Claires' joint unitaries on (C1, C2), keyed by Alice's outcome
GGHZ_CLAIRE = {
    "phi+": kron(I2, I2),
    "phi-": kron(I2, Z),
    "psi+": kron(X, X),
    "psi-": kron(X, Y),
}
GW_CLAIRE = {
    "phi+": kron(I2, I2),
    "phi-": kron(Z, Z),
    "psi+": kron(I2, I2),
    "psi-": kron(Z, Z),
}

# Bob's gW unitaries keyed by (C1, C2); one table per Alice Bell class.
_GW_BOB_PHI = {
    ("phi+", "phi+"): "I", ("phi+", "phi-"): "Z", ("phi+", "psi+"): "X", ("phi+", "psi-"): "Y",
    ("phi-", "phi+"): "I", ("phi-", "phi-"): "Z", ("phi-", "psi+"): "X", ("phi-", "psi-"): "Y",
    ("psi+", "phi+"): "X", ("psi+", "phi-"): "X", ("psi+", "psi+"): "I", ("psi+", "psi-"): "I",
    ("psi-", "phi+"): "Y", ("psi-", "phi-"): "Y", ("psi-", "psi+"): "I", ("psi-", "psi-"): "I",
}
_GW_BOB_PSI = {
    ("phi+", "phi+"): "X", ("phi+", "phi-"): "Y", ("phi+", "psi+"): "I", ("phi+", "psi-"): "Z",
    ("phi-", "phi+"): "X", ("phi-", "phi-"): "Y", ("phi-", "psi+"): "I", ("phi-", "psi-"): "Z",
    ("psi+", "phi+"): "I", ("psi+", "phi-"): "I", ("psi+", "psi+"): "X", ("psi+", "psi-"): "X",
    ("psi-", "phi+"): "Z", ("psi-", "phi-"): "Z", ("psi-", "psi+"): "X", ("psi-", "psi-"): "X",
}
GW_BOB = {
    (a, c1, c2): (_GW_BOB_PHI if a.startswith("phi") else _GW_BOB_PSI)[(c1, c2)]
    for a, c1, c2 in product(BELL_LABELS, repeat=3)
}

# Opposite-class outcome pairs (C1, C2) -> Pauli that undoes a single flip
_RECTIFY = {
    ("psi+", "phi+"): "I", ("psi-", "phi-"): "I",
    ("psi-", "phi+"): "Z", ("psi+", "phi-"): "Z",
    ("phi+", "psi+"): "X", ("phi-", "psi-"): "X",
    ("phi-", "psi+"): "Y", ("phi+", "psi-"): "Y",
}


def bell_class(label):
    return label[:3]


@dataclass(frozen=True)
class BranchOperator:
    """End-to-end operator for one outcome chain.

    ``outcomes`` lists the measurement labels in protocol order: (Alice, C1,
    C2) for TD-TC, (C2 on copy one, C2 on copy two, hop-one sender, hop-two
    sender) for the single-path modes.  ``noise`` holds the Kraus indices of
    the two noise channels on C1's qubits.
    """

    outcomes: tuple
    noise: tuple
    k: np.ndarray

    @property
    def probability(self):
        """Branch weight averaged over input states."""
        return float(np.vdot(self.k, self.k).real / 2)


@dataclass(frozen=True)
class ProtocolSpec:
    family: str
    alpha: float
    beta: float = None
    phi: float = 0.0
    mode: str = "tdtc"
    noise: str = None
    p: float = 0.0
    p2: float = None
    correction_policy: str = "noiseless"
    basis: tuple = None
    phase_absorption: bool = False
    noise_stage: str = "pre"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.correction_policy not in POLICIES:
            raise ValueError(f"correction policy must be one of {POLICIES}")
        if self.noise_stage not in STAGES:
            raise ValueError(f"noise stage must be one of {STAGES}")
        if self.noise is not None and self.noise not in NOISE_MODELS:
            raise ValueError(f"noise must be one of {NOISE_MODELS} or None")
        if self.family == "gw" and self.correction_policy != "noiseless":
            raise ValueError("rectification tables exist for gGHZ only")
        for v in (self.p, self.p if self.p2 is None else self.p2):
            if not 0 <= v <= 1:
                raise ValueError(f"p must lie in [0, 1], got {v}")
        if self.basis is not None and not 0 <= self.basis[0] <= 1:
            raise ValueError("basis x must lie in [0, 1]")
        # constructors validate the channel parameters
        self.state()

    def state(self):
        if self.family == "gghz":
            return make_gghz(self.alpha, self.phi)
        if self.beta is None:
            raise ValueError("gW needs beta")
        return make_gw(self.alpha, self.beta)

    def c2_basis(self):
        if self.basis is not None:
            return tuple(self.basis)
        return (0.5, 0.0) if self.family == "gghz" else (1.0, 0.0)

    def noise_channels(self):
        if self.noise is None:
            return None
        p2 = self.p if self.p2 is None else self.p2
        return make_noise(self.noise, self.p), make_noise(self.noise, p2)


# ---------------------------------------------------------------- helpers


def _kraus_stack(ch):
    if ch is None:
        return I2[None]
    return np.stack(ch.kraus)


def _channel_amplitudes(family, alpha, beta, phi, phase_absorption):
    if family == "gghz":
        s = gghz_amplitudes(alpha, phi)
        if phase_absorption:
            # local rotation diag(1, e^{-i phi}) on the first qubit of each copy
            s[4:] = s[4:] * np.exp(-1j * np.asarray(phi, float))
        return s
    return gw_amplitudes(alpha, beta)


def _pauli_stack(table):
    """Pauli matrices for an integer index table, indices first then (2, 2)."""
    return PAULIS[np.asarray(table)]


def _best_pauli(k, nlead=1, joint=False):
    """Pauli index maximising each branch fidelity.

    ``k`` has ``nlead`` outcome axes, then (2, 2), then batch axes.  With
    ``joint`` the first outcome axis is summed before choosing, so one Pauli
    serves every component along it.  Ties resolve to the lowest index.
    """
    km = np.moveaxis(k, (nlead, nlead + 1), (-2, -1))
    tr2 = np.abs(np.einsum("Pab,...ba->P...", PAULIS, km)) ** 2
    if joint:
        tr2 = tr2.sum(axis=1, keepdims=True)
    idx = np.argmax(np.round(tr2, 12), axis=0)
    return np.broadcast_to(idx, k.shape[:nlead] + k.shape[nlead + 2 :])


# ---------------------------------------------------------------- TD-TC


def _tdtc_raw(s1, s2, claire, kraus1, kraus2, stage):
    """Operators before Bob's correction.

    Returns shape (alice, n1, n2, c1, c2, 2, 2, *batch).
    """
    batch = s1.shape[1:]
    t1 = s1.reshape((2, 2, 2) + batch)
    t2 = s2.reshape((2, 2, 2) + batch)
    # axes: A', A, C1, C2, B, C1', C2', input column, *batch
    tensor = np.einsum("ij,abc...,def...->iabcdefj...", np.eye(2), t1, t2)
    out = []
    for a, label in enumerate(BELL_LABELS):
        r = project_tensor(tensor, BELL_VECTORS[a], [0, 1])  # C1 C2 B C1' C2' col ...
        u = claire[label].reshape(2, 2, 2, 2)
        if stage == "pre":
            r = np.einsum("ixu,jyv,ucbve...->ijxcbye...", kraus1, kraus2, r)
            r = np.einsum("pqxy,ijxybrs...->ijpqbrs...", u, r)
        else:
            r = np.einsum("pqxy,xybrs...->pqbrs...", u, r)
            r = np.einsum("ixu,jyv,ucbve...->ijxcbye...", kraus1, kraus2, r)
        # C1 measures (C1, C1'), C2 measures (C2, C2')
        out.append(np.einsum("mpr,nqs,ijpqbrs...->ijmnb...", _BELL_BRA, _BELL_BRA, r, optimize=True))
    return np.stack(out)


def _apply_bob(raw, table):
    return np.einsum("acdkl,aijcdl...->aijcdk...", _pauli_stack(table), raw)


def table_array(table):
    """CorrectionTable dict -> (4, 4, 4) integer array of Pauli indices."""
    arr = np.zeros((4, 4, 4), dtype=int)
    for (a, c1, c2), name in table.items():
        arr[_BIDX[a], _BIDX[c1], _BIDX[c2]] = _PIDX[name]
    return arr


def _table_dict(arr):
    return {
        (BELL_LABELS[a], BELL_LABELS[c1], BELL_LABELS[c2]): PAULI_NAMES[arr[a, c1, c2]]
        for a, c1, c2 in product(range(4), repeat=3)
    }


def derive_bob_corrections(family, alpha, beta=None):
    """Bob's Pauli per (Alice, C1, C2) outcome, chosen from the noiseless run.

    The channel is taken in canonical form (zero phase).  For each outcome
    the Pauli with the largest branch fidelity wins; ties (including
    zero-probability outcomes) resolve in the order I < X < Y < Z.
    """
    s = _channel_amplitudes(family, alpha, beta, 0.0, False)
    claire = GGHZ_CLAIRE if family == "gghz" else GW_CLAIRE
    raw = _tdtc_raw(s, s, claire, I2[None], I2[None], "pre")[:, 0, 0]  # (4, 4, 4, 2, 2)
    k = raw.reshape(64, 2, 2)
    idx = _best_pauli(k).reshape(4, 4, 4)
    table = _table_dict(idx)
    for key, name in table.items():
        out = PAULIS[_PIDX[name]] @ raw[tuple(_BIDX[x] for x in key)]
        # a correct correction leaves Bob's operator diagonal
        if abs(out[0, 1]) + abs(out[1, 0]) > 1e-9:
            raise RuntimeError(f"no Pauli brings outcome {key} to diagonal form")
    return table


def rectification_table(kind):
    """Bob's unitary for opposite-class (C1, C2) outcomes under a flip error."""
    if kind not in ("bitflip", "bitphaseflip"):
        raise ValueError("kind must be 'bitflip' or 'bitphaseflip'")
    if kind == "bitflip":
        return dict(_RECTIFY)
    out = {}
    for key, name in _RECTIFY.items():
        m = Z @ PAULIS[_PIDX[name]]
        # sigma_z times a Pauli is a Pauli up to a phase
        for j, pm in enumerate(PAULIS):
            if abs(abs(np.trace(pm.conj().T @ m)) - 2) < 1e-12:
                out[key] = PAULI_NAMES[j]
    return out


def bob_table(spec):
    """Full Bob correction table for a TD-TC run under the spec's policy."""
    if spec.family == "gw":
        return dict(GW_BOB)
    table = derive_bob_corrections("gghz", spec.alpha)
    if spec.correction_policy != "noiseless":
        rect = rectification_table(spec.correction_policy)
        for (a, c1, c2) in table:
            if (c1, c2) in rect:
                table[(a, c1, c2)] = rect[(c1, c2)]
    return table


def tdtc_operators(spec, alpha=None, beta=None, s1=None, s2=None):
    """Stacked TD-TC operators (alice, n1, n2, c1, c2, 2, 2, *batch).

    ``alpha``/``beta`` arrays override the spec's scalars for batch runs;
    ``s1``/``s2`` give raw amplitudes for the two copies directly.
    """
    if s1 is None:
        s1 = s2 = amplitudes(spec, alpha, beta)
    k1, k2 = _kraus_pair(spec)
    claire = GGHZ_CLAIRE if spec.family == "gghz" else GW_CLAIRE
    raw = _tdtc_raw(s1, s2, claire, k1, k2, spec.noise_stage)
    return _apply_bob(raw, table_array(bob_table(spec)))


def run_tdtc(spec):
    """All TD-TC branches, zero-probability ones included."""
    if spec.mode != "tdtc":
        raise ValueError("run_tdtc needs mode 'tdtc'")
    ops = tdtc_operators(spec)
    out = []
    for a, i, j, c1, c2 in np.ndindex(*ops.shape[:5]):
        labels = (BELL_LABELS[a], BELL_LABELS[c1], BELL_LABELS[c2])
        out.append(BranchOperator(labels, (i, j), ops[a, i, j, c1, c2]))
    return out


def detect_noise_class(branches, tol=1e-12):
    """Bell-class correlation of the (C1, C2) outcomes that actually occur."""
    weight = {}
    for b in branches:
        key = (bell_class(b.outcomes[1]), bell_class(b.outcomes[2]))
        weight[key] = weight.get(key, 0.0) + b.probability
    seen = {k for k, w in weight.items() if w > tol}
    same = {("phi", "phi"), ("psi", "psi")}
    if seen <= same:
        return "SameBellClass"
    if not seen & same:
        return "OppositeBellClass"
    return "Mixed"


# ---------------------------------------------------------------- single path


def _hop(chan, sender_first):
    """Teleportation maps through a two-qubit channel, shape (4, 2, 2, *batch).

    ``chan`` is a (2, 2, *batch) amplitude tensor.  Entry [j, r, i] maps input
    basis state i to the receiver's basis state r on Bell outcome j.
    """
    c = chan if sender_first else np.swapaxes(chan, 0, 1)
    return np.einsum("jis,sr...->jri...", _BELL_BRA, c)


def _gather2(idx):
    """(m, j, *batch) Pauli indices -> (m, j, 2, 2, *batch) matrices."""
    return np.moveaxis(PAULIS[idx], (-2, -1), (2, 3))


def _is_product(chan, tol=STRUCT_TOL):
    """Schmidt rank one test on a (2, 2, *batch) tensor."""
    det = chan[0, 0] * chan[1, 1] - chan[0, 1] * chan[1, 0]
    n2 = np.sum(np.abs(chan) ** 2, axis=(0, 1))
    return np.abs(det) ** 2 <= tol * n2**2


def two_hop_operators(
    chi1, chi2, kraus1, kraus2, stage="pre", substitute=True, joint=False, structure=None
):
    """Compose two teleportation hops through A -> C1 -> B.

    ``chi1`` has shape (m, 2, 2, *batch) over (A, C1); ``chi2`` has shape
    (n, 2, 2, *batch) over (B, C1').  Component indices m, n are outcomes of
    a prior measurement that fixes the hop channels.  Corrections are the best
    Paulis for the noiseless hops, per component, or shared across
    components when ``joint`` is set (the components are then not known to
    the parties).  With ``substitute`` a component pair where either hop is
    a product state is replaced by a measure-and-prepare map worth 2/3.

    ``structure`` (from :func:`hop_structure`) freezes the correction choice
    and the product pattern instead of reading them off the inputs.

    Returns shape (m, n, n1, n2, j, k, 2, 2, *batch).
    """
    m, n = chi1.shape[0], chi2.shape[0]
    batch = chi1.shape[3:]
    k1 = np.stack([_hop(c, True) for c in chi1])  # (m, j, 2, 2, *b)
    k2 = np.stack([_hop(c, False) for c in chi2])
    if structure is None:
        p_idx, q_idx = _best_pauli(k1, 2, joint), _best_pauli(k2, 2, joint)
    else:
        p_idx = np.broadcast_to(structure.p_idx.reshape(structure.p_idx.shape + (1,) * len(batch)), k1.shape[:2] + batch)
        q_idx = np.broadcast_to(structure.q_idx.reshape(structure.q_idx.shape + (1,) * len(batch)), k2.shape[:2] + batch)
    pm, qm = _gather2(p_idx), _gather2(q_idx)
    # noise on C1's half of the second channel (sender side)
    chi2n = np.einsum("byv,nxv...->bnxy...", kraus2, chi2)
    k2n = np.stack([np.stack([_hop(c, False) for c in cb]) for cb in chi2n])  # (n2, n, k, 2, 2, *b)
    if stage == "pre":
        ops = np.einsum(
            "nkxy...,bnkyz...,mjzw...,awv,mjvu...->mnabjkxu...", qm, k2n, pm, kraus1, k1, optimize=True
        )
    else:
        ops = np.einsum(
            "nkxy...,bnkyz...,azw,mjwv...,mjvu...->mnabjkxu...", qm, k2n, kraus1, pm, k1, optimize=True
        )
    if substitute:
        w1 = np.sum(np.abs(chi1) ** 2, axis=(1, 2))
        w2 = np.sum(np.abs(chi2) ** 2, axis=(1, 2))
        for i, j in np.ndindex(m, n):
            if structure is not None:
                mask = structure.product[i, j]
            else:
                mask = _is_product(chi1[i]) | _is_product(chi2[j])
            if not np.any(mask):
                continue
            root = np.sqrt(w1[i] * w2[j])
            classical = np.zeros(ops.shape[2:], dtype=complex)
            classical[0, 0, 0, 0, 0, 0] = root
            classical[0, 0, 0, 1, 1, 1] = root
            ops[i, j] = np.where(mask, classical, ops[i, j])
    return ops


@dataclass(frozen=True)
class HopStructure:
    """Correction indices (m, j) / (n, k) and product pattern (m, n) of a run."""

    p_idx: np.ndarray
    q_idx: np.ndarray
    product: np.ndarray


def hop_structure(chi1, chi2, joint=False):
    """Structure of a scalar (unbatched) two-hop run."""
    k1 = np.stack([_hop(c, True) for c in chi1])
    k2 = np.stack([_hop(c, False) for c in chi2])
    prod = np.array([[bool(_is_product(a) | _is_product(b)) for b in chi2] for a in chi1])
    return HopStructure(np.array(_best_pauli(k1, 2, joint)), np.array(_best_pauli(k2, 2, joint)), prod)


def _c2_components(s, basis_vecs):
    """Project C2 (last qubit of each copy) onto the given basis vectors."""
    batch = s.shape[1:]
    t = s.reshape((2, 2, 2) + batch)
    return np.stack([project_tensor(t, v, [2]) for v in basis_vecs])


def _c2_vectors(spec, mixed):
    if mixed:
        return np.eye(2, dtype=complex)
    return mbasis(*spec.c2_basis()).vectors


def _kraus_pair(spec):
    chans = spec.noise_channels()
    if chans is None:
        return I2[None], I2[None]
    return _kraus_stack(chans[0]), _kraus_stack(chans[1])


def amplitudes(spec, alpha=None, beta=None):
    """Channel amplitudes (8, *batch) for the spec, optionally batched."""
    alpha = spec.alpha if alpha is None else alpha
    beta = spec.beta if beta is None else beta
    return _channel_amplitudes(spec.family, alpha, beta, spec.phi, spec.phase_absorption)


def single_path_structure(spec):
    """Frozen corrections and product pattern at the spec's own parameters."""
    mixed = spec.mode == "mixed"
    s = amplitudes(spec)
    chi = _c2_components(s, _c2_vectors(spec, mixed))
    st = hop_structure(chi, chi, joint=mixed)
    if mixed:
        st = HopStructure(st.p_idx, st.q_idx, np.zeros_like(st.product))
    return st


def single_path_operators(spec, alpha=None, beta=None, mixed=None, substitute=True, s1=None, s2=None, structure=None):
    """Stacked single-path operators (m, n, n1, n2, j, k, 2, 2, *batch).

    ``s1``/``s2`` give raw amplitudes for the two copies directly.
    """
    mixed = spec.mode == "mixed" if mixed is None else mixed
    if s1 is None:
        s1 = s2 = amplitudes(spec, alpha, beta)
    vecs = _c2_vectors(spec, mixed)
    k1, k2 = _kraus_pair(spec)
    return two_hop_operators(
        _c2_components(s1, vecs),
        _c2_components(s2, vecs),
        k1,
        k2,
        spec.noise_stage,
        substitute=substitute and not mixed,
        joint=mixed,
        structure=structure,
    )


def _single_branches(spec, ops):
    if spec.mode == "mixed":
        c2_labels = ("0", "1")
    else:
        c2_labels = ("M", "Mperp")
    out = []
    for m, n, a, b, j, k in np.ndindex(*ops.shape[:6]):
        labels = (c2_labels[m], c2_labels[n], BELL_LABELS[j], BELL_LABELS[k])
        out.append(BranchOperator(labels, (a, b), ops[m, n, a, b, j, k]))
    return out


def run_single_path(spec, substitute=True):
    """Branches of the measured single-path protocol."""
    if spec.mode != "single":
        raise ValueError("run_single_path needs mode 'single'")
    return _single_branches(spec, single_path_operators(spec, substitute=substitute))


def single_path_mixed_branches(spec):
    if spec.mode != "mixed":
        raise ValueError("needs mode 'mixed'")
    return _single_branches(spec, single_path_operators(spec, mixed=True))


def run_single_path_mixed(spec):
    """Average fidelity when C2 leaves and her qubits are traced out."""
    return float(ops_fidelity(flat_ops(single_path_operators(spec, mixed=True), 6)))


def run(spec):
    """Branch operators for any mode."""
    if spec.mode == "tdtc":
        return run_tdtc(spec)
    if spec.mode == "single":
        return run_single_path(spec)
    return single_path_mixed_branches(spec)


def operators(spec, alpha=None, beta=None):
    """Flattened (branches, 2, 2, *batch) operators for any mode."""
    if spec.mode == "tdtc":
        return flat_ops(tdtc_operators(spec, alpha, beta), 5)
    return flat_ops(single_path_operators(spec, alpha, beta), 6)


# ---------------------------------------------------------------- fidelity


def flat_ops(ops, nlead):
    return ops.reshape((-1,) + ops.shape[nlead:])


def branch_fidelity(k):
    """Haar-average contribution (|tr K|^2 + tr K^dag K) / 6 of one operator."""
    k = np.asarray(k)
    tr = k[0, 0] + k[1, 1]
    return (np.abs(tr) ** 2 + np.sum(np.abs(k) ** 2, axis=(0, 1))) / 6


def ops_fidelity(ops):
    """Average fidelity of stacked operators (branches, 2, 2, *batch)."""
    tr = ops[:, 0, 0] + ops[:, 1, 1]
    return (np.sum(np.abs(tr) ** 2, axis=0) + np.sum(np.abs(ops) ** 2, axis=(0, 1, 2))) / 6


def completeness_error(ops):
    """max |sum K^dag K - I| over the batch."""
    s = np.einsum("mki,mkj...->ij...", ops.conj(), ops)
    eye = np.eye(2).reshape((2, 2) + (1,) * (s.ndim - 2))
    return float(np.abs(s - eye).max())
