"""Parameter sweeps and Monte Carlo advantage estimates over gW states.

With Bob's table and the hop corrections held fixed, every branch operator
is linear in u = s (x) s, the product of the two copies' amplitudes.  The
average fidelity is then a Hermitian quadratic form u^dag Q u / 6.  Q is
assembled once from engine runs on basis amplitudes, and every chunk is
spot-checked against the full engine.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import protocol as pr
from .analytics import NOISE_FORMULAS, closed_form
from .states import make_rng

CHUNK = 50_000
CHECK_POINTS = 16
CHECK_TOL = 1e-10
MEASURES = ("simplex", "angles")


@dataclass
class QuadraticFidelity:
    spec: pr.ProtocolSpec
    support: np.ndarray
    q: np.ndarray

    def __call__(self, alpha, beta=None):
        s = pr.amplitudes(self.spec, alpha, beta)[self.support]
        u = (s[:, None] * s[None, :]).reshape(len(self.support) ** 2, -1)
        return np.einsum("in,ij,jn->n", u.conj(), self.q, u).real / 6

    def check(self, alpha, beta=None, tol=CHECK_TOL):
        """Largest deviation from the full engine at the given points."""
        full = pr.ops_fidelity(pr.operators(self.spec, alpha, beta))
        return float(np.max(np.abs(full - self(alpha, beta))))


def quadratic_fidelity(spec):
    """Build the quadratic form for ``spec``'s protocol.

    The correction tables and (single path) the product pattern are frozen
    at the spec's own parameters.
    """
    s_ref = pr.amplitudes(spec)
    support = np.flatnonzero(np.abs(s_ref) > 0)
    k = len(support)
    pairs = [(i, j) for i in support for j in support]
    e = np.eye(8, dtype=complex)
    s1 = np.stack([e[i] for i, _ in pairs], axis=1)
    s2 = np.stack([e[j] for _, j in pairs], axis=1)
    q = np.zeros((k * k, k * k), dtype=complex)
    if spec.mode == "tdtc":
        ops = pr.flat_ops(pr.tdtc_operators(spec, s1=s1, s2=s2), 5)
    else:
        st = pr.single_path_structure(spec)
        quantum = pr.HopStructure(st.p_idx, st.q_idx, np.zeros_like(st.product))
        raw = pr.single_path_operators(spec, s1=s1, s2=s2, structure=quantum, substitute=False)
        # product pairs carry weight 2/3 * |chi1|^2 |chi2|^2 instead
        vecs = pr._c2_vectors(spec, spec.mode == "mixed")
        chi1 = pr._c2_components(s1, vecs)
        chi2 = pr._c2_components(s2, vecs)
        for a, b in zip(*np.nonzero(st.product)):
            raw[a, b] = 0
            lin = np.einsum("xy...,zw...->xyzw...", chi1[a], chi2[b]).reshape(16, -1)
            q += 4 * lin.conj().T @ lin
        ops = pr.flat_ops(raw, 6)
    tr = ops[:, 0, 0] + ops[:, 1, 1]
    mat = ops.reshape(-1, ops.shape[-1])
    q += tr.conj().T @ tr + mat.conj().T @ mat
    return QuadraticFidelity(spec, support, q)


def sample_gw(rng, n, measure="simplex"):
    """Random gW parameters (alpha, beta).

    ``simplex``: uniform on {alpha, beta > 0, alpha + beta < 1}.
    ``angles``: amplitudes (sin t cos c, sin t sin c, cos t) with t, c
    uniform on (0, pi/2).
    """
    if measure == "simplex":
        d = rng.dirichlet((1.0, 1.0, 1.0), n)
        return d[:, 0], d[:, 1]
    if measure == "angles":
        t = rng.uniform(0, np.pi / 2, n)
        c = rng.uniform(0, np.pi / 2, n)
        return (np.sin(t) * np.cos(c)) ** 2, (np.sin(t) * np.sin(c)) ** 2
    raise ValueError(f"measure must be one of {MEASURES}")


def _noisy_spec(mode, noise, p, alpha=0.3, beta=0.2):
    return pr.ProtocolSpec("gw", alpha, beta, mode=mode, noise=noise, p=p)


def _formula_fn(mode, noise, p):
    if noise is None:
        key = "gw_tdtc" if mode == "tdtc" else "gw_single"
        return lambda a, b: np.vectorize(lambda x, y: closed_form(key, alpha=x, beta=y))(a, b)
    fn = NOISE_FORMULAS[("gw", "single" if mode == "single" else "tdtc", noise)]
    return lambda a, b: fn(a, b, p)


def _chunk_counts(args):
    idx, n, seed, noise, p, measure, ties, source = args
    rng = make_rng(seed, idx)
    a, b = sample_gw(rng, n, measure)
    ok = (a > 0) & (b > 0) & (a + b < 1)
    a, b = a[ok], b[ok]
    if source == "simulation":
        fd = quadratic_fidelity(_noisy_spec("tdtc", noise, p))
        fs = quadratic_fidelity(_noisy_spec("single", noise, p))
        m = min(CHECK_POINTS, len(a))
        dev = max(fd.check(a[:m], b[:m]), fs.check(a[:m], b[:m]))
        if dev > CHECK_TOL:
            raise RuntimeError(f"quadratic form deviates from the engine by {dev:.3g}")
        d, s = fd(a, b), fs(a, b)
    else:
        d, s = _formula_fn("tdtc", noise, p)(a, b), _formula_fn("single", noise, p)(a, b)
    if ties == "exclude":
        wins = int(np.sum(d > s + 1e-12))
    else:
        wins = int(np.sum(d >= s - 1e-12))
    return wins, len(a)


def mc_advantage(
    noise, p, n_samples, seed, measure="simplex", ties="exclude", source="simulation", workers=1, chunk=CHUNK
):
    """Share of gW states where TD-TC beats the measured single path.

    Each chunk of ``chunk`` samples draws from its own stream derived from
    (seed, chunk index), so the result does not depend on ``workers``.
    Returns a dict with percentage, binomial standard error and counts.
    """
    if ties not in ("exclude", "include"):
        raise ValueError("ties must be 'exclude' or 'include'")
    if source not in ("simulation", "formula"):
        raise ValueError("source must be 'simulation' or 'formula'")
    sizes = [min(chunk, n_samples - i) for i in range(0, n_samples, chunk)]
    jobs = [(i, n, seed, noise, p, measure, ties, source) for i, n in enumerate(sizes)]
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_chunk_counts, jobs))
    else:
        parts = [_chunk_counts(j) for j in jobs]
    wins = sum(w for w, _ in parts)
    total = sum(t for _, t in parts)
    frac = wins / total
    return {
        "noise": noise or "none",
        "p": p,
        "measure": measure,
        "ties": ties,
        "source": source,
        "seed": seed,
        "n_samples": total,
        "wins": wins,
        "percent": 100 * frac,
        "std_error": 100 * np.sqrt(frac * (1 - frac) / total),
    }


def region_mass(measure, n=2_000_000, seed=0):
    """Mass of {alpha >= beta/2} under the sampling measure (numeric oracle)."""
    if measure == "simplex":
        # area of {a >= b/2, a + b < 1} over the simplex area 1/2
        return 2 / 3
    a, b = sample_gw(make_rng(seed), n, measure)
    return float(np.mean(2 * a - b > 0))


def sweep(spec, alphas, betas=None, noise_formula=True):
    """Fidelity table over a parameter grid.

    Returns a list of row dicts; gW points outside the simplex have ``None``
    fidelities.  Columns: alpha, beta, tdtc, single, tdtc_formula,
    single_formula, advantage.
    """
    rows = []
    if spec.family == "gghz":
        grid = [(a, None) for a in alphas]
    else:
        grid = [(a, b) for a in alphas for b in betas]
    inside = [
        (a, b) for a, b in grid if 0 < a < 1 and (b is None or (0 < b < 1 and a + b < 1))
    ]
    vals = {}
    if inside:
        a = np.array([x for x, _ in inside])
        b = None if spec.family == "gghz" else np.array([y for _, y in inside])
        td = _batch(spec, "tdtc", a, b)
        sp = _batch(spec, "single", a, b)
        for i, pt in enumerate(inside):
            vals[pt] = (float(td[i]), float(sp[i]))
    for a, b in grid:
        row = {"alpha": a, "beta": b}
        if (a, b) in vals:
            td, sp = vals[(a, b)]
            row.update(tdtc=td, single=sp, advantage=td > sp + 1e-12)
            row.update(_formulas(spec, a, b) if noise_formula else {})
        else:
            row.update(tdtc=None, single=None, advantage=None, tdtc_formula=None, single_formula=None)
        rows.append(row)
    return rows


def _batch(spec, mode, a, b, chunk=4096):
    s = pr.ProtocolSpec(
        spec.family, spec.alpha, spec.beta, spec.phi, mode, spec.noise, spec.p, spec.p2,
        spec.correction_policy if mode == "tdtc" else "noiseless",
        spec.basis, spec.phase_absorption, spec.noise_stage,
    )
    out = []
    for i in range(0, len(a), chunk):
        bb = None if b is None else b[i : i + chunk]
        out.append(pr.ops_fidelity(pr.operators(s, a[i : i + chunk], bb)))
    return np.concatenate(out)


def _formulas(spec, a, b):
    out = {}
    for mode in ("tdtc", "single"):
        try:
            if spec.noise is None:
                key = f"{spec.family}_{mode}"
                out[f"{mode}_formula"] = closed_form(key, alpha=a, beta=b) if b is not None else closed_form(key, alpha=a)
            else:
                out[f"{mode}_formula"] = closed_form((spec.family, mode, spec.noise), alpha=a, beta=b, p=spec.p)
        except KeyError:
            out[f"{mode}_formula"] = None
    return out
