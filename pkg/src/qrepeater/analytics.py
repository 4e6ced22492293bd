"""Average fidelities, Schmidt data, reference closed forms and basis search."""

from dataclasses import dataclass, field
from math import cos, sqrt

import numpy as np

from .protocol import BranchOperator, ProtocolSpec, completeness_error, operators, ops_fidelity
from .states import haar_qubits, make_rng
from .tensor import STRUCT_TOL

# ---------------------------------------------------------------- fidelity


def _stack(branches):
    if isinstance(branches, np.ndarray):
        return branches
    return np.stack([b.k if isinstance(b, BranchOperator) else np.asarray(b) for b in branches])


def avg_fidelity(branches, check=True):
    """Haar-average fidelity sum_i (|tr K_i|^2 + tr K_i^dag K_i) / 6."""
    ops = _stack(branches)
    if check:
        err = completeness_error(ops)
        if err > STRUCT_TOL:
            raise ValueError(f"Kraus set incomplete (error {err:.3g})")
    return float(ops_fidelity(ops))


def mc_fidelity(branches, n_samples, seed, chunk=20000):
    """Monte Carlo estimate of the average fidelity over Haar inputs.

    Returns (mean, standard error).
    """
    ops = _stack(branches)
    rng = make_rng(seed)
    total, total2, done = 0.0, 0.0, 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        psi = haar_qubits(rng, n)
        amp = np.einsum("na,mab,nb->mn", psi.conj(), ops, psi)
        f = np.sum(np.abs(amp) ** 2, axis=0)
        total += f.sum()
        total2 += (f**2).sum()
        done += n
    mean = total / n_samples
    var = max(total2 / n_samples - mean**2, 0.0)
    return mean, sqrt(var / max(n_samples - 1, 1))


def fidelity(spec):
    """Average fidelity of a protocol configuration."""
    return float(ops_fidelity(operators(spec)))


# ---------------------------------------------------------------- Schmidt


@dataclass(frozen=True)
class SchmidtData:
    lambda_plus: float
    lambda_minus: float
    left: np.ndarray
    right: np.ndarray


def schmidt(psi):
    """Schmidt coefficients and bases of a normalized two-qubit pure state."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (4,):
        raise ValueError("schmidt needs a two-qubit state vector")
    if abs(np.vdot(psi, psi).real - 1) > 1e-10:
        raise ValueError("state is not normalized")
    u, s, vh = np.linalg.svd(psi.reshape(2, 2))
    lam = s**2
    return SchmidtData(float(lam[0]), float(lam[1]), u.T, vh)


def singlet_fraction(s):
    """Maximal singlet fraction of a pure state with Schmidt data ``s``."""
    return 0.5 * (1 + 2 * sqrt(max(s.lambda_plus * s.lambda_minus, 0.0)))


def fidelity_from_F(F):
    return (2 * F + 1) / 3


def hop_fidelity(psi):
    """Optimal teleportation fidelity of a pure two-qubit resource."""
    return fidelity_from_F(singlet_fraction(schmidt(psi)))


# ---------------------------------------------------------------- formulas


@dataclass(frozen=True)
class Formula:
    params: tuple
    fn: object
    note: str = ""


def _c(a, b):
    return 1 - a - b


FORMULAS = {
    "gghz_tdtc": Formula(("alpha",), lambda alpha: 2 / 3 + 4 / 3 * alpha * (1 - alpha)),
    "gghz_tdtc_phase": Formula(
        ("alpha", "phi"), lambda alpha, phi: 2 / 3 + 4 / 3 * alpha * (1 - alpha) * cos(phi) ** 2
    ),
    "gw_tdtc": Formula(
        ("alpha", "beta"), lambda alpha, beta: 2 / 3 + 2 / 3 * (2 * alpha + beta) * _c(alpha, beta)
    ),
    "segment_max": Formula(
        ("alpha", "x"), lambda alpha, x: 2 / 3 + 2 / 3 * sqrt(x * alpha * (1 - x) * (1 - alpha))
    ),
    "gghz_single": Formula(("alpha",), lambda alpha: 2 / 3 + 4 / 3 * alpha * (1 - alpha)),
    "gw_hop_max": Formula(("alpha", "beta"), lambda alpha, beta: 2 / 3 + 2 / 3 * sqrt(beta * _c(alpha, beta))),
    "gw_single": Formula(("alpha", "beta"), lambda alpha, beta: 2 / 3 + 4 / 3 * beta * _c(alpha, beta)),
    "gw_mixed": Formula(
        ("alpha", "beta"),
        lambda alpha, beta: 2 / 3 + 2 / 3 * (2 * beta * _c(alpha, beta) - alpha * (1 - alpha)),
    ),
    "advantage_percent": Formula(
        ("alpha", "beta"),
        lambda alpha, beta: (2 * alpha - beta) * _c(alpha, beta) / (1 + 2 * beta * _c(alpha, beta)) * 100,
    ),
    "gghz_blocks": Formula(
        ("alpha", "m"), lambda alpha, m: 2 / 3 + 2 ** (2 * m) / 3 * (alpha * (1 - alpha)) ** m
    ),
    "gghz_single_blocks": Formula(
        ("alpha", "m"), lambda alpha, m: 2 / 3 + 2 ** (2 * m) / 3 * (alpha * (1 - alpha)) ** m
    ),
    "gw_blocks": Formula(
        ("alpha", "beta", "m"),
        lambda alpha, beta, m: 2 / 3 * (1 + 2 ** (m - 1) * (2 * alpha + beta) ** m * _c(alpha, beta) ** m),
    ),
    "gw_single_blocks": Formula(
        ("alpha", "beta", "m"),
        lambda alpha, beta, m: 2 / 3 + 2**m / 3 * beta**m * _c(alpha, beta) ** m,
    ),
    "hetero_chain": Formula(
        ("alpha1", "alpha2"),
        lambda alpha1, alpha2: 2 / 3
        + 4 / 3 * sqrt(alpha1 * alpha2 * (1 - alpha1) * (1 - alpha2)),
    ),
    "hetero_chain_equal": Formula(("alpha",), lambda alpha: 2 / 3 + 4 / 3 * alpha * (1 - alpha)),
}


def _f_gghz(a):
    return 2 / 3 + 4 / 3 * a * (1 - a)


# Reference noise formulas; flip channels keep the state with probability p.
NOISE_FORMULAS = {
    ("gghz", "tdtc", "bitflip"): lambda a, b, p: _f_gghz(a),
    ("gghz", "tdtc", "phaseflip"): lambda a, b, p: 2 / 3 + 4 / 3 * (1 - 2 * p) ** 2 * a * (1 - a),
    ("gghz", "tdtc", "bitphaseflip"): lambda a, b, p: 2 / 3 + 4 / 3 * (1 - 2 * p) ** 2 * a * (1 - a),
    ("gghz", "tdtc", "ampdamp"): lambda a, b, p: _f_gghz(a)
    - 2 * p / 3 * (1 + a - 2 * a**2 - p + 2 * a * p - a**2 * p),
    ("gghz", "tdtc", "phasedamp"): lambda a, b, p: _f_gghz(a) - 4 * a * p / 3 * (2 - 2 * a - p + a * p),
    # the reference expression for the single-path bit-flip cell is ambiguous
    ("gghz", "single", "bitflip"): None,
    ("gghz", "single", "phaseflip"): lambda a, b, p: 2 / 3 + 4 / 3 * (1 - 2 * p) ** 2 * a * (1 - a),
    ("gghz", "single", "bitphaseflip"): lambda a, b, p: 2 / 3 + 4 / 3 * (1 - 2 * p) ** 2 * a * (1 - a),
    ("gghz", "single", "ampdamp"): lambda a, b, p: 2 / 3 + 4 * (1 - p) / 3 * a * (1 - a),
    ("gghz", "single", "phasedamp"): lambda a, b, p: _f_gghz(a) - 4 * a * p / 3 * (2 - 2 * a - p + a * p),
    ("gw", "tdtc", "bitflip"): lambda a, b, p: 2 / 3
    + 2 / 3 * ((2 * a + b) * _c(a, b) * (1 - 2 * p + 2 * p**2) + p * (p - 1)),
    ("gw", "tdtc", "bitphaseflip"): lambda a, b, p: 2 / 3
    + 2 / 3 * ((2 * a + b) * _c(a, b) * (1 - 2 * p + 2 * p**2) + p * (p - 1)),
    ("gw", "tdtc", "phaseflip"): lambda a, b, p: 2 / 3
    + 2 / 3 * (2 * a * (1 - a) + b * (1 - b) * (1 - 2 * p) ** 2 - 3 * a * b + 4 * a * b * p * (1 - p)),
    ("gw", "tdtc", "ampdamp"): lambda a, b, p: 2 / 3
    + 2 / 3 * ((2 * a + b) * _c(a, b) + p * (a * b - 2 * b + b**2 * (1 + p))),
    ("gw", "tdtc", "phasedamp"): lambda a, b, p: 2 / 3
    + 2 / 3 * (2 * a * (1 - a) + b * (1 - b) * (1 - p) ** 2 - 3 * a * b + a * b * p * (2 - p)),
    ("gw", "single", "bitflip"): lambda a, b, p: 2 / 3
    + 4 / 3 * b * _c(a, b)
    - 2 / 3 * p * (1 - p) * ((1 - a) ** 2 - 4 * b * _c(a, b)),
    ("gw", "single", "bitphaseflip"): lambda a, b, p: 2 / 3
    + 4 / 3 * b * _c(a, b)
    - 2 / 3 * p * (1 - p) * ((1 - a) ** 2 - 4 * b * _c(a, b)),
    ("gw", "single", "phaseflip"): lambda a, b, p: 2 / 3 + 4 / 3 * b * _c(a, b) * (1 - 4 * p * (1 - p)),
    ("gw", "single", "ampdamp"): lambda a, b, p: 2 / 3
    + 4 / 3 * b * _c(a, b)
    - 2 * b * p * (1 - a)
    + 2 / 3 * p * b**2 * (2 + p),
    ("gw", "single", "phasedamp"): lambda a, b, p: 2 / 3 + 4 / 3 * b * _c(a, b) * (1 - p * (2 - p)),
}


def closed_form(formula_id, **params):
    """Evaluate a named closed-form fidelity.

    ``formula_id`` is a key of :data:`FORMULAS`, or a tuple
    ``(family, mode, noise)`` naming a noisy reference cell, evaluated with
    ``alpha``, ``beta`` (gW only) and ``p``.
    """
    if isinstance(formula_id, tuple):
        if formula_id not in NOISE_FORMULAS:
            raise KeyError(f"unknown formula {formula_id}")
        fn = NOISE_FORMULAS[formula_id]
        if fn is None:
            raise KeyError(f"no unambiguous reference expression for {formula_id}")
        _domain(formula_id[0], params)
        return float(fn(params["alpha"], params.get("beta"), params["p"]))
    if formula_id not in FORMULAS:
        raise KeyError(f"unknown formula {formula_id!r}")
    f = FORMULAS[formula_id]
    missing = set(f.params) - set(params)
    if missing:
        raise ValueError(f"{formula_id} needs {sorted(missing)}")
    args = {k: params[k] for k in f.params}
    fam = "gw" if "beta" in args else "gghz"
    _domain(fam, args)
    return float(f.fn(**args))


def _domain(family, params):
    for k in ("alpha", "alpha1", "alpha2", "beta"):
        if k in params and params[k] is not None and not 0 < params[k] < 1:
            raise ValueError(f"{k} must lie in (0, 1)")
    if family == "gw" and params.get("beta") is not None and params["alpha"] + params["beta"] >= 1:
        raise ValueError("alpha + beta must be < 1")
    if "p" in params and not 0 <= params["p"] <= 1:
        raise ValueError("p must lie in [0, 1]")
    if "m" in params and int(params["m"]) < 1:
        raise ValueError("m must be >= 1")
    if "x" in params and not 0 <= params["x"] <= 1:
        raise ValueError("x must lie in [0, 1]")


@dataclass
class FidelityReport:
    simulated: float
    closed_form: float = None
    monte_carlo: tuple = None
    config: dict = field(default_factory=dict)

    @property
    def delta(self):
        if self.closed_form is None:
            return None
        return self.simulated - self.closed_form


# ---------------------------------------------------------------- basis search


def golden_max(f, lo, hi, tol=1e-10, max_iter=200):
    """Golden-section search for a maximum of a unimodal ``f`` on [lo, hi]."""
    g = (sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def optimize_basis(objective, grid=(41, 32), tol=1e-12):
    """Maximise ``objective(x, theta)`` over [0, 1] x [0, 2 pi).

    Grid search, then golden-section refinement of x and of theta around the
    best cell.  Ties resolve toward smaller x, then smaller theta; refinement
    only moves the point when it improves the value by more than ``tol``.
    """
    nx, nt = grid
    xs = np.linspace(0, 1, nx)
    ts = np.linspace(0, 2 * np.pi, nt, endpoint=False)
    best = (xs[0], ts[0], objective(xs[0], ts[0]))
    for x in xs:
        for t in ts:
            v = objective(x, t)
            if v > best[2] + tol:
                best = (x, t, v)
    x0, t0, v0 = best
    dx, dt = 1 / (nx - 1), 2 * np.pi / nt
    x1, v1 = golden_max(lambda x: objective(x, t0), max(0.0, x0 - dx), min(1.0, x0 + dx))
    if v1 > v0 + tol:
        x0, v0 = x1, v1
    t1, v1 = golden_max(lambda t: objective(x0, t), t0 - dt, t0 + dt)
    if v1 > v0 + tol:
        t0, v0 = t1 % (2 * np.pi), v1
    return float(x0), float(t0), float(v0)


def single_path_objective(family, alpha, beta=None, phi=0.0, substitute=True):
    """Simulated single-path fidelity as a function of C2's basis (x, theta)."""

    def f(x, theta):
        spec = ProtocolSpec(family, alpha, beta, phi=phi, mode="single", basis=(x, theta))
        return fidelity(spec) if substitute else float(ops_fidelity(operators_nosub(spec)))

    return f


def operators_nosub(spec):
    from .protocol import flat_ops, single_path_operators

    return flat_ops(single_path_operators(spec, substitute=False), 6)


def _pms(family, alpha, beta, phi, x, theta):
    """Normalized (A, C1) states and probabilities after C2's measurement."""
    from .protocol import _c2_components, _channel_amplitudes
    from .states import mbasis

    s = _channel_amplitudes(family, alpha, beta, phi, False)
    chi = _c2_components(s, mbasis(x, theta).vectors)
    out = []
    for c in chi:
        w = float(np.sum(np.abs(c) ** 2))
        out.append((w, c.reshape(4) / sqrt(w) if w > 0 else None))
    return out


def hop_objective(family, alpha, beta=None, phi=0.0):
    """Probability-weighted optimal single-hop fidelity for basis (x, theta)."""

    def f(x, theta):
        total = 0.0
        for w, psi in _pms(family, alpha, beta, phi, x, theta):
            if w > 0:
                total += w * hop_fidelity(psi)
        return total

    return f


def composed_objective(family, alpha, beta=None, phi=0.0):
    """Two hops each at their optimal capacity, averaged over C2's outcomes.

    For pure hop states with Schmidt products s1, s2 this is
    2/3 + 4/3 s1 s2 per outcome pair.
    """

    def f(x, theta):
        comps = [(w, sqrt(max(schmidt(psi).lambda_plus * schmidt(psi).lambda_minus, 0)) if w > 0 else 0.0)
                 for w, psi in _pms(family, alpha, beta, phi, x, theta)]
        return sum(w1 * w2 * (2 / 3 + 4 / 3 * s1 * s2) for w1, s1 in comps for w2, s2 in comps)

    return f


# ---------------------------------------------------------------- reconciliation


def fit_polynomial(fn, names, degree, rng_seed=7, n_fit=None, domain=None, max_den=144):
    """Recover an exact polynomial with rational coefficients from samples.

    ``fn`` maps a dict of variable values to a number.  Monomials up to total
    ``degree`` are fitted by least squares on random points, coefficients are
    rounded to fractions, and the result is checked on fresh points.
    Returns (sympy expression, max residual on fresh points).
    """
    from fractions import Fraction
    from itertools import product as iproduct

    import sympy

    rng = np.random.default_rng(rng_seed)
    exps = [e for e in iproduct(range(degree + 1), repeat=len(names)) if sum(e) <= degree]
    n_fit = n_fit or 3 * len(exps)
    domain = domain or (lambda r: {n: r.uniform(0.05, 0.3) for n in names})

    def design(points):
        return np.array([[np.prod([pt[n] ** k for n, k in zip(names, e)]) for e in exps] for pt in points])

    pts = [domain(rng) for _ in range(n_fit)]
    coef, *_ = np.linalg.lstsq(design(pts), np.array([fn(pt) for pt in pts]), rcond=None)
    syms = sympy.symbols(names)
    expr = 0
    for c, e in zip(coef, exps):
        q = Fraction(c).limit_denominator(max_den)
        if q != 0:
            expr += sympy.Rational(q.numerator, q.denominator) * sympy.Mul(*[s**k for s, k in zip(syms, e)])
    check = [domain(rng) for _ in range(20)]
    lam = sympy.lambdify(syms, expr, "math")
    resid = max(abs(fn(pt) - lam(*[pt[n] for n in names])) for pt in check)
    return sympy.factor(expr), resid


def reference_value(spec):
    """(formula label, value) for a spec with a known closed form, else (None, None).

    Single-path formulas assume the default C2 basis; gGHZ multipath noise
    formulas assume the bit-flip rectifier, except that bit-phase flip with
    its own rectifier restores the noiseless value.
    """
    fam, mode, a, b = spec.family, spec.mode, spec.alpha, spec.beta
    x, theta = spec.c2_basis()
    phase = 0.0 if spec.phase_absorption else spec.phi
    if fam == "gghz":
        # the |+->-type basis must be phase-aligned with the channel
        default_basis = x == 0.5 and np.isclose(np.cos(theta - phase) ** 2, 1)
    else:
        default_basis = x in (0.0, 1.0)
    if spec.noise is None:
        if mode == "tdtc":
            if fam == "gw":
                return "gw_tdtc", closed_form("gw_tdtc", alpha=a, beta=b)
            if spec.phase_absorption:
                return "gghz_tdtc", closed_form("gghz_tdtc", alpha=a)
            return "gghz_tdtc_phase", closed_form("gghz_tdtc_phase", alpha=a, phi=spec.phi)
        if mode == "mixed":
            if fam == "gw":
                return "gw_mixed", closed_form("gw_mixed", alpha=a, beta=b)
            return "classical", 2 / 3
        if not default_basis:
            return None, None
        if fam == "gw":
            return "gw_single", closed_form("gw_single", alpha=a, beta=b)
        return "gghz_single", closed_form("gghz_single", alpha=a)
    if spec.p2 is not None and spec.p2 != spec.p or mode == "mixed" or spec.noise_stage != "pre":
        return None, None
    if fam == "gghz" and not np.isclose(np.cos(phase) ** 2, 1):
        return None, None
    if mode == "single" and not default_basis:
        return None, None
    key = (fam, mode, spec.noise)
    if fam == "gghz" and mode == "tdtc":
        if spec.correction_policy == "bitphaseflip" and spec.noise == "bitphaseflip":
            return "gghz_tdtc", closed_form("gghz_tdtc", alpha=a)
        if spec.correction_policy != "bitflip":
            return None, None
    elif spec.correction_policy != "noiseless":
        return None, None
    if NOISE_FORMULAS.get(key) is None:
        return None, None
    return "/".join(key), closed_form(key, alpha=a, beta=b, p=spec.p)
