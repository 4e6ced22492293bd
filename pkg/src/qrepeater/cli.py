"""Command-line front end: fidelity, sweep, mc-advantage, multiblock, verify."""

import argparse
import json
import sys

import numpy as np

from . import acceptance
from . import analytics as an
from . import multiblock as mb
from . import output
from . import protocol as pr
from . import scan
from .states import NOISE_MODELS

TOL = 1e-9
MC_SIGMAS = 5

DEFAULTS = {
    "family": "gghz",
    "alpha": 0.5,
    "beta": None,
    "phi": 0.0,
    "mode": "tdtc",
    "basis": "bell",
    "noise": "none",
    "p": 0.0,
    "p2": None,
    "rectify": "none",
    "noise_stage": "pre",
    "phase_absorption": False,
    "blocks": 1,
    "samples": None,
    "seed": 12345,
    "measure": "simplex",
    "ties": "exclude",
    "source": "simulation",
    "workers": 1,
    "grid": 21,
    "over": "alpha-beta",
    "out": None,
    "format": None,
    "only": None,
}
# per-command defaults for keys left unset above
COMMAND_DEFAULTS = {
    "fidelity": {"samples": 0, "format": "json"},
    "sweep": {"format": "csv"},
    "mc-advantage": {"family": "gw", "samples": 10**6, "noise": "phaseflip", "p": 0.3, "format": "json"},
    "multiblock": {"blocks": 4, "format": "csv"},
    "verify": {"samples": 10**6, "format": "json"},
}
TYPES = {
    "alpha": float, "beta": float, "phi": float, "p": float, "p2": float, "blocks": int, "samples": int,
    "seed": int, "workers": int, "grid": int,
}


class UsageError(Exception):
    pass


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def read_config(path):
    """Flat ``key = value`` file; '#' starts a comment, blank lines ignored."""
    cfg = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        cfg[key] = _coerce(key, val)
    return cfg


def _coerce(key, val):
    if val in ("", "none", "None") and key in ("beta", "p2", "out", "format", "samples", "only"):
        return None
    try:
        if key == "phase_absorption":
            return _bool(val)
        if key == "only":
            return [int(v) for v in str(val).split(",")]
        return TYPES[key](val) if key in TYPES else val
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {val!r}") from exc


def _common(p):
    s = argparse.SUPPRESS
    p.add_argument("--config", default=s, help="flat key = value file; flags take precedence")
    p.add_argument("--show-config", action="store_true", default=s, help="print the resolved config and exit")
    p.add_argument("--family", choices=pr.FAMILIES, default=s)
    p.add_argument("--alpha", type=float, default=s)
    p.add_argument("--beta", type=float, default=s)
    p.add_argument("--phi", type=float, default=s)
    p.add_argument("--mode", choices=pr.MODES, default=s)
    p.add_argument("--basis", default=s, help="bell, computational or mbasis:x,theta")
    p.add_argument("--noise", choices=("none",) + NOISE_MODELS, default=s)
    p.add_argument("--p", type=float, default=s, help="noise parameter of the first C1 qubit (and the second)")
    p.add_argument("--p2", type=float, default=s, help="noise parameter of the second C1 qubit")
    p.add_argument("--rectify", choices=("none", "bitflip", "bitphaseflip"), default=s)
    p.add_argument("--noise-stage", choices=pr.STAGES, default=s)
    p.add_argument("--phase-absorption", action="store_true", default=s)
    p.add_argument("--blocks", type=int, default=s)
    p.add_argument("--samples", type=int, default=s)
    p.add_argument("--seed", type=int, default=s)
    p.add_argument("--measure", choices=scan.MEASURES, default=s)
    p.add_argument("--ties", choices=("exclude", "include"), default=s)
    p.add_argument("--out", default=s)
    p.add_argument("--format", choices=("csv", "json"), default=s)


def build_parser():
    parser = argparse.ArgumentParser(prog="qrepeater", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    cmds = {}
    cmds["fidelity"] = sub.add_parser("fidelity", help="fidelity of one configuration")
    cmds["sweep"] = sub.add_parser("sweep", help="fidelity table over a parameter grid")
    cmds["mc-advantage"] = sub.add_parser("mc-advantage", help="share of gW states where TD-TC wins")
    cmds["multiblock"] = sub.add_parser("multiblock", help="fidelity of chains of m blocks")
    cmds["verify"] = sub.add_parser("verify", help="run the verification suite")
    for p in cmds.values():
        _common(p)
    s = argparse.SUPPRESS
    cmds["sweep"].add_argument("--grid", type=int, default=s, help="points per axis (>= 2)")
    cmds["sweep"].add_argument("--over", choices=("alpha-beta", "p"), default=s)
    cmds["mc-advantage"].add_argument("--source", choices=("simulation", "formula"), default=s)
    cmds["mc-advantage"].add_argument("--workers", type=int, default=s)
    cmds["verify"].add_argument("--only", type=lambda v: [int(x) for x in v.split(",")], default=s)
    return parser


def resolve(args):
    """Defaults, then config file, then flags."""
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "show_config")}
    cfg = dict(DEFAULTS)
    cfg.update(COMMAND_DEFAULTS.get(args.command, {}))
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    cfg.update(flags)
    return cfg


def parse_basis(text):
    if text in ("bell", "default"):
        return None
    if text == "computational":
        return (1.0, 0.0)
    if text.startswith("mbasis:"):
        try:
            x, theta = (float(v) for v in text[len("mbasis:"):].split(","))
        except ValueError as exc:
            raise UsageError(f"bad basis {text!r}; expected mbasis:x,theta") from exc
        return (x, theta)
    raise UsageError(f"unknown basis {text!r}")


def make_spec(cfg, **over):
    c = dict(cfg, **over)
    noise = None if c["noise"] == "none" else c["noise"]
    policy = "noiseless" if c["rectify"] == "none" else c["rectify"]
    try:
        return pr.ProtocolSpec(
            c["family"], c["alpha"], c["beta"] if c["family"] == "gw" else None, c["phi"], c["mode"], noise,
            c["p"], c["p2"], policy, parse_basis(c["basis"]), bool(c["phase_absorption"]), c["noise_stage"],
        )
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------- commands


def cmd_fidelity(cfg):
    spec = make_spec(cfg)
    m = cfg["blocks"]
    if m < 1:
        raise UsageError("blocks must be >= 1")
    if m == 1:
        ops = pr.operators(spec)
        label, ref = an.reference_value(spec)
    else:
        ops = mb.compose_blocks(mb.BlockChain(m, spec))
        label, ref = _chain_reference(spec, m)
    sim = float(pr.ops_fidelity(ops))
    res = {"fidelity": sim, "closed_form": ref, "formula": label, "delta": None if ref is None else sim - ref}
    ok = ref is None or abs(sim - ref) <= TOL
    if cfg["samples"]:
        est, se = an.mc_fidelity(ops, cfg["samples"], cfg["seed"])
        res.update(monte_carlo=est, monte_carlo_std_error=se)
        ok &= abs(est - sim) <= MC_SIGMAS * se + 1e-12
    res["consistent"] = bool(ok)
    lines = [f"fidelity {output.short(sim)}"]
    if ref is not None:
        lines.append(f"closed form ({label}) {output.short(ref)}  delta {sim - ref:.3g}")
    if cfg["samples"]:
        lines.append(f"monte carlo {output.short(res['monte_carlo'])} +- {output.short(res['monte_carlo_std_error'])}")
    if not ok:
        lines.append("CONSISTENCY FAILURE: " + json.dumps({k: res[k] for k in res if k != "formula"}))
    return res, [res], lines, ok


def _chain_reference(spec, m):
    if spec.noise is not None or spec.mode == "mixed" or spec.basis is not None:
        return None, None
    if spec.family == "gghz" and not (spec.phase_absorption or np.isclose(np.cos(spec.phi) ** 2, 1)):
        return None, None
    key = f"{spec.family}_{'blocks' if spec.mode == 'tdtc' else 'single_blocks'}"
    params = {"alpha": spec.alpha} if spec.family == "gghz" else {"alpha": spec.alpha, "beta": spec.beta}
    return key, an.closed_form(key, m=m, **params)


def _axis(n):
    if n < 2:
        raise UsageError("grid resolution must be >= 2")
    return np.linspace(0, 1, n)


def cmd_sweep(cfg):
    if cfg["over"] == "alpha-beta":
        # alpha and beta come from the grid; any valid point carries the other settings
        spec = make_spec(cfg, alpha=0.3, beta=0.2)
        axis = _axis(cfg["grid"])
        rows = scan.sweep(spec, axis, axis if spec.family == "gw" else None)
        if spec.family == "gghz":
            for r in rows:
                r.pop("beta")
    else:
        make_spec(cfg)
        rows = []
        for p in _axis(cfg["grid"]):
            s = make_spec(cfg, p=float(p), p2=None)
            td = an.fidelity(pr.ProtocolSpec(**{**s.__dict__, "mode": "tdtc"}))
            sg = an.fidelity(pr.ProtocolSpec(**{**s.__dict__, "mode": "single", "correction_policy": "noiseless"}))
            row = {"p": float(p), "tdtc": td, "single": sg, "advantage": td > sg + 1e-12}
            row.update(scan._formulas(s, s.alpha, s.beta))
            rows.append(row)
    valid = [r for r in rows if r["tdtc"] is not None]
    lines = [f"{len(rows)} rows ({len(valid)} inside the parameter domain)"]
    if valid:
        best = max(valid, key=lambda r: r["tdtc"])
        where = ", ".join(f"{k}={output.short(best[k])}" for k in ("alpha", "beta", "p") if k in best)
        lines.append(f"max TD-TC fidelity {output.short(best['tdtc'])} at {where}")
        lines.append(f"advantage at {sum(bool(r['advantage']) for r in valid)} of {len(valid)} points")
    return {"rows": rows}, rows, lines, True


def cmd_mc_advantage(cfg):
    if cfg["family"] != "gw":
        raise UsageError("mc-advantage samples gW states; use --family gw")
    if cfg["samples"] < 10**4:
        raise UsageError("samples must be >= 10^4")
    if not 0 <= cfg["p"] <= 1:
        raise UsageError("p must lie in [0, 1]")
    noise = None if cfg["noise"] == "none" else cfg["noise"]
    res = scan.mc_advantage(noise, cfg["p"], cfg["samples"], cfg["seed"], cfg["measure"], cfg["ties"],
                            cfg["source"], cfg["workers"])
    res["region_mass"] = scan.region_mass(cfg["measure"]) if cfg["measure"] == "simplex" else None
    lines = [f"TD-TC better for {output.short(res['percent'])}% +- {output.short(res['std_error'])} "
             f"of {res['n_samples']} gW states ({res['measure']} measure, seed {res['seed']})"]
    return res, [res], lines, True


def cmd_multiblock(cfg):
    m_max = cfg["blocks"]
    if m_max < 1:
        raise UsageError("blocks must be >= 1")
    base = make_spec(cfg)
    rows, ok = [], True
    for m in range(1, m_max + 1):
        row = {"m": m}
        for mode in ("tdtc", "single"):
            s = pr.ProtocolSpec(**{**base.__dict__, "mode": mode,
                                   "correction_policy": base.correction_policy if mode == "tdtc" else "noiseless"})
            f = mb.chain_fidelity(mb.BlockChain(m, s))
            _, ref = _chain_reference(s, m)
            row[mode] = f
            row[f"{mode}_formula"] = ref
            if ref is not None and abs(f - ref) > TOL:
                ok = False
        row["advantage"] = row["tdtc"] > row["single"] + 1e-12
        rows.append(row)
    lines = [f"m={r['m']}: tdtc {output.short(r['tdtc'])}  single {output.short(r['single'])}" for r in rows]
    if not ok:
        lines.append("CONSISTENCY FAILURE: simulated chain differs from its closed form")
        for r in rows:
            for mode in ("tdtc", "single"):
                ref = r[f"{mode}_formula"]
                if ref is not None and abs(r[mode] - ref) > TOL:
                    lines.append(f"  m={r['m']} {mode}: simulated {r[mode]!r} closed form {ref!r}")
    return {"rows": rows, "consistent": ok}, rows, lines, ok


def _determinism():
    cfg = {**DEFAULTS, **COMMAND_DEFAULTS["mc-advantage"], "samples": 20000, "seed": 7}
    texts = []
    for _ in range(2):
        res, rows, _, _ = cmd_mc_advantage(cfg)
        rep = output.build_report("mc-advantage", cfg, res, cfg["seed"])
        texts.append(output.to_json(rep) + output.to_csv(rep, rows))
    return texts[0] == texts[1]


def cmd_verify(cfg):
    checks = acceptance.run_all(cfg["samples"], _determinism, set(cfg["only"]) if cfg["only"] else None)
    lines = [f"{'PASS' if c['passed'] else 'FAIL'}  {c['id']:>2}  {c['title']}" for c in checks]
    failed = [c["id"] for c in checks if not c["passed"]]
    lines.append(f"{len(checks) - len(failed)} of {len(checks)} checks passed"
                 + (f"; failed: {', '.join(map(str, failed))}" if failed else ""))
    rows = [{"id": c["id"], "title": c["title"], "passed": c["passed"], "details": c["details"]} for c in checks]
    return {"checks": checks, "passed": not failed}, rows, lines, not failed


COMMANDS = {
    "fidelity": cmd_fidelity,
    "sweep": cmd_sweep,
    "mc-advantage": cmd_mc_advantage,
    "multiblock": cmd_multiblock,
    "verify": cmd_verify,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args)
        if getattr(args, "show_config", False):
            print(json.dumps(cfg, sort_keys=True, indent=2))
            return 0
        results, rows, lines, ok = COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"qrepeater {args.command}: error: {exc}", file=sys.stderr)
        return 2
    # the destination path does not affect the content, so it is not echoed
    echo = {k: v for k, v in cfg.items() if k != "out"}
    report = output.build_report(args.command, echo, results, cfg["seed"])
    for line in lines:
        print(line)
    if cfg["out"]:
        try:
            output.write(report, rows, cfg["out"], cfg["format"])
        except OSError as exc:
            print(f"qrepeater {args.command}: error: cannot write output: {exc}", file=sys.stderr)
            return 2
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
