"""Reproducible report files (JSON or CSV) with an embedded content hash."""

import csv
import hashlib
import io
import json
import math

import numpy as np

from . import __version__

TOOL = "qrepeater"


def _clean(obj):
    """Plain JSON types, floats rounded to 15 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.15g}")
    return obj


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def build_report(command, config, results, seed=None):
    report = {
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "config": _clean(config),
        "seed": seed,
        "results": _clean(results),
    }
    report["content_hash"] = "sha256:" + hashlib.sha256(_canonical(report).encode()).hexdigest()
    return report


def check_hash(report):
    body = {k: v for k, v in report.items() if k != "content_hash"}
    return report.get("content_hash") == "sha256:" + hashlib.sha256(_canonical(body).encode()).hexdigest()


def to_json(report):
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.15g}"
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    return str(v)


def to_csv(report, rows):
    """CSV text: '#' metadata lines, header row, data rows.

    The hash line covers every other line of the file.
    """
    rows = _clean(rows)
    columns = list(rows[0].keys()) if rows else []
    head = [
        f"# tool={TOOL} version={__version__} command={report['command']}",
        "# config=" + _canonical(report["config"]),
        f"# seed={'' if report['seed'] is None else report['seed']}",
    ]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    body = "\n".join(head) + "\n" + buf.getvalue()
    digest = hashlib.sha256(body.encode()).hexdigest()
    return body + f"# content_hash=sha256:{digest}\n"


def check_csv_hash(text):
    lines = text.splitlines(keepends=True)
    last = lines[-1].strip()
    body = "".join(lines[:-1])
    return last == "# content_hash=sha256:" + hashlib.sha256(body.encode()).hexdigest()


def write(report, rows, path, fmt):
    text = to_json(report) if fmt == "json" else to_csv(report, rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return text


def short(x):
    """Six significant digits for terminal summaries."""
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)
