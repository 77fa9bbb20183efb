"""Report assembly and emission as JSON or CSV.

JSON keys are sorted and every float is written with 17 significant digits,
which round-trips doubles exactly.  Non-finite floats become the strings
``"inf"``, ``"-inf"`` and ``"nan"``.  With ``deterministic`` set the report
carries no timestamp and no wall times, so identical inputs give identical
bytes.
"""

from __future__ import annotations

import csv
import datetime as _dt
import inspect
import io
import json
import math

import numpy as np

from .measure import Rect

CSV_COLUMNS = ("theorem_id", "seed", "epsilon", "worst_ratio", "witness", "status")


def _version():
    from . import __version__

    return __version__


def _float(x):
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    text = format(x, ".17g")
    if all(c not in text for c in ".en"):
        text += ".0"
    return text


def to_plain(obj, deterministic=False):
    """Convert results to JSON-compatible values (floats kept as floats)."""
    if hasattr(obj, "to_dict"):
        if "deterministic" in inspect.signature(obj.to_dict).parameters:
            return to_plain(obj.to_dict(deterministic=deterministic), deterministic)
        return to_plain(obj.to_dict(), deterministic)
    if isinstance(obj, Rect):
        return obj.to_list()
    if isinstance(obj, dict):
        return {str(k): to_plain(v, deterministic) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v, deterministic) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist(), deterministic)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _dump(obj, out, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj)
        for i, k in enumerate(keys):
            out.append(pad + json.dumps(k) + ": ")
            _dump(obj[k], out, indent, level + 1)
            out.append(",\n" if i < len(keys) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _dump(v, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    elif isinstance(obj, bool) or obj is None:
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent=2):
    out = []
    _dump(to_plain(obj), out, indent, 0)
    return "".join(out) + "\n"


def make_report(command, config, results, summary=None, deterministic=False):
    """Report dictionary: tool version, resolved config, results and summary."""
    report = {
        "tool": "strongrhi",
        "version": _version(),
        "command": command,
        "config": to_plain(config, deterministic),
        "results": to_plain(list(results), deterministic),
        "summary": to_plain(summary if summary is not None else {}, deterministic),
    }
    if not deterministic:
        report["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return report


def _csv_cell(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def verdict_rows(verdicts):
    rows = []
    for v in verdicts:
        d = v if isinstance(v, dict) else v.to_dict(deterministic=True)
        wit = d.get("witness")
        rows.append(
            [
                d["theorem_id"],
                _csv_cell(d.get("fingerprint", {}).get("seed")),
                _csv_cell(d.get("epsilon")),
                _csv_cell(d.get("worst_ratio")),
                "" if wit is None else json.dumps(wit),
                d["status"],
            ]
        )
    return rows


def emit_report(report, fmt="json") -> bytes:
    """Serialise a report; CSV flattens its verdicts."""
    if fmt == "json":
        return dumps(report).encode("utf-8")
    if fmt == "csv":
        verdicts = [r for r in report.get("results", []) if isinstance(r, dict) and "theorem_id" in r]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(verdict_rows(verdicts))
        return buf.getvalue().encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}")


def write_bytes(path, data):
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
