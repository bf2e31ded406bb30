"""Canonical report serialisation and atomic file output.

JSON is canonical: sorted keys, floats rendered with 17 significant digits
(enough to round-trip doubles bit-exactly), so identical (config, seed) runs
produce byte-identical reports.
"""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np

SCHEMA_VERSION = 1


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_canonical(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isinf(f):
            return "unbounded" if f > 0 else "-unbounded"
        if math.isnan(f):
            return None
        return float(f"{f:.17g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def to_canonical_json(report: dict) -> bytes:
    body = _canonical(report)
    text = json.dumps(body, sort_keys=True, indent=1, separators=(",", ": "))
    return (text + "\n").encode("utf-8")


def from_json(data: bytes) -> dict:
    return json.loads(data.decode("utf-8"))


def summary_text(report: dict) -> str:
    lines = [f"run: {report.get('command', '?')}  seed={report.get('seed', '?')}"]
    for name, section in sorted(report.get("analyses", {}).items()):
        verdict = section.get("verdict", section.get("holds", section.get("C", "")))
        lines.append(f"  {name}: verdict={verdict}")
        for key in sorted(section):
            if key in ("verdict",):
                continue
            val = section[key]
            if isinstance(val, (int, float, str, bool)) or val is None:
                lines.append(f"    {key} = {val}")
    lines.append(f"artifacts: {', '.join(report.get('artifacts', [])) or 'none'}")
    lines.append(f"wall_time_s: {report.get('wall_time_s', 'n/a')}")
    return "\n".join(lines) + "\n"


def atomic_write(path: str, data: bytes):
    """Write-then-rename so partial output is never observed."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-report-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
