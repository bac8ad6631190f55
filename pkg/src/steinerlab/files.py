"""Instance file format and canonical JSON reports.

The .pts format is deliberately trivial: first non-comment line "d n", then
n whitespace-separated coordinate lines; '#' starts a comment.  Reports are
JSON with sorted keys and floats at 17 significant digits, so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .solver import Instance


class ParseError(ValueError):
    pass


def read_pts(path) -> Instance:
    text = Path(path).read_text(encoding="utf-8")
    return parse_pts(text, name=str(path))


def parse_pts(text: str, name: str = "<string>") -> Instance:
    rows = []
    header = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if header is None:
            if len(parts) != 2:
                raise ParseError(f"{name}:{lineno}: header must be 'd n'")
            try:
                header = (int(parts[0]), int(parts[1]))
            except ValueError as e:
                raise ParseError(f"{name}:{lineno}: bad header: {e}") from None
            continue
        try:
            rows.append([float(p) for p in parts])
        except ValueError as e:
            raise ParseError(f"{name}:{lineno}: bad coordinate: {e}") from None
    if header is None:
        raise ParseError(f"{name}: empty instance file")
    d, n = header
    if len(rows) != n:
        raise ParseError(f"{name}: expected {n} points, found {len(rows)}")
    for i, r in enumerate(rows):
        if len(r) != d:
            raise ParseError(f"{name}: point {i} has {len(r)} coordinates, expected {d}")
    try:
        return Instance(np.array(rows, dtype=float))
    except ValueError as e:
        raise ParseError(f"{name}: invalid instance: {e}") from None


def write_pts(path, inst: Instance, comment: str | None = None) -> None:
    lines = []
    if comment:
        lines.extend(f"# {c}" for c in comment.splitlines())
    lines.append(f"{inst.d} {inst.n}")
    for p in inst.terminals:
        lines.append(" ".join(format_float(x) for x in p))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def to_canonical_json(obj) -> str:
    """Sorted keys, floats at 17 significant digits, no NaN/inf."""
    return _encode(obj)


def _encode(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            raise ValueError("reports may not contain NaN or infinity")
        return format_float(x)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, (set, frozenset)):
        return _encode(sorted(obj))
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(json.dumps(k) + ":" + _encode(v) for k, v in items) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def write_report(path, payload: dict) -> str:
    text = to_canonical_json(payload)
    Path(path).write_text(text + "\n", encoding="utf-8")
    return text
