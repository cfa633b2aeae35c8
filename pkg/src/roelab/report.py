"""Deterministic JSON reports and tolerance-aware report diffing."""

from __future__ import annotations

import dataclasses
import json
import math

from .errors import SchemaMismatch

TOOL_VERSION = "0.1.0"


def jsonable(obj):
    """Convert results (dataclasses, numpy scalars/arrays, tuples) to plain JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, "ndim") and getattr(obj, "ndim") > 0:
        return jsonable(obj.tolist())
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return jsonable(obj.item())
    if isinstance(obj, float) and (math.isinf(obj) or math.isnan(obj)):
        return repr(obj)
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    if hasattr(obj, "tolist"):
        return jsonable(obj.tolist())
    return repr(obj)


def results_bytes(results: dict) -> bytes:
    """Canonical byte serialization of a results section."""
    return json.dumps(jsonable(results), sort_keys=True, separators=(",", ":")).encode()


def make_report(command: str, config: dict, results: dict, wall_time: float) -> dict:
    return {
        "command": command,
        "config": jsonable(config),
        "version": TOOL_VERSION,
        "wall_time_s": wall_time,
        "results": jsonable(results),
    }


def report_diff(a: dict, b: dict, tol: float = 0.0) -> list:
    """Field-wise differences of two reports' results sections, up to tolerance."""
    if a.get("command") != b.get("command"):
        raise SchemaMismatch("reports come from different commands")
    diffs: list = []
    _diff(a.get("results"), b.get("results"), "results", tol, diffs)
    return diffs


def _diff(x, y, path, tol, out):
    if isinstance(x, dict) and isinstance(y, dict):
        for k in sorted(set(x) | set(y)):
            if k not in x or k not in y:
                out.append((path + "." + str(k), "missing"))
            else:
                _diff(x[k], y[k], path + "." + str(k), tol, out)
        return
    if isinstance(x, list) and isinstance(y, list):
        if len(x) != len(y):
            out.append((path, f"length {len(x)} != {len(y)}"))
            return
        for i, (xv, yv) in enumerate(zip(x, y)):
            _diff(xv, yv, f"{path}[{i}]", tol, out)
        return
    if isinstance(x, (int, float)) and isinstance(y, (int, float)) and not (
        isinstance(x, bool) or isinstance(y, bool)
    ):
        if abs(float(x) - float(y)) > tol:
            out.append((path, f"{x} != {y}"))
        return
    if x != y:
        out.append((path, f"{x!r} != {y!r}"))
