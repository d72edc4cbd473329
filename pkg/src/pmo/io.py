"""Problem files and report serialization.

A problem file is JSON::

    {"nvars": 3,
     "objective": [{"exps": [1, 0, 1], "coeff": 1.0}, ...],
     "matrix": {"m": 3, "entries": [{"i": 1, "j": 1, "poly": [...]}, ...]}}

with 1-based ``i <= j``; missing entries are zero.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Any, Optional

import jsonschema
import numpy as np

from pmo.polyalg import PolyMatrix, Polynomial, grlex_key
from pmo.schemas import validate


class ProblemFileError(ValueError):
    pass


@dataclass
class Problem:
    f: Polynomial
    G: PolyMatrix
    name: Optional[str] = None

    @property
    def nvars(self) -> int:
        return self.f.nvars


def _poly(terms, n: int, where: str) -> Polynomial:
    acc = {}
    for t in terms:
        exps = tuple(t["exps"])
        if len(exps) != n:
            raise ProblemFileError(f"{where}: exponent vector {list(exps)} has length {len(exps)}, expected {n}")
        acc[exps] = acc.get(exps, 0.0) + float(t["coeff"])
    return Polynomial(n, acc)


def parse_problem(data: Any) -> Problem:
    try:
        validate(data, "problem")
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ProblemFileError(f"schema violation at {path}: {e.message}") from None
    n = int(data["nvars"])
    f = _poly(data["objective"], n, "objective")
    m = int(data["matrix"]["m"])
    entries = {}
    for k, e in enumerate(data["matrix"]["entries"]):
        i, j = int(e["i"]), int(e["j"])
        if not 1 <= i <= j <= m:
            raise ProblemFileError(f"matrix entry {k}: need 1 <= i <= j <= {m}, got ({i}, {j})")
        if (i, j) in entries:
            raise ProblemFileError(f"matrix entry {k}: duplicate entry ({i}, {j})")
        entries[(i, j)] = _poly(e["poly"], n, f"matrix entry ({i}, {j})")
    G = PolyMatrix(n, m, {(i - 1, j - 1): p for (i, j), p in entries.items()})
    return Problem(f, G, data.get("name"))


def loads_problem(text: str) -> Problem:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemFileError(f"invalid JSON at line {e.lineno}, column {e.colno} (char {e.pos}): {e.msg}") from None
    return parse_problem(data)


def load_problem(path) -> Problem:
    with open(path, encoding="utf-8") as fh:
        return loads_problem(fh.read())


def _terms(p: Polynomial):
    return [{"exps": list(a), "coeff": float(p.coeff(a))} for a in sorted(p.terms, key=grlex_key)]


def problem_to_json(prob: Problem) -> dict:
    out = {}
    if prob.name is not None:
        out["name"] = prob.name
    out["nvars"] = prob.nvars
    out["objective"] = _terms(prob.f)
    ents = [{"i": i + 1, "j": j + 1, "poly": _terms(p)} for (i, j), p in sorted(prob.G.entries())]
    out["matrix"] = {"m": prob.G.m, "entries": ents}
    return out


def dumps_problem(prob: Problem) -> str:
    """Canonical text: terms in graded lex order, entries by ``(i, j)``."""
    return json.dumps(problem_to_json(prob), indent=2) + "\n"


# reports --------------------------------------------------------------------

FLOAT_FMT = "%.16e"
_PLACEHOLDER = re.compile(r'"\\u0000F(\d+)\\u0000"')


def _prepare(obj, floats):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        floats.append(v)
        return f"\x00F{len(floats) - 1}\x00"
    if isinstance(obj, np.ndarray):
        return [_prepare(v, floats) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _prepare(v, floats) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_prepare(v, floats) for v in obj]
    return obj


def dumps_report(obj, indent: int = 2) -> str:
    """JSON where every float is written with 17 significant digits."""
    floats = []
    text = json.dumps(_prepare(obj, floats), indent=indent)
    return _PLACEHOLDER.sub(lambda mt: FLOAT_FMT % floats[int(mt.group(1))], text)
