"""
JSON and CSV exchange formats.

Matrices are stored as ``{"rows", "cols", "re", "im"}`` in row-major order.
Floats are written with 17 significant digits so that a write, read, write
cycle is byte-identical. Input documents are validated against JSON
schemas and errors carry the path of the offending field.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ValidationError
from .model import (
    BoundaryPair,
    BoundState,
    ExpPolyTerm,
    Grid,
    Potential,
    ScatteringData,
)

_NUM = {"type": "number"}
_MATRIX = {
    "type": "object",
    "required": ["rows", "cols", "re", "im"],
    "properties": {
        "rows": {"type": "integer", "minimum": 1},
        "cols": {"type": "integer", "minimum": 1},
        "re": {"type": "array", "items": _NUM},
        "im": {"type": "array", "items": _NUM},
    },
}
_GRID = {
    "type": "object",
    "required": ["start", "step", "count"],
    "properties": {"start": _NUM, "step": _NUM, "count": {"type": "integer", "minimum": 1}},
}
_TERM = {
    "type": "object",
    "required": ["C", "rate", "power"],
    "properties": {"C": _MATRIX, "rate": _NUM, "power": {"type": "integer", "minimum": 0}},
}

POTENTIAL_SCHEMA = {
    "type": "object",
    "required": ["n", "variant", "x_cut"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "variant": {"enum": ["zero", "sampled", "catalog"]},
        "x_cut": _NUM,
        "grid": {"oneOf": [_GRID, {"type": "null"}]},
        "values": {"oneOf": [{"type": "array", "items": _MATRIX}, {"type": "null"}]},
        "name": {"type": ["string", "null"]},
    },
}
BOUNDARY_SCHEMA = {
    "type": "object",
    "required": ["A", "B"],
    "properties": {"A": _MATRIX, "B": _MATRIX},
}
SCATTERING_SCHEMA = {
    "type": "object",
    "required": ["n", "variant", "s_inf"],
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "variant": {"enum": ["analytic", "sampled"]},
        "s_inf": _MATRIX,
        "right_terms": {"type": "array", "items": _TERM},
        "left_terms": {"type": "array", "items": _TERM},
        "k_grid": {"oneOf": [_GRID, {"type": "null"}]},
        "s_values": {"oneOf": [{"type": "array", "items": _MATRIX}, {"type": "null"}]},
        "bound_states": {
            "type": "array",
            "items": {"type": "object", "required": ["kappa", "M"],
                      "properties": {"kappa": _NUM, "M": _MATRIX}},
        },
    },
}


# ---------------------------------------------------------------------------
# serialization


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValidationError(f"cannot serialize non-finite value {x}")
    s = format(x, ".17g")
    return s if ("e" in s or "." in s) else s + ".0"


def _dump(obj, indent=0) -> str:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(str(k))}: {_dump(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_dump(v) for v in obj) + "]"
        return "[\n" + ",\n".join(f"{pad}  {_dump(v, indent + 1)}" for v in obj) + f"\n{pad}]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return json.dumps(obj)


def dumps(obj) -> str:
    return _dump(obj) + "\n"


def matrix_to_json(M) -> dict:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    return {"rows": int(M.shape[0]), "cols": int(M.shape[1]),
            "re": [float(v) for v in M.real.ravel()], "im": [float(v) for v in M.imag.ravel()]}


def matrix_from_json(d, path="matrix") -> np.ndarray:
    r, c = d["rows"], d["cols"]
    if len(d["re"]) != r * c or len(d["im"]) != r * c:
        raise ValidationError(f"{path}: expected {r * c} entries in re and im", {"path": path})
    M = np.empty(r * c, dtype=complex)
    M.real = d["re"]
    M.imag = d["im"]
    return M.reshape(r, c)


def grid_to_json(g: Grid) -> dict:
    return {"start": float(g.start), "step": float(g.step), "count": int(g.count)}


def _grid_from_json(d):
    return None if d is None else Grid(float(d["start"]), float(d["step"]), int(d["count"]))


def potential_to_json(V: Potential) -> dict:
    d = {"n": V.n, "variant": V.variant, "x_cut": float(V.x_cut), "grid": None, "values": None, "name": V.name}
    if V.variant == "sampled":
        d["grid"] = grid_to_json(V.grid)
        d["values"] = [matrix_to_json(v) for v in V.values]
    return d


def boundary_to_json(pair: BoundaryPair) -> dict:
    return {"A": matrix_to_json(pair.A), "B": matrix_to_json(pair.B)}


def _term_to_json(t: ExpPolyTerm) -> dict:
    return {"C": matrix_to_json(t.C), "rate": float(t.rate), "power": int(t.power)}


def scattering_to_json(data: ScatteringData) -> dict:
    d = {"n": data.n, "variant": data.variant, "s_inf": matrix_to_json(data.S_inf),
         "right_terms": [], "left_terms": [], "k_grid": None, "s_values": None,
         "bound_states": [{"kappa": float(s.kappa), "M": matrix_to_json(s.M)} for s in data.bound_states]}
    if data.variant == "analytic":
        d["right_terms"] = [_term_to_json(t) for t in data.fs.right_terms]
        d["left_terms"] = [_term_to_json(t) for t in data.fs.left_terms]
    else:
        d["k_grid"] = grid_to_json(data.k_grid)
        d["s_values"] = [matrix_to_json(v) for v in data.S_values]
    return d


# ---------------------------------------------------------------------------
# parsing


def _validate(doc, schema, kind):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        path = kind + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in exc.absolute_path)
        raise ValidationError(f"{path}: {exc.message}", {"path": path}) from None


def _check_shape(M, n, path):
    if M.shape != (n, n):
        raise ValidationError(f"{path}: expected a {n}x{n} matrix, got {M.shape[0]}x{M.shape[1]}",
                              {"path": path})
    return M


def potential_from_json(doc) -> Potential:
    _validate(doc, POTENTIAL_SCHEMA, "potential")
    n, variant = doc["n"], doc["variant"]
    if variant == "zero":
        return Potential.zero(n, x_cut=doc["x_cut"])
    if variant == "catalog":
        if not doc.get("name"):
            raise ValidationError("potential.name: catalog potentials need a name", {"path": "potential.name"})
        V = Potential.catalog(doc["name"])
        if V.n != n:
            raise ValidationError(f"potential.n: catalog entry has n={V.n}", {"path": "potential.n"})
        return V
    grid = _grid_from_json(doc.get("grid"))
    vals = doc.get("values")
    if grid is None or vals is None:
        raise ValidationError("potential.grid: sampled potentials need grid and values",
                              {"path": "potential.grid"})
    if len(vals) != grid.count:
        raise ValidationError(f"potential.values: expected {grid.count} matrices, got {len(vals)}",
                              {"path": "potential.values"})
    arr = np.array([_check_shape(matrix_from_json(v, f"potential.values[{i}]"), n, f"potential.values[{i}]")
                    for i, v in enumerate(vals)])
    V = Potential.sampled(grid, arr, x_cut=doc["x_cut"])
    if doc.get("name"):
        object.__setattr__(V, "name", doc["name"])
    return V


def boundary_from_json(doc) -> BoundaryPair:
    _validate(doc, BOUNDARY_SCHEMA, "boundary")
    A = matrix_from_json(doc["A"], "boundary.A")
    B = matrix_from_json(doc["B"], "boundary.B")
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ValidationError("boundary.B: A and B must be square of equal size", {"path": "boundary.B"})
    return BoundaryPair(A, B)


def _terms_from_json(items, n, side):
    out = []
    for i, t in enumerate(items):
        path = f"scattering_data.{side}[{i}]"
        C = _check_shape(matrix_from_json(t["C"], path + ".C"), n, path + ".C")
        try:
            out.append(ExpPolyTerm(C, t["rate"], t["power"]))
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc}", {"path": path}) from None
    return tuple(out)


def scattering_from_json(doc) -> ScatteringData:
    _validate(doc, SCATTERING_SCHEMA, "scattering_data")
    n = doc["n"]
    S_inf = _check_shape(matrix_from_json(doc["s_inf"], "scattering_data.s_inf"), n, "scattering_data.s_inf")
    bs = []
    for i, b in enumerate(doc.get("bound_states", [])):
        path = f"scattering_data.bound_states[{i}]"
        M = _check_shape(matrix_from_json(b["M"], path + ".M"), n, path + ".M")
        try:
            bs.append(BoundState(b["kappa"], M))
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc}", {"path": path}) from None
    if doc["variant"] == "analytic":
        return ScatteringData.analytic(S_inf, _terms_from_json(doc.get("right_terms", []), n, "right_terms"),
                                       _terms_from_json(doc.get("left_terms", []), n, "left_terms"), bs)
    grid = _grid_from_json(doc.get("k_grid"))
    vals = doc.get("s_values")
    if grid is None or vals is None:
        raise ValidationError("scattering_data.k_grid: sampled data need k_grid and s_values",
                              {"path": "scattering_data.k_grid"})
    if len(vals) != grid.count:
        raise ValidationError(f"scattering_data.s_values: expected {grid.count} matrices, got {len(vals)}",
                              {"path": "scattering_data.s_values"})
    S = np.array([_check_shape(matrix_from_json(v, f"scattering_data.s_values[{i}]"), n,
                               f"scattering_data.s_values[{i}]") for i, v in enumerate(vals)])
    return ScatteringData.sampled(grid, S, S_inf, bs)


# ---------------------------------------------------------------------------
# files


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})", {"path": str(path)}) from None
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read ({exc.strerror})", {"path": str(path)}) from None


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_potential(path) -> Potential:
    return potential_from_json(load_json(path))


def read_boundary(path) -> BoundaryPair:
    return boundary_from_json(load_json(path))


def read_scattering(path) -> ScatteringData:
    return scattering_from_json(load_json(path))


def matrix_csv(xname, xs, values) -> str:
    """CSV with a column for ``xs`` and real and imaginary columns for every entry."""
    values = np.asarray(values)
    n = values.shape[-1]
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = [xname]
    for i in range(n):
        for j in range(n):
            head += [f"re_{i + 1}{j + 1}", f"im_{i + 1}{j + 1}"]
    w.writerow(head)
    for x, M in zip(xs, values):
        row = [_fmt_float(float(x))]
        for i in range(n):
            for j in range(n):
                row += [_fmt_float(float(M[i, j].real)), _fmt_float(float(M[i, j].imag))]
        w.writerow(row)
    return buf.getvalue()
