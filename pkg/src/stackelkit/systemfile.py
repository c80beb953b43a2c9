"""JSON system files: chart, metric, integrals and an optional Stäckel matrix.

Matrices are given either as upper triangles (row i lists entries j >= i)
or as full symmetric matrices; every entry is an expression string (or a
plain number) in the scalar-field grammar.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema

from .scalarfield import Backend, Chart, ExpressionError, parse_expression
from .stackel import StackelError, StackelMatrix, StackelSystem, stackel_integrals
from .tensorcalc import Metric, QuadraticIntegral

_ENTRY = {"type": ["string", "number"]}
_MATRIX = {"type": "array", "minItems": 1, "items": {"type": "array", "items": _ENTRY}}

SYSTEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "stackelkit system file",
    "type": "object",
    "required": ["chart"],
    "properties": {
        "chart": {
            "type": "array", "minItems": 1, "uniqueItems": True,
            "items": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z_0-9]*$"},
        },
        "backend": {"enum": ["exact", "numeric"]},
        "metric": _MATRIX,
        "integrals": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["components"],
                "properties": {"label": {"type": "string"}, "components": _MATRIX},
                "additionalProperties": False,
            },
        },
        "stackel": _MATRIX,
        "hamiltonian_row": {"type": "integer", "minimum": 1},
        "description": {"type": "string"},
    },
    "anyOf": [{"required": ["metric"]}, {"required": ["stackel"]}],
    "additionalProperties": False,
}


class SchemaError(ValueError):
    pass


@dataclass
class SystemFile:
    chart: Chart
    backend: Backend
    metric: Metric
    integrals: list
    stackel: StackelMatrix = None
    hamiltonian_row: int = 0

    @property
    def n(self):
        return self.chart.dimension


def digest(raw: bytes) -> str:
    return "sha256:" + hashlib.sha256(raw).hexdigest()


def read_json(path):
    """Returns (data, raw bytes). ``builtin:NAME`` reads a shipped example."""
    if str(path).startswith("builtin:"):
        name = str(path).split(":", 1)[1]
        try:
            raw = resources.files("stackelkit").joinpath("data", f"{name}.json").read_bytes()
        except FileNotFoundError as exc:
            raise SchemaError(f"no built-in example {name!r}") from exc
    else:
        with open(path, "rb") as fh:
            raw = fh.read()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from exc
    return data, raw


def builtin_names():
    files = resources.files("stackelkit").joinpath("data").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def _matrix(rows, chart, backend, what):
    n = chart.dimension
    lengths = [len(r) for r in rows]
    if lengths == list(range(n, 0, -1)):
        full = [[None] * n for _ in range(n)]
        for i, r in enumerate(rows):
            for k, v in enumerate(r):
                full[i][i + k] = full[i + k][i] = v
        rows = full
    elif lengths != [n] * n:
        raise SchemaError(f"{what}: expected an upper triangle or a full {n}x{n} matrix")
    try:
        return [[parse_expression(str(v), chart, backend) for v in r] for r in rows]
    except ExpressionError as exc:
        raise SchemaError(f"{what}: {exc}") from exc


def _square(rows, chart, backend, what):
    n = chart.dimension
    if len(rows) != n or any(len(r) != n for r in rows):
        raise SchemaError(f"{what}: expected a full {n}x{n} matrix")
    try:
        return [[parse_expression(str(v), chart, backend) for v in r] for r in rows]
    except ExpressionError as exc:
        raise SchemaError(f"{what}: {exc}") from exc


def validate(data):
    try:
        jsonschema.validate(data, SYSTEM_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"schema violation at {where}: {exc.message}") from exc


def resolve_backend(data, override=None):
    """Explicit override, else the file's tag; ``None`` means exact when possible."""
    if override:
        return Backend(override)
    if "backend" in data:
        return Backend(data["backend"])
    return None


def _with_fallback(build, data, override):
    backend = resolve_backend(data, override)
    if backend is not None:
        return build(backend)
    try:
        return build(Backend.EXACT)
    except SchemaError:
        return build(Backend.NUMERIC)


def load_system(data, backend=None) -> SystemFile:
    """Build a :class:`SystemFile`; a file with only ``stackel`` is expanded via S I = P."""
    validate(data)

    def build(be):
        chart = Chart(tuple(data["chart"]))
        stackel = None
        row = int(data.get("hamiltonian_row", 1)) - 1
        if "stackel" in data:
            stackel = StackelMatrix(chart, _square(data["stackel"], chart, be, "stackel"), be)
        if "metric" not in data:
            try:
                system = stackel_integrals(stackel, row)
            except StackelError as exc:
                raise SchemaError(str(exc)) from exc
            return SystemFile(chart, be, system.metric, system.integrals[1:], stackel, row)
        try:
            metric = Metric(chart, _matrix(data["metric"], chart, be, "metric"), be)
            integrals = [
                QuadraticIntegral(
                    chart, _matrix(item["components"], chart, be, f"integrals[{k}]"),
                    item.get("label", f"I{k + 2}"), be,
                )
                for k, item in enumerate(data.get("integrals", []))
            ]
        except (ValueError, ArithmeticError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(str(exc)) from exc
        return SystemFile(chart, be, metric, integrals, stackel, row)

    return _with_fallback(build, data, backend)


def load_stackel(data, backend=None):
    """(StackelMatrix, 0-based Hamiltonian row) from a file carrying a ``stackel`` matrix."""
    validate(data)
    if "stackel" not in data:
        raise SchemaError("file has no 'stackel' matrix")

    def build(be):
        chart = Chart(tuple(data["chart"]))
        return StackelMatrix(chart, _square(data["stackel"], chart, be, "stackel"), be)

    return _with_fallback(build, data, backend), int(data.get("hamiltonian_row", 1)) - 1


def _upper(m):
    n = len(m)
    return [[m[i][j].to_text() for j in range(i, n)] for i in range(n)]


def system_to_json(system: StackelSystem, description=None) -> dict:
    S = system.source
    out = {"chart": list(system.chart.coordinate_names), "backend": system.metric.backend.value}
    if description:
        out["description"] = description
    out["metric"] = _upper(system.metric.components)
    out["integrals"] = [
        {"label": K.label, "components": _upper(K.components)} for K in system.integrals[1:]
    ]
    if S is not None:
        out["stackel"] = [[f.to_text() for f in row] for row in S.entries]
        out["hamiltonian_row"] = system.hamiltonian_row + 1
    return out
