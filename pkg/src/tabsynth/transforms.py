"""Deterministic preprocessing steps applied to a table before profiling."""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence, Union

from .errors import NonBinaryComponent, NonPositiveValue, SchemaError, UnknownColumn
from .model import ColumnSpec, Kind, Schema, Table

_OPS: dict[str, Callable[[Any, Any], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
}


@dataclass(frozen=True)
class Dichotomize:
    """Binary column that is ``categories[1]`` where ``value op threshold`` holds.

    With ``reference`` set, the compared value is ``column - reference``; the
    KPS deterioration rule is ``Dichotomize("KPS_discharge", "KPS_deterioration",
    reference="KPS_preop", op="<", threshold=0)``.
    """

    column: str
    out: str
    op: str = ">"
    threshold: float = 0.0
    reference: str | None = None
    categories: tuple[str, str] = ("0", "1")

    def __post_init__(self):
        if self.op not in _OPS:
            raise SchemaError(f"unknown comparison {self.op!r}")


@dataclass(frozen=True)
class DateDiffDays:
    start: str
    end: str
    out: str


@dataclass(frozen=True)
class SumComponents:
    columns: tuple[str, ...]
    out: str


@dataclass(frozen=True)
class NaturalLog:
    column: str
    out: str


@dataclass(frozen=True)
class RowPredicate:
    """Serializable ``row[column] op value`` test. Missing cells never match."""

    column: str
    op: str
    value: Any

    def __call__(self, row: Mapping[str, Any]) -> bool:
        cell = row[self.column]
        if cell is None:
            return False
        return _OPS[self.op](cell, self.value)


@dataclass(frozen=True)
class DropRows:
    """Remove every row for which ``predicate(row_dict)`` is true."""

    predicate: Callable[[Mapping[str, Any]], bool]


@dataclass(frozen=True)
class DropColumns:
    columns: tuple[str, ...]


Transform = Union[Dichotomize, DateDiffDays, SumComponents, NaturalLog, DropRows, DropColumns]


def _require(schema: Schema, name: str) -> ColumnSpec:
    if name not in schema:
        raise UnknownColumn(name)
    return schema[name]


def _fresh(schema: Schema, name: str) -> None:
    if name in schema:
        raise SchemaError(f"output column {name!r} collides with an existing column")


def _dichotomize(table: Table, t: Dichotomize) -> Table:
    spec = _require(table.schema, t.column)
    ref = _require(table.schema, t.reference) if t.reference else None
    _fresh(table.schema, t.out)
    cmp = _OPS[t.op]
    vals = table.column(t.column)
    refs = table.column(t.reference) if ref else [0] * table.n_rows
    out = []
    for v, r in zip(vals, refs):
        if v is None or r is None:
            out.append(None)
            continue
        x = spec.code(v) - (ref.code(r) if ref else 0)
        out.append(t.categories[1] if cmp(x, t.threshold) else t.categories[0])
    new = ColumnSpec(t.out, Kind.BINARY, categories=tuple(t.categories))
    return table.with_column(new, out)


def _date_diff(table: Table, t: DateDiffDays) -> Table:
    for name in (t.start, t.end):
        if _require(table.schema, name).kind is not Kind.DATE:
            raise SchemaError(f"{name} is not a date column")
    _fresh(table.schema, t.out)
    out = [None if a is None or b is None else float((b - a).days)
           for a, b in zip(table.column(t.start), table.column(t.end))]
    return table.with_column(ColumnSpec(t.out, Kind.CONTINUOUS, unit="days"), out)


def _sum_components(table: Table, t: SumComponents) -> Table:
    specs = [_require(table.schema, c) for c in t.columns]
    for s in specs:
        if s.kind is not Kind.BINARY:
            raise NonBinaryComponent(f"{s.name} is {s.kind.value}, not binary")
    _fresh(table.schema, t.out)
    cols = [table.column(c) for c in t.columns]
    out = []
    for cells in zip(*cols):
        if any(c is None for c in cells):
            out.append(None)
        else:
            out.append(int(sum(s.code(c) for s, c in zip(specs, cells))))
    new = ColumnSpec(t.out, Kind.ORDINAL, bounds=(0, len(specs)))
    return table.with_column(new, out)


def _natural_log(table: Table, t: NaturalLog) -> Table:
    spec = _require(table.schema, t.column)
    if spec.kind not in (Kind.CONTINUOUS, Kind.ORDINAL):
        raise SchemaError(f"{t.column} is not numeric")
    _fresh(table.schema, t.out)
    out = []
    for i, v in enumerate(table.column(t.column)):
        if v is None:
            out.append(None)
            continue
        if v <= 0:
            raise NonPositiveValue(f"{t.column} row {i}: ln({v}) undefined")
        out.append(math.log(v))
    return table.with_column(ColumnSpec(t.out, Kind.CONTINUOUS, unit=f"ln({spec.unit or t.column})"), out)


def _drop_rows(table: Table, t: DropRows) -> Table:
    names = table.names
    keep = [i for i, row in enumerate(table.rows()) if not t.predicate(dict(zip(names, row)))]
    return table.take(keep)


def _drop_columns(table: Table, t: DropColumns) -> Table:
    for c in t.columns:
        _require(table.schema, c)
    return table.select([n for n in table.names if n not in t.columns])


_DISPATCH = {
    Dichotomize: _dichotomize,
    DateDiffDays: _date_diff,
    SumComponents: _sum_components,
    NaturalLog: _natural_log,
    DropRows: _drop_rows,
    DropColumns: _drop_columns,
}


def apply_transforms(table: Table, transforms: Sequence[Transform]) -> Table:
    """Apply ``transforms`` in order, returning a new table."""
    for t in transforms:
        table = _DISPATCH[type(t)](table, t)
    return table


def transform_from_dict(d: Mapping[str, Any]) -> Transform:
    kind = d["type"]
    if kind == "dichotomize":
        return Dichotomize(d["column"], d["out"], d.get("op", ">"), float(d.get("threshold", 0.0)),
                           d.get("reference"), tuple(d.get("categories", ("0", "1"))))
    if kind == "date_diff_days":
        return DateDiffDays(d["start"], d["end"], d["out"])
    if kind == "sum_components":
        return SumComponents(tuple(d["columns"]), d["out"])
    if kind == "natural_log":
        return NaturalLog(d["column"], d["out"])
    if kind == "drop_rows":
        p = d["predicate"]
        return DropRows(RowPredicate(p["column"], p["op"], p["value"]))
    if kind == "drop_columns":
        return DropColumns(tuple(d["columns"]))
    raise SchemaError(f"unknown transform type {kind!r}")
