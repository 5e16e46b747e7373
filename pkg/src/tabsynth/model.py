"""Typed tables: column specifications, the immutable ``Table`` and CSV I/O."""

from __future__ import annotations

import csv
import datetime as _dt
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateHeader,
    IoFailure,
    MissingColumn,
    NonNumericColumn,
    SchemaError,
    TypeMismatch,
    UnknownColumn,
)


class Kind(str, enum.Enum):
    CONTINUOUS = "continuous"
    ORDINAL = "ordinal"
    CATEGORICAL = "categorical"
    BINARY = "binary"
    # ISO-8601 dates; only used as input to date_diff_days
    DATE = "date"


DISCRETE_KINDS = (Kind.ORDINAL, Kind.CATEGORICAL, Kind.BINARY)
NUMERIC_KINDS = (Kind.CONTINUOUS, Kind.ORDINAL, Kind.BINARY)


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: Kind
    unit: str | None = None
    bounds: tuple[float, float] | None = None
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        if not self.name:
            raise SchemaError("column name must be non-empty")
        if self.bounds is not None:
            lo, hi = self.bounds
            if self.kind is Kind.ORDINAL:
                lo, hi = int(lo), int(hi)
            else:
                lo, hi = float(lo), float(hi)
            if lo > hi:
                raise SchemaError(f"{self.name}: bounds min {lo} > max {hi}")
            object.__setattr__(self, "bounds", (lo, hi))
        if self.kind in (Kind.CATEGORICAL, Kind.BINARY):
            if len(self.categories) < 2:
                raise SchemaError(f"{self.name}: needs at least 2 categories")
            if self.kind is Kind.BINARY and len(self.categories) != 2:
                raise SchemaError(f"{self.name}: binary column needs exactly 2 categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"{self.name}: duplicate categories")
        elif self.categories:
            raise SchemaError(f"{self.name}: categories only apply to categorical/binary")
        if self.kind is Kind.ORDINAL and self.bounds is None:
            raise SchemaError(f"{self.name}: ordinal column needs bounds")

    @property
    def levels(self) -> tuple:
        """Admissible values of a discrete column, in order."""
        if self.kind is Kind.ORDINAL:
            lo, hi = self.bounds
            return tuple(range(lo, hi + 1))
        if self.kind in (Kind.CATEGORICAL, Kind.BINARY):
            return self.categories
        raise NonNumericColumn(f"{self.name}: continuous column has no levels")

    def code(self, value: Any) -> float:
        """Numeric code of a cell (binary: category index)."""
        if value is None:
            return math.nan
        if self.kind is Kind.BINARY:
            return float(self.categories.index(value))
        if self.kind in (Kind.CONTINUOUS, Kind.ORDINAL):
            return float(value)
        raise NonNumericColumn(f"{self.name}: {self.kind.value} column has no numeric code")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name, "kind": self.kind.value}
        if self.unit is not None:
            d["unit"] = self.unit
        if self.bounds is not None:
            d["bounds"] = list(self.bounds)
        if self.categories:
            d["categories"] = list(self.categories)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ColumnSpec":
        bounds = d.get("bounds")
        return cls(
            name=d["name"],
            kind=Kind(d["kind"]),
            unit=d.get("unit"),
            bounds=tuple(bounds) if bounds is not None else None,
            categories=tuple(d.get("categories", ())),
        )


@dataclass(frozen=True)
class Schema:
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        seen = set()
        for c in self.columns:
            if c.name in seen:
                raise DuplicateHeader(c.name)
            seen.add(c.name)

    def __iter__(self) -> Iterator[ColumnSpec]:
        return iter(self.columns)

    def __len__(self) -> int:
        return len(self.columns)

    def __contains__(self, name: object) -> bool:
        return any(c.name == name for c in self.columns)

    def __getitem__(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise UnknownColumn(name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise UnknownColumn(name)

    def to_dict(self) -> dict:
        return {"columns": [c.to_dict() for c in self.columns]}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Schema":
        return cls(tuple(ColumnSpec.from_dict(c) for c in d["columns"]))


def load_schema(path: str | Path) -> Schema:
    try:
        with open(path, encoding="utf-8") as fh:
            return Schema.from_dict(json.load(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read schema {path}: {exc}") from exc


def save_schema(schema: Schema, path: str | Path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(schema.to_dict(), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write schema {path}: {exc}") from exc


# -- cells ---------------------------------------------------------------

def _check_cell(spec: ColumnSpec, value: Any, row: int, check_domain: bool) -> Any:
    """Normalise a python value for ``spec``; raise TypeMismatch if it does not fit."""
    if value is None:
        return None
    kind = spec.kind
    if kind is Kind.CONTINUOUS:
        if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, float, np.integer, np.floating)):
            raise TypeMismatch(row, spec.name, value, "expected a real number")
        value = float(value)
        if not math.isfinite(value):
            raise TypeMismatch(row, spec.name, value, "non-finite")
        if check_domain and spec.bounds and not spec.bounds[0] <= value <= spec.bounds[1]:
            raise TypeMismatch(row, spec.name, value, f"outside bounds {spec.bounds}")
        return value
    if kind is Kind.ORDINAL:
        if isinstance(value, (float, np.floating)) and float(value).is_integer():
            value = int(value)
        if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, np.integer)):
            raise TypeMismatch(row, spec.name, value, "expected an integer")
        value = int(value)
        if check_domain and not spec.bounds[0] <= value <= spec.bounds[1]:
            raise TypeMismatch(row, spec.name, value, f"outside bounds {spec.bounds}")
        return value
    if kind is Kind.DATE:
        if not isinstance(value, _dt.date):
            raise TypeMismatch(row, spec.name, value, "expected a date")
        return value
    value = str(value)
    if check_domain and value not in spec.categories:
        raise TypeMismatch(row, spec.name, value, "unknown category")
    return value


def _parse_cell(spec: ColumnSpec, text: str, row: int, check_domain: bool) -> Any:
    if text == "":
        return None
    kind = spec.kind
    try:
        if kind is Kind.CONTINUOUS:
            value: Any = float(text)
        elif kind is Kind.ORDINAL:
            try:
                value = int(text)
            except ValueError:
                f = float(text)
                if not f.is_integer():
                    raise
                value = int(f)
        elif kind is Kind.DATE:
            value = _dt.date.fromisoformat(text.strip())
        else:
            value = text
            if value not in spec.categories:
                value = _match_numeric_label(spec.categories, text)
    except ValueError:
        raise TypeMismatch(row, spec.name, text) from None
    return _check_cell(spec, value, row, check_domain)


def _match_numeric_label(categories: Sequence[str], text: str) -> str:
    # "1.0" written by a spreadsheet for category "1"
    try:
        x = float(text)
    except ValueError:
        return text
    for c in categories:
        try:
            if float(c) == x:
                return c
        except ValueError:
            continue
    return text


def format_cell(spec: ColumnSpec, value: Any) -> str:
    if value is None:
        return ""
    if spec.kind is Kind.CONTINUOUS:
        return repr(float(value))
    if spec.kind is Kind.ORDINAL:
        return str(int(value))
    if spec.kind is Kind.DATE:
        return value.isoformat()
    return str(value)


# -- table ---------------------------------------------------------------

@dataclass(frozen=True)
class Table:
    """Column-major immutable table. Missing cells are ``None``."""

    schema: Schema
    data: tuple[tuple[Any, ...], ...] = field(repr=False)

    def __post_init__(self):
        if len(self.data) != len(self.schema):
            raise SchemaError(
                f"{len(self.data)} data columns for {len(self.schema)} schema columns")
        lengths = {len(col) for col in self.data}
        if len(lengths) > 1:
            raise SchemaError(f"ragged columns: lengths {sorted(lengths)}")

    @classmethod
    def from_columns(cls, schema: Schema, columns: Mapping[str, Iterable[Any]] | Sequence[Iterable[Any]],
                     check_domain: bool = True) -> "Table":
        if isinstance(columns, Mapping):
            missing = [n for n in schema.names if n not in columns]
            if missing:
                raise MissingColumn(missing[0])
            raw = [columns[n] for n in schema.names]
        else:
            raw = list(columns)
        data = []
        for spec, values in zip(schema, raw):
            data.append(tuple(_check_cell(spec, _unbox(v), i, check_domain)
                              for i, v in enumerate(values)))
        return cls(schema, tuple(data))

    @classmethod
    def from_rows(cls, schema: Schema, rows: Iterable[Sequence[Any]],
                  check_domain: bool = True) -> "Table":
        rows = [tuple(r) for r in rows]
        for i, r in enumerate(rows):
            if len(r) != len(schema):
                raise TypeMismatch(i, "<row>", r, f"expected {len(schema)} cells")
        cols = list(zip(*rows)) if rows else [() for _ in schema]
        return cls.from_columns(schema, cols, check_domain=check_domain)

    @property
    def n_rows(self) -> int:
        return len(self.data[0]) if self.data else 0

    def __len__(self) -> int:
        return self.n_rows

    @property
    def names(self) -> tuple[str, ...]:
        return self.schema.names

    def column(self, name: str) -> tuple[Any, ...]:
        return self.data[self.schema.index(name)]

    def rows(self) -> list[tuple[Any, ...]]:
        return list(zip(*self.data)) if self.data else []

    def numeric(self, name: str) -> np.ndarray:
        """Column as float array; binary cells become category indices, missing become NaN."""
        spec = self.schema[name]
        if spec.kind not in NUMERIC_KINDS:
            raise NonNumericColumn(f"{name} is {spec.kind.value}")
        return np.array([spec.code(v) for v in self.column(name)], dtype=float)

    def non_missing(self, name: str) -> list[Any]:
        return [v for v in self.column(name) if v is not None]

    def select(self, names: Sequence[str]) -> "Table":
        specs = tuple(self.schema[n] for n in names)
        return Table(Schema(specs), tuple(self.column(n) for n in names))

    def with_column(self, spec: ColumnSpec, values: Iterable[Any],
                    check_domain: bool = True) -> "Table":
        if spec.name in self.schema:
            raise SchemaError(f"column {spec.name!r} already exists")
        col = tuple(_check_cell(spec, _unbox(v), i, check_domain) for i, v in enumerate(values))
        if self.data and len(col) != self.n_rows:
            raise SchemaError(f"{spec.name}: {len(col)} values for {self.n_rows} rows")
        return Table(Schema(self.schema.columns + (spec,)), self.data + (col,))

    def take(self, indices: Sequence[int]) -> "Table":
        return Table(self.schema, tuple(tuple(col[i] for i in indices) for col in self.data))


def _unbox(v: Any) -> Any:
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def load_table(path: str | Path, schema: Schema, check_domain: bool = True) -> Table:
    """Read a CSV file into a :class:`Table`.

    Header order does not matter; columns not in ``schema`` are ignored.
    Empty cells become missing. With ``check_domain=False`` bounds and
    category membership are not enforced, which lets a validator inspect
    externally produced files instead of rejecting them outright.
    """
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise MissingColumn(schema.names[0]) from None
            records = list(reader)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    header = [h.strip() for h in header]
    seen = set()
    for h in header:
        if h in seen:
            raise DuplicateHeader(h)
        seen.add(h)
    for name in schema.names:
        if name not in seen:
            raise MissingColumn(name)
    positions = [header.index(n) for n in schema.names]

    columns: list[list[Any]] = [[] for _ in schema]
    row_no = 0
    for rec in records:
        if not rec:
            continue
        if len(rec) != len(header):
            raise TypeMismatch(row_no, "<row>", rec, f"expected {len(header)} cells, got {len(rec)}")
        for j, (spec, pos) in enumerate(zip(schema, positions)):
            columns[j].append(_parse_cell(spec, rec[pos], row_no, check_domain))
        row_no += 1
    return Table(schema, tuple(tuple(c) for c in columns))


def save_table(table: Table, path: str | Path) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(table.names)
            for row in table.rows():
                writer.writerow([format_cell(s, v) for s, v in zip(table.schema, row)])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
