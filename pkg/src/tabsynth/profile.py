"""Statistical profiles: the univariate and bivariate summary of a real table."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import (
    DegenerateColumn,
    IoFailure,
    NonNumericColumn,
    SchemaError,
    TooFewValues,
    UnknownColumn,
    UnknownLabel,
)
from .model import ColumnSpec, Kind, NUMERIC_KINDS, Schema, Table
from .rules import (
    HEIGHT_BOUNDS_CM,
    BmiToHeightWeight,
    DerivedFeatureRule,
    ExpInverse,
    rule_from_dict,
)

SKEW_THRESHOLD = 1.0
DEFAULT_CORRELATION_THRESHOLD = 0.5


@dataclass(frozen=True)
class LogScaleSummary:
    mean: float
    sd: float
    min: float
    max: float


@dataclass(frozen=True)
class ContinuousSummary:
    mean: float
    sd: float
    min: float
    max: float
    skewness: float
    log_recommended: bool = False
    log_scale_summary: LogScaleSummary | None = None
    integer_valued: bool = False

    def to_dict(self) -> dict:
        d = {
            "mean": self.mean, "sd": self.sd, "min": self.min, "max": self.max,
            "skewness": self.skewness, "log_recommended": self.log_recommended,
            "integer_valued": self.integer_valued,
        }
        if self.log_scale_summary is not None:
            ls = self.log_scale_summary
            d["log_scale_summary"] = {"mean": ls.mean, "sd": ls.sd, "min": ls.min, "max": ls.max}
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ContinuousSummary":
        ls = d.get("log_scale_summary")
        return cls(
            mean=float(d["mean"]), sd=float(d["sd"]), min=float(d["min"]), max=float(d["max"]),
            skewness=float(d["skewness"]), log_recommended=bool(d["log_recommended"]),
            log_scale_summary=LogScaleSummary(**{k: float(v) for k, v in ls.items()}) if ls else None,
            integer_valued=bool(d.get("integer_valued", False)),
        )


@dataclass(frozen=True)
class CategoricalSummary:
    proportions: tuple[tuple[Any, float], ...]

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self.proportions)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.proportions], dtype=float)

    def as_dict(self) -> dict:
        return dict(self.proportions)

    def to_dict(self) -> dict:
        return {"proportions": [[label, p] for label, p in self.proportions]}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "CategoricalSummary":
        return cls(tuple((label, float(p)) for label, p in d["proportions"]))


Summary = Union[ContinuousSummary, CategoricalSummary]


@dataclass(frozen=True)
class CorrelationEntry:
    col_a: str
    col_b: str
    r: float

    def __post_init__(self):
        if self.col_a == self.col_b:
            raise SchemaError("correlation entry needs two distinct columns")
        if not abs(self.r) <= 1.0:
            raise SchemaError(f"|r| > 1: {self.r}")


@dataclass(frozen=True)
class CorrelationMatrix:
    columns: tuple[str, ...]
    values: np.ndarray = field(compare=False)

    def r(self, a: str, b: str) -> float:
        return float(self.values[self.columns.index(a), self.columns.index(b)])


# -- univariate ------------------------------------------------------------

def _clean(values: Iterable[Any]) -> np.ndarray:
    arr = np.array([v for v in values if v is not None], dtype=float)
    return arr[~np.isnan(arr)]


def _skewness(x: np.ndarray) -> float:
    """Adjusted Fisher-Pearson coefficient; 0 for constant or two-point samples."""
    n = x.size
    d = x - x.mean()
    m2 = np.mean(d**2)
    if n < 3 or m2 == 0.0:
        return 0.0
    m3 = np.mean(d**3)
    g1 = m3 / m2**1.5
    return float(g1 * math.sqrt(n * (n - 1)) / (n - 2))


def summarize_continuous(values: Iterable[Any], skew_threshold: float = SKEW_THRESHOLD) -> ContinuousSummary:
    x = _clean(values)
    if x.size < 2:
        raise TooFewValues(f"need at least 2 non-missing values, got {x.size}")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    lo, hi = float(x.min()), float(x.max())
    # keep min <= mean <= max despite summation rounding
    mean = min(max(mean, lo), hi)
    skew = _skewness(x)
    log_rec = abs(skew) > skew_threshold and lo > 0
    log_summary = None
    if log_rec:
        # math.log keeps these bounds bit-identical to ln columns built elsewhere
        lx = np.array([math.log(v) for v in x])
        log_summary = LogScaleSummary(
            mean=float(min(max(lx.mean(), lx.min()), lx.max())), sd=float(lx.std(ddof=1)),
            min=float(lx.min()), max=float(lx.max()))
    return ContinuousSummary(
        mean=mean, sd=sd, min=lo, max=hi, skewness=skew, log_recommended=bool(log_rec),
        log_scale_summary=log_summary, integer_valued=bool(np.all(x == np.round(x))),
    )


def summarize_categorical(values: Iterable[Any], spec: ColumnSpec) -> CategoricalSummary:
    """Proportions over non-missing cells, one entry per level of ``spec``."""
    levels = spec.levels
    counts = {level: 0 for level in levels}
    total = 0
    for v in values:
        if v is None:
            continue
        if v not in counts:
            raise UnknownLabel(f"{spec.name}: {v!r} not in {list(levels)}")
        counts[v] += 1
        total += 1
    if total == 0:
        raise TooFewValues(f"{spec.name}: no non-missing values")
    return CategoricalSummary(tuple((level, counts[level] / total) for level in levels))


# -- bivariate -------------------------------------------------------------

def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson r over pairwise-complete entries; NaN when either side is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = ~(np.isnan(x) | np.isnan(y))
    return _pearson(x[mask], y[mask])


def correlation_matrix(table: Table, columns: Sequence[str] | None = None,
                       strict: bool = False) -> CorrelationMatrix:
    """Pairwise-complete Pearson matrix on numeric codes.

    Zero-variance pairs are NaN, or raise :class:`DegenerateColumn` when
    ``strict`` is set.
    """
    if columns is None:
        columns = [c.name for c in table.schema if c.kind in NUMERIC_KINDS]
    columns = tuple(columns)
    arrays = []
    for name in columns:
        spec = table.schema[name]
        if spec.kind not in NUMERIC_KINDS:
            raise NonNumericColumn(f"{name} is {spec.kind.value}")
        arrays.append(table.numeric(name))
    k = len(columns)
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            x, y = arrays[i], arrays[j]
            mask = ~(np.isnan(x) | np.isnan(y))
            if mask.sum() < 3:
                raise TooFewValues(f"{columns[i]} x {columns[j]}: fewer than 3 complete rows")
            r = _pearson(x[mask], y[mask])
            if math.isnan(r) and strict:
                raise DegenerateColumn(f"{columns[i]} x {columns[j]}: zero variance")
            out[i, j] = out[j, i] = r
    return CorrelationMatrix(columns, out)


def flag_notable_correlations(matrix: CorrelationMatrix, threshold: float = DEFAULT_CORRELATION_THRESHOLD
                              ) -> list[CorrelationEntry]:
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    found = []
    k = len(matrix.columns)
    for i in range(k):
        for j in range(i + 1, k):
            r = float(matrix.values[i, j])
            if not math.isnan(r) and abs(r) > threshold:
                found.append(CorrelationEntry(matrix.columns[i], matrix.columns[j], r))
    # stable sort keeps matrix order among equal |r|
    found.sort(key=lambda e: -abs(e.r))
    return found


# -- profile ---------------------------------------------------------------

@dataclass(frozen=True)
class ProfileOptions:
    threshold: float = DEFAULT_CORRELATION_THRESHOLD
    skew_threshold: float = SKEW_THRESHOLD
    correlation_columns: tuple[str, ...] | None = None
    bmi_column: str | None = None
    height_name: str = "Height"
    weight_name: str = "Weight"
    log_prefix: str = "ln_"


@dataclass(frozen=True)
class StatisticalProfile:
    n: int
    schema: Schema
    summaries: tuple[tuple[str, Summary], ...]
    flagged_correlations: tuple[CorrelationEntry, ...] = ()
    derived_rules: tuple[DerivedFeatureRule, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise SchemaError("profile needs n >= 1")
        if tuple(name for name, _ in self.summaries) != self.schema.names:
            raise SchemaError("profile needs exactly one summary per schema column, in order")
        for e in self.flagged_correlations:
            for c in (e.col_a, e.col_b):
                if c not in self.schema:
                    raise UnknownColumn(c)
        for rule in self.derived_rules:
            ref = rule.bmi_col if isinstance(rule, BmiToHeightWeight) else rule.raw_out
            if ref not in self.schema:
                raise UnknownColumn(ref)

    def summary(self, name: str) -> Summary:
        for n, s in self.summaries:
            if n == name:
                return s
        raise UnknownColumn(name)

    def output_schema(self) -> Schema:
        """Schema of a generated table: profile columns with observed bounds, then rule outputs."""
        specs = []
        for spec in self.schema:
            s = self.summary(spec.name)
            if isinstance(s, ContinuousSummary):
                spec = ColumnSpec(spec.name, spec.kind, spec.unit, (s.min, s.max))
            specs.append(spec)
        for rule in self.derived_rules:
            specs.extend(_rule_specs(self, rule))
        return Schema(tuple(specs))

    def to_dict(self) -> dict:
        cols = []
        for spec in self.schema:
            entry = spec.to_dict()
            s = self.summary(spec.name)
            entry["summary"] = s.to_dict()
            cols.append(entry)
        return {
            "n": self.n,
            "columns": cols,
            "flagged_correlations": [
                {"col_a": e.col_a, "col_b": e.col_b, "r": e.r} for e in self.flagged_correlations],
            "derived_rules": [r.to_dict() for r in self.derived_rules],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "StatisticalProfile":
        specs = []
        summaries = []
        for c in d["columns"]:
            spec = ColumnSpec.from_dict(c)
            specs.append(spec)
            s = c["summary"]
            if spec.kind is Kind.CONTINUOUS:
                summaries.append((spec.name, ContinuousSummary.from_dict(s)))
            else:
                cat = CategoricalSummary.from_dict(s)
                if spec.kind is Kind.ORDINAL:
                    cat = CategoricalSummary(tuple((int(label), p) for label, p in cat.proportions))
                summaries.append((spec.name, cat))
        return cls(
            n=int(d["n"]),
            schema=Schema(tuple(specs)),
            summaries=tuple(summaries),
            flagged_correlations=tuple(
                CorrelationEntry(e["col_a"], e["col_b"], float(e["r"])) for e in d.get("flagged_correlations", [])),
            derived_rules=tuple(rule_from_dict(r) for r in d.get("derived_rules", [])),
        )


def _floor2(x: float) -> float:
    return math.floor(x * 100) / 100


def _ceil2(x: float) -> float:
    return math.ceil(x * 100) / 100


def _rule_specs(profile: StatisticalProfile, rule: DerivedFeatureRule) -> list[ColumnSpec]:
    if isinstance(rule, ExpInverse):
        raw = profile.schema[rule.raw_out]
        s = profile.summary(rule.raw_out)
        ls = s.log_scale_summary
        bounds = (ls.min, ls.max) if ls else None
        return [ColumnSpec(rule.log_col, Kind.CONTINUOUS, f"ln({raw.unit or raw.name})", bounds)]
    bmi = profile.summary(rule.bmi_col)
    h_lo, h_hi = HEIGHT_BOUNDS_CM
    w_bounds = (_floor2(bmi.min * (h_lo / 100) ** 2), _ceil2(bmi.max * (h_hi / 100) ** 2))
    return [
        ColumnSpec(rule.height_out, Kind.CONTINUOUS, "cm", HEIGHT_BOUNDS_CM),
        ColumnSpec(rule.weight_out, Kind.CONTINUOUS, "kg", w_bounds),
    ]


def extract_profile(table: Table, options: ProfileOptions | None = None) -> StatisticalProfile:
    options = options or ProfileOptions()
    if table.n_rows == 0:
        raise TooFewValues("empty table")
    summaries: list[tuple[str, Summary]] = []
    rules: list[DerivedFeatureRule] = []
    for spec in table.schema:
        if spec.kind is Kind.CONTINUOUS:
            s = summarize_continuous(table.column(spec.name), options.skew_threshold)
            if s.log_recommended:
                rules.append(ExpInverse(options.log_prefix + spec.name, spec.name))
        elif spec.kind in (Kind.ORDINAL, Kind.CATEGORICAL, Kind.BINARY):
            s = summarize_categorical(table.column(spec.name), spec)
        else:
            raise SchemaError(f"{spec.name}: {spec.kind.value} columns cannot be profiled; transform them first")
        summaries.append((spec.name, s))

    if options.bmi_column is not None:
        if table.schema[options.bmi_column].kind is not Kind.CONTINUOUS:
            raise SchemaError(f"{options.bmi_column} must be continuous")
        rules.append(BmiToHeightWeight(options.bmi_column, options.height_name, options.weight_name))

    columns = options.correlation_columns
    if columns is None:
        columns = tuple(c.name for c in table.schema if c.kind in NUMERIC_KINDS)
    flagged: list[CorrelationEntry] = []
    if len(columns) >= 2:
        flagged = flag_notable_correlations(correlation_matrix(table, columns), options.threshold)

    return StatisticalProfile(
        n=table.n_rows,
        schema=table.schema,
        summaries=tuple(summaries),
        flagged_correlations=tuple(flagged),
        derived_rules=tuple(rules),
    )


def save_profile(profile: StatisticalProfile, path: str | Path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(profile.to_dict(), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write profile {path}: {exc}") from exc


def load_profile(path: str | Path) -> StatisticalProfile:
    try:
        with open(path, encoding="utf-8") as fh:
            return StatisticalProfile.from_dict(json.load(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read profile {path}: {exc}") from exc
