"""Fidelity and privacy scores, each on a 0-to-1 scale where 1 is best."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import OutOfRange, SchemaMismatch, TooFewValues, ZeroRange
from .model import DISCRETE_KINDS, Kind, Schema, Table
from .profile import CorrelationEntry, correlation_matrix, flag_notable_correlations, pearson

STATISTIC_SIMILARITY = "StatisticSimilarity"
KS_COMPLEMENT = "KSComplement"
TV_COMPLEMENT = "TVComplement"
CORRELATION_SIMILARITY = "CorrelationSimilarity"
NEW_ROW_SYNTHESIS = "NewRowSynthesis"

FIDELITY_METRICS = (STATISTIC_SIMILARITY, KS_COMPLEMENT, TV_COMPLEMENT, CORRELATION_SIMILARITY)


def _values(col: Iterable[Any]) -> np.ndarray:
    x = np.array([v for v in col if v is not None], dtype=float)
    return x[~np.isnan(x)]


def statistic_similarity(real_col: Sequence[float], synth_col: Sequence[float]) -> float:
    """1 - |mean difference| / range of the real column, clamped to [0, 1]. Not symmetric."""
    r = _values(real_col)
    s = _values(synth_col)
    if r.size == 0 or s.size == 0:
        raise TooFewValues("both columns need at least one value")
    span = r.max() - r.min()
    if span == 0:
        raise ZeroRange("real column has zero range")
    score = 1.0 - abs(r.mean() - s.mean()) / span
    return float(min(1.0, max(0.0, score)))


def ks_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|."""
    a = np.sort(_values(a))
    b = np.sort(_values(b))
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise TooFewValues("both samples need at least one value")
    grid = np.union1d(a, b)
    ca = np.searchsorted(a, grid, side="right").astype(np.int64)
    cb = np.searchsorted(b, grid, side="right").astype(np.int64)
    # integer numerator keeps the result exact up to the final division
    d = int(np.max(np.abs(ca * nb - cb * na)))
    return d / (na * nb)


def ks_complement(real_col: Sequence[float], synth_col: Sequence[float]) -> float:
    return 1.0 - ks_statistic(real_col, synth_col)


def _label_key(label: Any) -> tuple:
    return (type(label).__name__, label)


def tv_complement(real_col: Iterable[Any], synth_col: Iterable[Any]) -> float:
    """1 - total variation distance between the label frequencies of two columns."""
    cr = Counter(v for v in real_col if v is not None)
    cs = Counter(v for v in synth_col if v is not None)
    nr, ns = sum(cr.values()), sum(cs.values())
    if nr == 0 or ns == 0:
        raise TooFewValues("both columns need at least one label")
    labels = sorted(set(cr) | set(cs), key=_label_key)
    tv = 0.5 * math.fsum(abs(cr[k] / nr - cs[k] / ns) for k in labels)
    return float(min(1.0, max(0.0, 1.0 - tv)))


def correlation_similarity(r_real: float, r_synth: float) -> float:
    for r in (r_real, r_synth):
        if not -1.0 <= r <= 1.0:
            raise OutOfRange(f"correlation {r} outside [-1, 1]")
    return 1.0 - abs(r_real - r_synth) / 2.0


def _common_schema(real: Table, synth: Table) -> Schema:
    for spec in real.schema:
        if spec.name not in synth.schema:
            raise SchemaMismatch(f"synthetic table lacks column {spec.name!r}")
        if synth.schema[spec.name].kind is not spec.kind:
            raise SchemaMismatch(
                f"{spec.name}: real is {spec.kind.value}, synthetic is {synth.schema[spec.name].kind.value}")
    return real.schema


def new_row_synthesis(real: Table, synth: Table, numeric_tolerance: float = 0.0) -> float:
    """Share of synthetic rows that match no real row; 1.0 means nothing was copied.

    Discrete cells must be equal; continuous cells match when within
    ``numeric_tolerance`` times the real column's range. Synthetic columns
    absent from the real table are ignored.
    """
    schema = _common_schema(real, synth)
    if synth.n_rows == 0:
        raise TooFewValues("synthetic table is empty")
    names = schema.names
    cont = [i for i, c in enumerate(schema) if c.kind is Kind.CONTINUOUS]
    disc = [i for i, c in enumerate(schema) if c.kind is not Kind.CONTINUOUS]
    real_rows = real.rows()
    synth_rows = synth.select(names).rows()

    if numeric_tolerance == 0.0 or not cont:
        seen = set(real_rows)
        copies = sum(1 for row in synth_rows if row in seen)
        return 1.0 - copies / len(synth_rows)

    tol = []
    for i in cont:
        x = _values(real.column(names[i]))
        tol.append(numeric_tolerance * (x.max() - x.min()) if x.size else 0.0)
    buckets: dict[tuple, list[tuple]] = {}
    for row in real_rows:
        buckets.setdefault(tuple(row[i] for i in disc), []).append(tuple(row[i] for i in cont))

    def close(a, b, t):
        if a is None or b is None:
            return a is None and b is None
        return abs(a - b) <= t

    copies = 0
    for row in synth_rows:
        candidates = buckets.get(tuple(row[i] for i in disc), ())
        vals = tuple(row[i] for i in cont)
        if any(all(close(v, c, t) for v, c, t in zip(vals, cand, tol)) for cand in candidates):
            copies += 1
    return 1.0 - copies / len(synth_rows)


# -- report ----------------------------------------------------------------

@dataclass(frozen=True)
class MetricScore:
    metric: str
    columns: tuple[str, ...]
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise OutOfRange(f"{self.metric} score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class CorrelationScore:
    col_a: str
    col_b: str
    r_real: float
    r_synth: float
    score: float


@dataclass
class FidelityReport:
    scores: list[MetricScore]
    correlations: list[CorrelationScore]
    privacy: float
    ks_log_columns: tuple[str, ...] = ()
    aggregates: dict[str, dict[str, float]] = field(init=False)

    def __post_init__(self):
        self.aggregates = aggregate(self.scores)

    def column_scores(self, metric: str) -> dict[str, float]:
        return {s.columns[0]: s.score for s in self.scores if s.metric == metric}

    def to_dict(self) -> dict:
        return {
            "scores": [{"metric": s.metric, "columns": list(s.columns), "score": s.score}
                       for s in self.scores],
            "aggregates": self.aggregates,
            "correlations": [
                {"col_a": c.col_a, "col_b": c.col_b, "r_real": c.r_real, "r_synth": c.r_synth,
                 "score": c.score} for c in self.correlations],
            "privacy": {NEW_ROW_SYNTHESIS: self.privacy},
            "ks_log_columns": list(self.ks_log_columns),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        """One row per metric and column."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "column", "score"])
        for s in self.scores:
            w.writerow([s.metric, "|".join(s.columns), repr(s.score)])
        w.writerow([NEW_ROW_SYNTHESIS, "", repr(self.privacy)])
        return buf.getvalue()


def aggregate(scores: Iterable[MetricScore]) -> dict[str, dict[str, float]]:
    """Mean and across-column sample SD per metric."""
    by_metric: dict[str, list[float]] = {}
    for s in scores:
        by_metric.setdefault(s.metric, []).append(s.score)
    out = {}
    for metric in sorted(by_metric):
        x = np.array(by_metric[metric])
        out[metric] = {
            "mean": float(x.mean()),
            "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
            "n": int(x.size),
        }
    return out


def evaluate(real: Table, synth: Table, schema: Schema | None = None,
             flagged_pairs: Sequence[CorrelationEntry] | Sequence[tuple[str, str]] | None = None,
             ks_log_columns: Sequence[str] = (), numeric_tolerance: float = 0.0) -> FidelityReport:
    """Score ``synth`` against ``real`` column by column.

    Continuous columns get StatisticSimilarity and KSComplement; categorical,
    ordinal and binary columns get TVComplement. ``flagged_pairs`` defaults
    to the pairs with |r| > 0.5 in the real table. Columns in
    ``ks_log_columns`` are compared on the natural-log scale by KSComplement.
    """
    if schema is not None:
        real = real.select(schema.names) if schema.names != real.names else real
    schema = _common_schema(real, synth)

    scores: list[MetricScore] = []
    for spec in schema:
        rc, sc = real.column(spec.name), synth.column(spec.name)
        if spec.kind is Kind.CONTINUOUS:
            scores.append(MetricScore(STATISTIC_SIMILARITY, (spec.name,), statistic_similarity(rc, sc)))
            if spec.name in ks_log_columns:
                rc = [math.log(v) for v in rc if v is not None]
                sc = [math.log(v) for v in sc if v is not None]
            scores.append(MetricScore(KS_COMPLEMENT, (spec.name,), ks_complement(rc, sc)))
        elif spec.kind in DISCRETE_KINDS:
            scores.append(MetricScore(TV_COMPLEMENT, (spec.name,), tv_complement(rc, sc)))

    if flagged_pairs is None:
        flagged_pairs = flag_notable_correlations(correlation_matrix(real))
    correlations = []
    for pair in flagged_pairs:
        a, b = (pair.col_a, pair.col_b) if isinstance(pair, CorrelationEntry) else pair
        r_real = pearson(real.numeric(a), real.numeric(b))
        r_synth = pearson(synth.numeric(a), synth.numeric(b))
        score = correlation_similarity(r_real, r_synth)
        correlations.append(CorrelationScore(a, b, r_real, r_synth, score))
        scores.append(MetricScore(CORRELATION_SIMILARITY, (a, b), score))

    privacy = new_row_synthesis(real, synth, numeric_tolerance)
    return FidelityReport(scores, correlations, privacy, tuple(ks_log_columns))


def report_from_dict(d: Mapping[str, Any]) -> FidelityReport:
    scores = [MetricScore(s["metric"], tuple(s["columns"]), float(s["score"])) for s in d["scores"]]
    corrs = [CorrelationScore(c["col_a"], c["col_b"], c["r_real"], c["r_synth"], c["score"])
             for c in d.get("correlations", [])]
    return FidelityReport(scores, corrs, float(d["privacy"][NEW_ROW_SYNTHESIS]),
                          tuple(d.get("ks_log_columns", ())))
