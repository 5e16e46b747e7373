"""Comparison documents across synthetic datasets and best/worst trial ranking."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import stats

from .metrics import FIDELITY_METRICS, NEW_ROW_SYNTHESIS
from .model import Table
from .profile import CategoricalSummary, ContinuousSummary, StatisticalProfile

TSTR_F1 = "TSTR (F1)"
ROWS = FIDELITY_METRICS + (TSTR_F1, NEW_ROW_SYNTHESIS)


# -- comparison table ------------------------------------------------------------

def _cell(mean: float | None, sd: float | None = None, n: int = 1) -> dict | None:
    if mean is None:
        return None
    return {"mean": mean, "sd": sd if n > 1 else None, "n": n}


def fidelity_cells(report: Mapping[str, Any]) -> dict[str, dict | None]:
    """Table cells for one FidelityReport dict: aggregate mean and across-column SD per metric."""
    aggs = report.get("aggregates", {})
    out = {}
    for metric in FIDELITY_METRICS:
        a = aggs.get(metric)
        out[metric] = _cell(a["mean"], a["sd"], a["n"]) if a else None
    out[NEW_ROW_SYNTHESIS] = _cell(report["privacy"][NEW_ROW_SYNTHESIS])
    return out


def _group_cells(members: Sequence[dict[str, dict | None]]) -> dict[str, dict | None]:
    """Average column: mean and SD of the member datasets' headline values."""
    out = {}
    for metric in ROWS:
        vals = [m[metric]["mean"] for m in members if m.get(metric) is not None]
        if not vals:
            out[metric] = None
            continue
        x = np.array(vals)
        out[metric] = _cell(float(x.mean()), float(x.std(ddof=1)) if x.size > 1 else None, int(x.size))
    return out


def build_comparison(fidelity: Mapping[str, Mapping[str, Any]],
                     tstr: Mapping[str, Mapping[str, Any]] | None = None,
                     groups: Mapping[str, Sequence[str]] | None = None) -> dict:
    """Merge per-dataset reports into one document with a row per metric and a column per label.

    ``fidelity`` and ``tstr`` map a dataset label to a parsed report dict.
    ``groups`` adds averaged columns over existing labels.
    """
    tstr = tstr or {}
    columns: dict[str, dict[str, dict | None]] = {}
    for label in list(fidelity) + [k for k in tstr if k not in fidelity]:
        cells = fidelity_cells(fidelity[label]) if label in fidelity else {m: None for m in ROWS}
        cells[TSTR_F1] = _cell(tstr[label]["f1"]) if label in tstr else None
        columns[label] = cells
    for name, labels in (groups or {}).items():
        missing = [lb for lb in labels if lb not in columns]
        if missing:
            raise KeyError(f"group {name!r} refers to unknown labels {missing}")
        columns[name] = _group_cells([columns[lb] for lb in labels])
    labels = list(columns)
    return {
        "columns": labels,
        "rows": [{"metric": m, "values": {lb: columns[lb][m] for lb in labels}} for m in ROWS],
    }


def format_cell(cell: dict | None, places: int = 3) -> str:
    if cell is None:
        return "-"
    s = f"{cell['mean']:.{places}f}"
    if cell.get("sd") is not None:
        s += f"±{cell['sd']:.{places}f}"
    return s


def comparison_csv(doc: Mapping[str, Any], places: int = 3) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric"] + list(doc["columns"]))
    for row in doc["rows"]:
        w.writerow([row["metric"]] + [format_cell(row["values"][lb], places) for lb in doc["columns"]])
    return buf.getvalue()


def comparison_json(doc: Mapping[str, Any]) -> str:
    return json.dumps(doc, indent=2) + "\n"


# -- trial ranking ---------------------------------------------------------------

def mean_ci(mean: float, sd: float, n: int, level: float = 0.95) -> tuple[float, float]:
    """Two-sided t interval for a mean."""
    if n < 2:
        return (mean, mean)
    h = stats.t.ppf(0.5 + level / 2, n - 1) * sd / math.sqrt(n)
    return (mean - h, mean + h)


def ci_overlap(real_ci: tuple[float, float], synth_ci: tuple[float, float]) -> float:
    """Share of the real interval covered by the synthetic one, in [0, 1]."""
    lo = max(real_ci[0], synth_ci[0])
    hi = min(real_ci[1], synth_ci[1])
    width = real_ci[1] - real_ci[0]
    if width <= 0:
        return 1.0 if synth_ci[0] <= real_ci[0] <= synth_ci[1] else 0.0
    return max(0.0, hi - lo) / width


def _column_ci(values: Sequence[Any]) -> tuple[float, float]:
    x = np.array([v for v in values if v is not None], dtype=float)
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return mean_ci(float(x.mean()), sd, int(x.size))


@dataclass(frozen=True)
class ColumnRanking:
    column: str
    criterion: str
    scores: tuple[float, ...]
    best: int
    worst: int

    def to_dict(self) -> dict:
        return {"column": self.column, "criterion": self.criterion, "scores": list(self.scores),
                "best": self.best, "worst": self.worst}


def _best_worst(scores: Sequence[float]) -> tuple[int, int]:
    # ties go to the earlier trial in both directions
    best = worst = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
        if s < scores[worst]:
            worst = i
    return best, worst


def rank_trials(profile: StatisticalProfile, trials: Sequence[Table]) -> list[ColumnRanking]:
    """Best and worst trial per profiled column.

    Continuous columns are scored by the overlap of 95% mean intervals with
    the profile's; discrete columns by TVComplement against the profiled
    proportions.
    """
    if not trials:
        raise ValueError("no trials to rank")
    out = []
    for name, summary in profile.summaries:
        if isinstance(summary, ContinuousSummary):
            real_ci = mean_ci(summary.mean, summary.sd, profile.n)
            scores = tuple(ci_overlap(real_ci, _column_ci(t.column(name))) for t in trials)
            criterion = "ci_overlap"
        else:
            scores = tuple(tv_from_proportions(summary, t.column(name)) for t in trials)
            criterion = "TVComplement"
        b, w = _best_worst(scores)
        out.append(ColumnRanking(name, criterion, scores, b, w))
    return out


def tv_from_proportions(summary: CategoricalSummary, synth_col: Sequence[Any]) -> float:
    """TVComplement of a synthetic column against target proportions."""
    labels = [v for v in synth_col if v is not None]
    if not labels:
        return 0.0
    counts: dict[Any, int] = {}
    for v in labels:
        counts[v] = counts.get(v, 0) + 1
    keys = set(counts) | set(summary.labels)
    target = summary.as_dict()
    tv = 0.5 * math.fsum(abs(target.get(k, 0.0) - counts.get(k, 0) / len(labels)) for k in keys)
    return min(1.0, max(0.0, 1.0 - tv))


def ranking_to_dict(rankings: Sequence[ColumnRanking], labels: Sequence[str] | None = None) -> dict:
    d = {"columns": [r.to_dict() for r in rankings]}
    if labels is not None:
        d["trials"] = list(labels)
    return d

