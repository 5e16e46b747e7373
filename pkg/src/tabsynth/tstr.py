"""Train-synthetic-test-real benchmark with a boosted decision stump classifier."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (EmptyFeatures, FeatureMismatch, LengthMismatch, NoPositives, SchemaError,
                     SingleClassLabels, TypeMismatch)
from .model import Kind, Table

ERR_CLAMP = 1e-10
TIE_TOL = 1e-12
THRESHOLDS = tuple(round(k * 0.01, 2) for k in range(101))


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    polarity: int
    stage_weight: float

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ValueError("stump threshold must be finite")
        if self.polarity not in (1, -1):
            raise ValueError("polarity must be +1 or -1")
        if not self.stage_weight >= 0:
            raise ValueError("stage weight must be non-negative")

    def vote(self, X: np.ndarray) -> np.ndarray:
        """+polarity where the feature exceeds the threshold, -polarity elsewhere."""
        return np.where(X[:, self.feature] > self.threshold, self.polarity, -self.polarity)


@dataclass(frozen=True)
class AdaBoostModel:
    stumps: tuple[Stump, ...]
    feature_names: tuple[str, ...]
    n_stages: int
    seed: int = 0

    def __post_init__(self):
        if not self.stumps:
            raise ValueError("model needs at least one stump")
        if any(s.feature >= len(self.feature_names) for s in self.stumps):
            raise FeatureMismatch("stump refers to a feature the model does not have")

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "n_stages": self.n_stages,
            "seed": self.seed,
            "stumps": [{"feature": s.feature, "threshold": s.threshold, "polarity": s.polarity,
                        "stage_weight": s.stage_weight} for s in self.stumps],
        }


def _as_matrix(features) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    return X


def best_stump(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[int, float, int, float]:
    """Weighted-error-minimizing (feature, threshold, polarity, error).

    ``y`` holds -1/+1 and ``w`` sums to one. Candidate thresholds are the
    midpoints between consecutive distinct values of each feature. Near-ties
    (within 1e-12) go to the lowest feature, then the lowest threshold,
    then polarity +1. Returns feature -1 when no feature has two distinct values.
    """
    cands = []
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        uniq, start = np.unique(xs, return_index=True)
        if uniq.size < 2:
            continue
        pos = np.where(y[order] > 0, w[order], 0.0)
        neg = np.where(y[order] < 0, w[order], 0.0)
        # weight at or below each candidate split
        ends = np.append(start[1:], xs.size)[:-1]
        pos_le = np.cumsum(pos)[ends - 1]
        neg_le = np.cumsum(neg)[ends - 1]
        neg_total = neg.sum()
        pos_total = pos.sum()
        # polarity +1 predicts positive above the threshold
        err_plus = pos_le + (neg_total - neg_le)
        err_minus = neg_le + (pos_total - pos_le)
        cands.append((j, (uniq[:-1] + uniq[1:]) / 2.0, err_plus, err_minus))
    if not cands:
        return -1, 0.0, 1, 0.5
    m = min(min(c[2].min(), c[3].min()) for c in cands)
    for j, thr, ep, em in cands:
        for k in range(thr.size):
            if ep[k] <= m + TIE_TOL:
                return j, float(thr[k]), 1, float(ep[k])
            if em[k] <= m + TIE_TOL:
                return j, float(thr[k]), -1, float(em[k])
    raise AssertionError("unreachable")


def train_adaboost(features, labels: Sequence[int], n_stages: int = 50, seed: int = 0,
                   feature_names: Sequence[str] | None = None) -> AdaBoostModel:
    """Discrete two-class AdaBoost over decision stumps.

    Labels are 0/1. Training is deterministic; ``seed`` is recorded but the
    exhaustive stump search draws no random numbers. Boosting stops early
    when a stage is perfect or when a later stage cannot beat chance.
    """
    X = _as_matrix(features)
    y01 = np.asarray(labels, dtype=int)
    if n_stages < 1:
        raise ValueError("n_stages must be positive")
    if X.shape[1] == 0:
        raise EmptyFeatures("no feature columns")
    if X.shape[0] != y01.size:
        raise LengthMismatch(f"{X.shape[0]} feature rows, {y01.size} labels")
    if X.shape[0] < 2 or np.unique(y01).size < 2:
        raise SingleClassLabels("training labels need both classes")
    if not set(np.unique(y01)) <= {0, 1}:
        raise ValueError("labels must be 0 or 1")
    if np.isnan(X).any():
        raise ValueError("features contain missing values")
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    if len(names) != X.shape[1]:
        raise FeatureMismatch("feature_names length differs from feature count")

    y = np.where(y01 == 1, 1, -1)
    w = np.full(y.size, 1.0 / y.size)
    stumps: list[Stump] = []
    for stage in range(n_stages):
        j, thr, pol, err = best_stump(X, y, w)
        if err >= 0.5:
            if stage == 0:
                # nothing beats chance: keep one silent stump so the model predicts 0.5
                if j < 0:
                    j, thr = 0, float(X[0, 0])
                stumps.append(Stump(j, thr, pol, 0.0))
            break
        e = min(max(err, ERR_CLAMP), 1.0 - ERR_CLAMP)
        alpha = 0.5 * math.log((1.0 - e) / e)
        stump = Stump(j, thr, pol, alpha)
        stumps.append(stump)
        if err <= 0.0:
            break
        w = w * np.exp(-alpha * y * stump.vote(X))
        w = w / w.sum()
    return AdaBoostModel(tuple(stumps), names, n_stages, seed)


def decision_function(model: AdaBoostModel, features) -> np.ndarray:
    X = _as_matrix(features)
    if X.shape[1] != len(model.feature_names):
        raise FeatureMismatch(f"model has {len(model.feature_names)} features, got {X.shape[1]}")
    s = np.zeros(X.shape[0])
    for st in model.stumps:
        s += st.stage_weight * st.vote(X)
    return s


def predict_proba(model: AdaBoostModel, features) -> np.ndarray:
    """Positive-class probability (s/A + 1)/2 with A the total stage weight."""
    s = decision_function(model, features)
    total = sum(st.stage_weight for st in model.stumps)
    if total == 0:
        return np.full(s.size, 0.5)
    return np.clip((s / total + 1.0) / 2.0, 0.0, 1.0)


# -- threshold sweep -------------------------------------------------------------

@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self) -> float:
        return f1_score(self.precision, self.recall)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def f1_score(precision: float, recall: float) -> float:
    s = precision + recall
    return 2.0 * precision * recall / s if s else 0.0


def confusion(pred: np.ndarray, truth: np.ndarray) -> ConfusionMatrix:
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    return ConfusionMatrix(int(np.sum(pred & truth)), int(np.sum(pred & ~truth)),
                           int(np.sum(~pred & ~truth)), int(np.sum(~pred & truth)))


@dataclass(frozen=True)
class SweepRow:
    threshold: float
    precision: float
    recall: float
    f1: float
    matrix: ConfusionMatrix


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    best_threshold: float

    @property
    def best(self) -> SweepRow:
        return next(r for r in self.rows if r.threshold == self.best_threshold)

    def at(self, threshold: float) -> SweepRow:
        return next(r for r in self.rows if abs(r.threshold - threshold) < 1e-9)


def sweep_thresholds(probs: Sequence[float], truth: Sequence[int]) -> SweepResult:
    """Evaluate ``p > tau`` on the grid 0.00..1.00; the best F1 wins, ties go to the lowest tau."""
    p = np.asarray(probs, dtype=float)
    t = np.asarray(truth, dtype=int)
    if p.size != t.size:
        raise LengthMismatch(f"{p.size} probabilities, {t.size} labels")
    if not np.any(t == 1):
        raise NoPositives("truth has no positive cases")
    rows = []
    for tau in THRESHOLDS:
        cm = confusion(p > tau, t == 1)
        rows.append(SweepRow(tau, cm.precision, cm.recall, cm.f1, cm))
    best = rows[0]
    for r in rows[1:]:
        if r.f1 > best.f1:
            best = r
    return SweepResult(tuple(rows), best.threshold)


# -- end-to-end -----------------------------------------------------------------

@dataclass(frozen=True)
class TSTRConfig:
    target: str = "KPSDeterioration"
    n_stages: int = 50
    seed: int = 0
    include_log_columns: bool = False
    log_prefix: str = "ln_"


@dataclass
class TSTRReport:
    target: str
    features: tuple[str, ...]
    n_train: int
    n_test: int
    sweep: SweepResult
    model: AdaBoostModel
    config: TSTRConfig = field(default_factory=TSTRConfig)

    @property
    def best(self) -> SweepRow:
        return self.sweep.best

    def to_dict(self) -> dict:
        b = self.best
        return {
            "target": self.target,
            "features": list(self.features),
            "n_train": self.n_train,
            "n_test": self.n_test,
            "n_stages": self.config.n_stages,
            "seed": self.config.seed,
            "best_threshold": b.threshold,
            "precision": b.precision,
            "recall": b.recall,
            "f1": b.f1,
            "confusion_matrix": b.matrix.to_dict(),
            "sweep": [{"threshold": r.threshold, "precision": r.precision, "recall": r.recall,
                       "f1": r.f1, **r.matrix.to_dict()} for r in self.sweep.rows],
            "model": self.model.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def feature_columns(real: Table, target: str) -> list[str]:
    """Real-schema columns usable as numeric features: everything but categorical text and the target."""
    return [c.name for c in real.schema if c.kind is not Kind.CATEGORICAL and c.name != target]


def _matrix(table: Table, names: Sequence[str], log_cols: Sequence[str]) -> np.ndarray:
    cols = []
    for name in names:
        x = table.numeric(name)
        bad = np.flatnonzero(np.isnan(x))
        if bad.size:
            raise TypeMismatch(int(bad[0]), name, None, "missing value in feature column")
        cols.append(x)
    for name in log_cols:
        x = table.numeric(name)
        if np.any(x <= 0):
            raise ValueError(f"{name}: log feature needs positive values")
        cols.append(np.log(x))
    return np.column_stack(cols) if cols else np.empty((table.n_rows, 0))


def _target(table: Table, target: str) -> np.ndarray:
    spec = table.schema[target]
    if spec.kind is not Kind.BINARY:
        raise SchemaError(f"target {target!r} must be binary")
    y = table.numeric(target)
    if np.isnan(y).any():
        raise TypeMismatch(int(np.flatnonzero(np.isnan(y))[0]), target, None, "missing target")
    return y.astype(int)


def run_tstr(synth: Table, real: Table, target: str | None = None,
             config: TSTRConfig | None = None) -> TSTRReport:
    """Train on every synthetic row, score every real row, sweep thresholds.

    Features are the real schema's non-categorical columns other than the
    target, read from both tables by name; binary and ordinal columns enter
    as integer codes. With ``include_log_columns`` the natural logs of the
    continuous columns are appended, computed from the raw values.
    """
    config = config or TSTRConfig()
    target = target or config.target
    if target not in real.schema or target not in synth.schema:
        raise SchemaError(f"target {target!r} missing")
    if real.schema[target].categories != synth.schema[target].categories:
        raise SchemaError(f"target {target!r} has different labels in the two tables")
    names = feature_columns(real, target)
    for name in names:
        if name not in synth.schema:
            raise SchemaError(f"synthetic table lacks feature column {name!r}")
        if synth.schema[name].kind is not real.schema[name].kind:
            raise SchemaError(f"feature {name!r} has different kinds in the two tables")
    log_cols = ([n for n in names if real.schema[n].kind is Kind.CONTINUOUS]
                if config.include_log_columns else [])
    all_names = tuple(names) + tuple(config.log_prefix + n for n in log_cols)
    if not all_names:
        raise EmptyFeatures("no usable feature columns")

    X_train = _matrix(synth, names, log_cols)
    y_train = _target(synth, target)
    X_test = _matrix(real, names, log_cols)
    y_test = _target(real, target)

    model = train_adaboost(X_train, y_train, config.n_stages, config.seed, all_names)
    probs = predict_proba(model, X_test)
    sweep = sweep_thresholds(probs, y_test)
    return TSTRReport(target, all_names, synth.n_rows, real.n_rows, sweep, model, config)
