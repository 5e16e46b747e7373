from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import stump_bruteforce
from tabsynth.errors import EmptyFeatures, FeatureMismatch, LengthMismatch, NoPositives, SingleClassLabels
from tabsynth.generator import GenerationConfig, generate
from tabsynth.model import ColumnSpec, Kind, Schema, Table
from tabsynth.tstr import (THRESHOLDS, AdaBoostModel, Stump, TSTRConfig, f1_score, predict_proba,
                           run_tstr, sweep_thresholds, train_adaboost)


def test_separable_1d():
    x = np.arange(11.0).reshape(-1, 1)
    y = (x[:, 0] > 5).astype(int)
    m = train_adaboost(x, y, n_stages=10)
    assert len(m.stumps) == 1
    assert m.stumps[0].threshold == 5.5 and m.stumps[0].polarity == 1
    assert np.array_equal(predict_proba(m, x) > 0.5, y == 1)


def test_single_class_and_empty():
    with pytest.raises(SingleClassLabels):
        train_adaboost([[1.0], [2.0]], [1, 1])
    with pytest.raises(EmptyFeatures):
        train_adaboost(np.empty((3, 0)), [0, 1, 0])


def test_hand_model_probability():
    stumps = (Stump(0, -1.0, 1, 1.0), Stump(0, -1.0, -1, 1.0), Stump(0, -1.0, 1, 2.0))
    m = AdaBoostModel(stumps, ("x",), 3)
    assert predict_proba(m, [[0.0]]).tolist() == [0.75]
    all_plus = AdaBoostModel((Stump(0, -1.0, 1, 1.0), Stump(0, -1.0, 1, 3.0)), ("x",), 2)
    assert predict_proba(all_plus, [[0.0]]).tolist() == [1.0]
    balanced = AdaBoostModel(stumps[:2], ("x",), 2)
    assert predict_proba(balanced, [[0.0]]).tolist() == [0.5]
    with pytest.raises(FeatureMismatch):
        predict_proba(m, [[0.0, 1.0]])


def test_eight_row_oracle():
    X = [[1, 5], [2, 3], [3, 8], [4, 1], [5, 7], [6, 2], [7, 6], [8, 4]]
    y = [0, 0, 1, 0, 1, 0, 1, 1]
    m = train_adaboost(X, y, n_stages=1)
    wrong, j, t, pol = stump_bruteforce(X, y)
    s = m.stumps[0]
    assert (s.feature, s.threshold, s.polarity) == (j, t, pol)


datasets = st.integers(2, 12).flatmap(lambda n: st.integers(1, 3).flatmap(lambda d: st.tuples(
    st.lists(st.lists(st.integers(0, 6).map(float), min_size=d, max_size=d), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(lambda y: 0 < sum(y) < len(y)),
)))


@settings(max_examples=150, deadline=None)
@given(datasets)
def test_stage_one_matches_bruteforce(data):
    X, y = data
    m = train_adaboost(X, y, n_stages=1)
    oracle = stump_bruteforce(X, y)
    s = m.stumps[0]
    if oracle is None:
        assert s.stage_weight == 0.0
        return
    wrong, j, t, pol = oracle
    if 2 * wrong >= len(y):
        assert s.stage_weight == 0.0
    else:
        assert (s.feature, s.threshold, s.polarity) == (j, t, pol)


@settings(max_examples=60, deadline=None)
@given(datasets)
def test_probabilities_and_relabel_symmetry(data):
    X, y = data
    m = train_adaboost(X, y, n_stages=5)
    p = predict_proba(m, X)
    assert np.all((p >= 0) & (p <= 1))
    flipped = train_adaboost(X, [1 - v for v in y], n_stages=5)
    assert np.allclose(predict_proba(flipped, X), 1 - p, atol=1e-9)
    assert predict_proba(train_adaboost(X, y, n_stages=5), X).tolist() == p.tolist()


def test_f1_reference_values():
    assert round(f1_score(0.581, 0.900), 3) == 0.706
    assert round(f1_score(0.569, 0.925), 3) == 0.705
    assert f1_score(0.0, 0.0) == 0.0


def _probs_for(tp, fp, fn, tn, tau):
    """Probabilities that give the requested confusion counts at threshold tau."""
    hi, lo = tau + 0.005, tau - 0.005
    probs = [hi] * tp + [hi] * fp + [lo] * fn + [lo] * tn
    truth = [1] * tp + [0] * fp + [1] * fn + [0] * tn
    return probs, truth


def test_sweep_reference_configurations():
    # 36 of 40 positives recovered with 62 predicted positives
    probs, truth = _probs_for(36, 26, 4, 73, 0.49)
    row = sweep_thresholds(probs, truth).at(0.49)
    assert round(row.precision, 3) == 0.581 and round(row.recall, 3) == 0.900
    assert round(row.f1, 3) == 0.706
    probs, truth = _probs_for(37, 28, 3, 71, 0.40)
    row = sweep_thresholds(probs, truth).at(0.40)
    assert round(row.precision, 3) == 0.569 and round(row.recall, 3) == 0.925
    assert round(row.f1, 3) == 0.705


def test_sweep_perfect_and_errors():
    res = sweep_thresholds([1, 1, 0, 0], [1, 1, 0, 0])
    assert res.best_threshold == 0.0 and res.best.f1 == 1.0
    assert [r.threshold for r in res.rows] == list(THRESHOLDS) and len(res.rows) == 101
    with pytest.raises(LengthMismatch):
        sweep_thresholds([0.1], [1, 0])
    with pytest.raises(NoPositives):
        sweep_thresholds([0.1, 0.2], [0, 0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=60)
       .filter(lambda v: any(t for _, t in v)))
def test_sweep_invariants(pairs):
    probs = [p for p, _ in pairs]
    truth = [t for _, t in pairs]
    res = sweep_thresholds(probs, truth)
    for r in res.rows:
        assert r.matrix.total == len(pairs)
        pred = [p > r.threshold for p in probs]
        tp = sum(1 for q, t in zip(pred, truth) if q and t)
        assert r.matrix.tp == tp
        assert res.best.f1 >= r.f1
    first = next(r for r in res.rows if r.f1 == res.best.f1)
    assert first.threshold == res.best_threshold


def _separable():
    schema = Schema((ColumnSpec("score", Kind.CONTINUOUS), ColumnSpec("grade", Kind.ORDINAL, bounds=(0, 4)),
                     ColumnSpec("tissue", Kind.CATEGORICAL, categories=("a", "b")),
                     ColumnSpec("KPSDeterioration", Kind.BINARY, categories=("0", "1"))))
    rng = np.random.default_rng(0)
    rows = []
    for i in range(60):
        y = i % 3 == 0
        rows.append((float(rng.uniform(5, 9) if y else rng.uniform(0, 4)), int(rng.integers(0, 5)),
                     "a" if i % 2 else "b", "1" if y else "0"))
    return Table.from_rows(schema, rows)


def test_separable_tstr():
    t = _separable()
    rep = run_tstr(t, t, "KPSDeterioration", TSTRConfig(n_stages=50))
    assert rep.best.f1 == 1.0
    assert rep.features == ("score", "grade")
    d = json.loads(rep.to_json())
    assert len(d["sweep"]) == 101 and d["f1"] == 1.0


def test_generated_tstr(fixture_table, fixture_profile):
    synth = generate(fixture_profile, GenerationConfig(n=1390, seed=0))
    rep = run_tstr(synth, fixture_table)
    assert rep.n_train == 1390 and rep.n_test == 139
    assert rep.best.f1 >= rep.sweep.at(0.5).f1
    again = run_tstr(synth, fixture_table)
    assert again.to_json() == rep.to_json()
    logged = run_tstr(synth, fixture_table, config=TSTRConfig(include_log_columns=True))
    assert logged.features[-3:] == ("ln_Age", "ln_BMI", "ln_LOS")
