from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from tabsynth.generator import GenerationConfig, generate
from tabsynth.metrics import evaluate
from tabsynth.model import Table
from tabsynth.profile import CategoricalSummary
from tabsynth.reporting import (TSTR_F1, build_comparison, ci_overlap, comparison_csv, format_cell,
                                mean_ci, rank_trials, tv_from_proportions)


def test_mean_ci_matches_t_interval():
    x = np.array([3.0, 5.0, 4.0, 6.0, 7.0])
    lo, hi = mean_ci(x.mean(), x.std(ddof=1), x.size)
    elo, ehi = stats.t.interval(0.95, x.size - 1, loc=x.mean(), scale=stats.sem(x))
    assert (lo, hi) == pytest.approx((elo, ehi))


def test_ci_overlap():
    assert ci_overlap((0, 2), (1, 3)) == 0.5
    assert ci_overlap((0, 2), (3, 4)) == 0.0
    assert ci_overlap((0, 2), (-1, 5)) == 1.0


def test_tv_from_proportions():
    s = CategoricalSummary((("a", 0.5), ("b", 0.5)))
    assert tv_from_proportions(s, ["a", "b"]) == 1.0
    assert tv_from_proportions(s, ["a", "a", "c", "c"]) == 0.5


def test_rank_ties_go_to_earlier(fixture_profile):
    t = generate(fixture_profile, GenerationConfig(n=139, seed=1))
    ranks = rank_trials(fixture_profile, [t, t, t])
    assert all(r.best == 0 and r.worst == 0 for r in ranks)
    assert {r.criterion for r in ranks} == {"ci_overlap", "TVComplement"}


def test_rank_prefers_closer_trial(fixture_profile, fixture_table):
    cols = {n: list(fixture_table.column(n)) for n in fixture_table.names}
    cols["BMI"] = [v + 3 for v in cols["BMI"]]
    bad = Table.from_columns(fixture_table.schema, cols)
    ranks = {r.column: r for r in rank_trials(fixture_profile, [bad, fixture_table])}
    assert ranks["BMI"].best == 1 and ranks["BMI"].worst == 0


def test_comparison_recomputable(fixture_table, fixture_profile):
    reports = {}
    for seed in (1, 2):
        synth = generate(fixture_profile, GenerationConfig(n=139, seed=seed))
        reports[f"s{seed}"] = evaluate(fixture_table, synth).to_dict()
    doc = build_comparison(reports, {"s1": {"f1": 0.7}}, {"avg": ["s1", "s2"]})
    assert doc["columns"] == ["s1", "s2", "avg"]
    rows = {r["metric"]: r["values"] for r in doc["rows"]}
    for metric in ("KSComplement", "TVComplement"):
        means = [reports[k]["aggregates"][metric]["mean"] for k in ("s1", "s2")]
        assert rows[metric]["avg"]["mean"] == pytest.approx(np.mean(means))
        assert rows[metric]["avg"]["sd"] == pytest.approx(np.std(means, ddof=1))
    assert rows[TSTR_F1]["s1"]["mean"] == 0.7 and rows[TSTR_F1]["s2"] is None
    text = comparison_csv(doc)
    assert text.splitlines()[0] == "metric,s1,s2,avg"
    with pytest.raises(KeyError):
        build_comparison(reports, groups={"g": ["nope"]})


def test_format_cell():
    assert format_cell(None) == "-"
    assert format_cell({"mean": 0.9651, "sd": 0.0592}) == "0.965±0.059"
    assert format_cell({"mean": 1.0, "sd": None}) == "1.000"
