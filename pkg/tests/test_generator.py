from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import binary_max_r, hamilton
from tabsynth.errors import CalibrationFailed, DegenerateBounds, InfeasibleTarget, NonPositiveBmi
from tabsynth.fixture import HISTOLOGY_COUNTS, LANDRIEL_COUNTS, N_PATIENTS
from tabsynth.generator import (GenerationConfig, derive_height_weight, generate, generate_with_manifest,
                                induce_correlation, sample_continuous)
from tabsynth.marginals import (ContinuousMargin, DiscreteMargin, allocate_categories,
                                fit_truncated_normal, frechet_bounds, round_within)
from tabsynth.model import save_table
from tabsynth.profile import CategoricalSummary, ContinuousSummary, correlation_matrix, pearson
from tabsynth.promptkit import validate_dataset


def cat(pairs):
    return CategoricalSummary(tuple(pairs))


def binary(p1):
    return DiscreteMargin(cat((("0", 1 - p1), ("1", p1))), (0.0, 1.0))


LANDRIEL = DiscreteMargin(cat(tuple((g, c / 139) for g, c in enumerate(LANDRIEL_COUNTS))),
                          tuple(float(g) for g in range(5)))
KPS = binary(40 / 139)


# -- marginals ----------------------------------------------------------------

def test_zero_sd_gives_mean():
    s = ContinuousSummary(mean=7.0, sd=0.0, min=7.0, max=7.0, skewness=0.0)
    assert sample_continuous(s, 5, np.random.default_rng(0)).tolist() == [7.0] * 5


def test_degenerate_bounds():
    s = ContinuousSummary(mean=7.0, sd=1.0, min=7.0, max=7.0, skewness=0.0)
    with pytest.raises(DegenerateBounds):
        sample_continuous(s, 5, np.random.default_rng(0))


@pytest.mark.parametrize("seed", range(5))
def test_truncated_sample_mean_within_two_se(seed):
    s = ContinuousSummary(mean=10.0, sd=2.0, min=4.0, max=16.0, skewness=0.0)
    x = sample_continuous(s, 1390, np.random.default_rng(seed))
    assert x.min() >= 4.0 and x.max() <= 16.0
    # bound checked against the standard error of the target distribution
    assert abs(x.mean() - 10.0) <= 2 * 2.0 / math.sqrt(1390)


@pytest.mark.parametrize("mean,sd,lo,hi", [(10, 2, 4, 16), (3.0, 1.5, 1.0, 10.0), (71.9, 6.0, 65, 95)])
def test_fit_truncated_normal_moments(mean, sd, lo, hi):
    mu, sigma = fit_truncated_normal(mean, sd, lo, hi)
    a, b = (lo - mu) / sigma, (hi - mu) / sigma
    m, v = stats.truncnorm.stats(a, b, loc=mu, scale=sigma, moments="mv")
    assert float(m) == pytest.approx(mean, abs=1e-6)
    assert math.sqrt(float(v)) == pytest.approx(sd, abs=1e-6)


def test_allocate_examples():
    assert allocate_categories(cat((("M", 0.5), ("F", 0.5))), 139) == {"M": 70, "F": 69}
    hist = cat(tuple((k, v / 139) for k, v in HISTOLOGY_COUNTS.items()))
    counts = allocate_categories(hist, 1390)
    assert abs(counts["Meningioma"] - 470) <= 1 and sum(counts.values()) == 1390
    assert allocate_categories(cat((("only", 1.0),)), 17) == {"only": 17}


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=1, max_size=8).filter(lambda c: sum(c) > 0),
       st.integers(1, 3000))
def test_allocate_matches_hamilton_oracle(counts, n):
    total = sum(counts)
    s = cat(tuple((f"c{i}", c / total) for i, c in enumerate(counts)))
    got = list(allocate_categories(s, n).values())
    assert got == hamilton([c / total for c in counts], n)
    assert sum(got) == n
    assert all(abs(g - n * c / total) < 1 for g, c in zip(got, counts))


def test_round_within_keeps_grid_inside_bounds():
    x = round_within(np.array([1.004, 2.996, 2.0]), 2, 1.005, 2.995)
    assert x.tolist() == [1.01, 2.99, 2.0]


# -- correlation induction ------------------------------------------------------

def test_frechet_bound_matches_analytic():
    lo, hi = frechet_bounds(binary(0.01), binary(0.5))
    assert hi == pytest.approx(binary_max_r(0.01, 0.5), abs=1e-3)
    assert lo == pytest.approx(-binary_max_r(0.01, 0.5), abs=1e-3)


def test_infeasible_target():
    with pytest.raises(InfeasibleTarget):
        induce_correlation(binary(0.01), binary(0.5), 0.95, 1390, np.random.default_rng(0))
    with pytest.raises(InfeasibleTarget):
        induce_correlation(KPS, LANDRIEL, 1.0, 1390, np.random.default_rng(0))


def test_zero_target_is_independent():
    pair = induce_correlation(KPS, LANDRIEL, 0.0, 1390, np.random.default_rng(3))
    assert abs(pearson(pair.a.astype(float), pair.b.astype(float))) <= 0.05


@pytest.mark.parametrize("seed", range(5))
def test_kps_landriel_target(seed):
    pair = induce_correlation(KPS, LANDRIEL, 0.57, 1390, np.random.default_rng(seed))
    r = pearson(pair.a.astype(float), pair.b.astype(float))
    assert 0.52 <= r <= 0.62
    assert r == pytest.approx(pair.realized_r)
    # quotas survive the coupling exactly
    assert np.bincount(pair.a, minlength=2).tolist() == KPS.counts(1390).tolist()
    assert np.bincount(pair.b, minlength=5).tolist() == LANDRIEL.counts(1390).tolist()


def test_calibration_failure_reports_diagnostics():
    with pytest.raises(CalibrationFailed) as exc:
        induce_correlation(KPS, LANDRIEL, 0.57, 1390, np.random.default_rng(0), tolerance=0.001,
                           max_iters=1)
    assert exc.value.iterations >= 1 and math.isfinite(exc.value.achieved_r)


def test_continuous_pair():
    a = ContinuousMargin(0.0, 10.0, 5.0, 2.0)
    b = ContinuousMargin(0.0, 4.0, 1.0, 1.5, log=True)
    pair = induce_correlation(a, b, -0.4, 2000, np.random.default_rng(9))
    assert abs(pearson(pair.a, pair.b) + 0.4) <= 0.05


# -- height and weight ---------------------------------------------------------

def test_forced_height():
    h, w = derive_height_weight([25.0], heights=[170.0])
    assert w.tolist() == [72.25]


def test_non_positive_bmi():
    with pytest.raises(NonPositiveBmi):
        derive_height_weight([25.0, 0.0], np.random.default_rng(0))


def test_fixture_heights_in_observed_band(fixture_table):
    h, w = derive_height_weight(fixture_table.column("BMI"), np.random.default_rng(2024))
    assert 166.74 <= h.mean() <= 174.87
    assert h.min() >= 145 and h.max() <= 200
    bmi = np.round(w / (h / 100) ** 2, 2)
    assert np.all(np.abs(bmi - np.round(fixture_table.column("BMI"), 2)) <= 0.01 + 1e-9)


# -- whole tables --------------------------------------------------------------

def test_generate_fixture_size(fixture_profile):
    t = generate(fixture_profile, GenerationConfig(n=N_PATIENTS, seed=11))
    assert t.n_rows == 139 and len(t.names) == 16
    assert validate_dataset(t, fixture_profile).passed


def test_generate_1390_correlation(fixture_profile):
    t = generate(fixture_profile, GenerationConfig(n=1390, seed=5))
    r = correlation_matrix(t, ["KPSDeterioration", "Landriel"]).r("KPSDeterioration", "Landriel")
    assert abs(r - 0.57) <= 0.05


def test_byte_identical_runs(tmp_path, fixture_profile):
    paths = []
    for i, workers in enumerate((1, 1, 4)):
        t = generate(fixture_profile, GenerationConfig(n=300, seed=42, workers=workers))
        p = tmp_path / f"g{i}.csv"
        save_table(t, p)
        paths.append(p.read_bytes())
    assert paths[0] == paths[1] == paths[2]


def test_manifest_records_calibration(fixture_profile):
    _, manifest = generate_with_manifest(fixture_profile, GenerationConfig(n=500, seed=1))
    (entry,) = manifest["correlations"]
    assert (entry["col_a"], entry["col_b"]) == ("KPSDeterioration", "Landriel")
    assert abs(entry["realized_r"] - 0.57) <= 0.05 and manifest["seed"] == 1
    assert manifest["skipped_pairs"] == []


def test_config_validation():
    with pytest.raises(ValueError):
        GenerationConfig(n=1)
    with pytest.raises(ValueError):
        GenerationConfig(n=10, correlation_tolerance=0.5)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_generated_tables_always_validate(fixture_profile, seed):
    t = generate(fixture_profile, GenerationConfig(n=139, seed=seed))
    report = validate_dataset(t, fixture_profile)
    assert report.passed, report.summary()
    for name, s in fixture_profile.summaries:
        if isinstance(s, ContinuousSummary):
            col = np.array(t.column(name))
            assert col.min() >= s.min and col.max() <= s.max
