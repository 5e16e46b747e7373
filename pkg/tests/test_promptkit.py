from __future__ import annotations

import difflib
import json

import pytest

from tabsynth.errors import SchemaMismatch
from tabsynth.generator import GenerationConfig, generate
from tabsynth.model import ColumnSpec, Kind, Schema, Table
from tabsynth.profile import ProfileOptions, extract_profile
from tabsynth.promptkit import emit_prompt, validate_dataset
from tabsynth.rules import BmiToHeightWeight


def test_prompt_lists_all_columns(fixture_profile):
    text = emit_prompt(fixture_profile, 139)
    for name in fixture_profile.output_schema().names:
        assert name in text
    assert "r = 0.57" in text and "KPSDeterioration" in text


def test_amplification_changes_one_token(fixture_profile):
    a = emit_prompt(fixture_profile, 139).split()
    b = emit_prompt(fixture_profile, 1390).split()
    diff = [d for d in difflib.ndiff(a, b) if d[0] in "+-"]
    assert diff == ["- 139", "+ 1390"]


def test_no_correlation_clause(fixture_table):
    p = extract_profile(fixture_table, ProfileOptions(threshold=0.9))
    assert not p.flagged_correlations
    assert "correlation" not in emit_prompt(p, 139).lower()


def test_prompt_deterministic(fixture_profile):
    assert emit_prompt(fixture_profile, 139) == emit_prompt(fixture_profile, 139)
    with pytest.raises(ValueError):
        emit_prompt(fixture_profile, 0)


@pytest.fixture(scope="module")
def generated(fixture_profile):
    return generate(fixture_profile, GenerationConfig(n=139, seed=4))


def test_generated_passes(generated, fixture_profile):
    before = generated.data
    report = validate_dataset(generated, fixture_profile)
    assert report.passed
    assert generated.data == before
    json.loads(report.to_json())


def _replace(table: Table, name: str, row: int, value) -> Table:
    cols = {n: list(table.column(n)) for n in table.names}
    cols[name][row] = value
    return Table.from_columns(table.schema, cols, check_domain=False)


def test_bmi_violation(generated, fixture_profile):
    t = _replace(_replace(_replace(generated, "Height", 3, 170.0), "Weight", 3, 80.0), "BMI", 3, 25.0)
    report = validate_dataset(t, fixture_profile)
    assert not report.passed
    bad = report.calculation[next(k for k in report.calculation if k.startswith("BMI"))]
    assert bad == [{"row": 3, "expected": 27.68, "found": 25.0}]


def test_exp_violation(generated, fixture_profile):
    t = _replace(generated, "Age", 0, generated.column("Age")[0] + 1)
    report = validate_dataset(t, fixture_profile)
    assert [v["row"] for v in report.calculation["Age=exp(ln_Age)"]] == [0]


def test_row_count_and_missing(generated, fixture_profile):
    short = generated.take(range(138))
    report = validate_dataset(short, fixture_profile)
    assert not report.structural["row_count"] and not report.passed
    holed = _replace(generated, "Sex", 5, None)
    report = validate_dataset(holed, fixture_profile)
    assert report.missing_cells == [{"row": 5, "column": "Sex"}] and not report.passed


def test_range_violation(generated, fixture_profile):
    t = _replace(generated, "Histology", 2, "Unicorn")
    report = validate_dataset(t, fixture_profile)
    assert report.range[0]["row"] == 2 and report.range[0]["column"] == "Histology"
    # ASA 6 has zero share but lies inside the declared scale
    t = _replace(generated, "ASA", 1, 6)
    assert validate_dataset(t, fixture_profile).passed
    t = _replace(generated, "ASA", 1, 7)
    assert not validate_dataset(t, fixture_profile).passed


def test_missing_columns(generated, fixture_profile):
    t = generated.select([n for n in generated.names if n != "Weight"])
    report = validate_dataset(t, fixture_profile)
    assert report.missing_columns == ["Weight"] and not report.passed


def test_kind_mismatch(fixture_profile):
    schema = Schema((ColumnSpec("Age", Kind.CATEGORICAL, categories=("old", "young")),))
    t = Table.from_rows(schema, [("old",)])
    with pytest.raises(SchemaMismatch):
        validate_dataset(t, fixture_profile)


def test_explicit_rules(generated, fixture_profile):
    report = validate_dataset(generated, fixture_profile, rules=[BmiToHeightWeight("BMI")])
    assert list(report.calculation) == ["BMI=Weight/(Height/100)^2"]
