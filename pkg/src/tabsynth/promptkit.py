"""Plain-language generation prompts and validation of externally generated tables."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from string import Template
from typing import Sequence

from .errors import SchemaMismatch
from .model import Kind, Schema, Table
from .profile import CategoricalSummary, ContinuousSummary, StatisticalProfile
from .rules import BmiToHeightWeight, DerivedFeatureRule, ExpInverse

TEMPLATE_NAME = "prompt_template.txt"
BMI_TOLERANCE = 0.01


def _template() -> Template:
    text = resources.files("tabsynth").joinpath("resources").joinpath(TEMPLATE_NAME).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines(keepends=True) if not ln.startswith("#")]
    return Template("".join(lines))


def _num(x: float, places: int) -> str:
    return f"{x:.{places}f}"


def _unit(spec) -> str:
    return f" ({spec.unit})" if spec.unit else ""


def _continuous_line(profile: StatisticalProfile, name: str, s: ContinuousSummary) -> str:
    spec = profile.schema[name]
    log_rule = next((r for r in profile.derived_rules
                     if isinstance(r, ExpInverse) and r.raw_out == name), None)
    whole = " Round to whole numbers." if s.integer_valued else ""
    if log_rule is not None and s.log_scale_summary is not None:
        ls = s.log_scale_summary
        return (
            f"- {log_rule.log_col}: natural log of {name}{_unit(spec)}; "
            f"mean {_num(ls.mean, 4)}, standard deviation {_num(ls.sd, 4)}, "
            f"range {_num(ls.min, 4)} to {_num(ls.max, 4)}. "
            f"Generate {log_rule.log_col} from these values, then also output {name} "
            f"with the log transformation removed ({name} = exp({log_rule.log_col})).{whole}"
        )
    return (
        f"- {name}{_unit(spec)}: mean {_num(s.mean, 2)}, standard deviation {_num(s.sd, 2)}, "
        f"range {_num(s.min, 2)} to {_num(s.max, 2)}.{whole}"
    )


def _categorical_line(name: str, s: CategoricalSummary) -> str:
    parts = ", ".join(f"{label} {100 * p:.2f}%" for label, p in s.proportions)
    return f"- {name}: {parts}."


def emit_prompt(profile: StatisticalProfile, n_target: int) -> str:
    """Render the generation prompt for ``profile``.

    ``n_target`` appears exactly once, so prompts for different sizes differ
    only in that number.
    """
    if n_target < 1:
        raise ValueError("n_target must be positive")
    columns = profile.output_schema().names
    cont, cat = [], []
    for name, s in profile.summaries:
        if isinstance(s, ContinuousSummary):
            cont.append(_continuous_line(profile, name, s))
        else:
            cat.append(_categorical_line(name, s))

    corr = ""
    if profile.flagged_correlations:
        lines = [
            f"- Maintain a Pearson correlation of r = {e.r:.2f} between {e.col_a} and {e.col_b}."
            for e in profile.flagged_correlations]
        corr = "\nRelationships between parameters:\n" + "\n".join(lines) + "\n"

    derived = ""
    bmi_rules = [r for r in profile.derived_rules if isinstance(r, BmiToHeightWeight)]
    if bmi_rules:
        lines = [
            f"- From each patient's {r.bmi_col}, create a {r.height_out} (cm) and a {r.weight_out} (kg) "
            f"value that are consistent with that {r.bmi_col}. Report both to two decimals."
            for r in bmi_rules]
        derived = "\nNew features:\n" + "\n".join(lines) + "\n"

    return _template().substitute(
        n_target=str(n_target),
        n_columns=str(len(columns)),
        column_list=", ".join(columns),
        continuous_block="\n".join(cont) if cont else "- none",
        categorical_block="\n".join(cat) if cat else "- none",
        correlation_block=corr,
        derived_block=derived,
    )


# -- validation ----------------------------------------------------------------

@dataclass
class ValidationReport:
    structural: dict[str, bool]
    calculation: dict[str, list[dict]]
    range: list[dict]
    missing_columns: list[str] = field(default_factory=list)
    missing_cells: list[dict] = field(default_factory=list)
    n_rows: int = 0
    expected_n: int = 0

    @property
    def passed(self) -> bool:
        return (all(self.structural.values())
                and not any(self.calculation.values())
                and not self.range)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "structural": self.structural,
            "n_rows": self.n_rows,
            "expected_n": self.expected_n,
            "missing_columns": self.missing_columns,
            "missing_cells": self.missing_cells,
            "calculation": self.calculation,
            "range": self.range,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def summary(self) -> str:
        lines = [f"overall: {'PASS' if self.passed else 'FAIL'}"]
        for check, ok in self.structural.items():
            lines.append(f"structural {check}: {'pass' if ok else 'FAIL'}")
        if self.missing_columns:
            lines.append(f"  missing columns: {', '.join(self.missing_columns)}")
        if not self.structural.get("row_count", True):
            lines.append(f"  rows: {self.n_rows}, expected {self.expected_n}")
        if self.missing_cells:
            lines.append(f"  missing cells: {len(self.missing_cells)}")
        for rule, bad in self.calculation.items():
            lines.append(f"calculation {rule}: {'pass' if not bad else f'FAIL ({len(bad)} rows)'}")
            for v in bad[:5]:
                lines.append(f"  row {v['row']}: expected {v['expected']}, found {v['found']}")
        lines.append(f"range: {'pass' if not self.range else f'FAIL ({len(self.range)} cells)'}")
        for v in self.range[:5]:
            lines.append(f"  row {v['row']} {v['column']}: {v['value']!r} ({v['reason']})")
        return "\n".join(lines) + "\n"


def _check_bmi(table: Table, rule: BmiToHeightWeight) -> list[dict]:
    bad = []
    cols = [table.column(c) for c in (rule.bmi_col, rule.height_out, rule.weight_out)]
    for i, (bmi, h, w) in enumerate(zip(*cols)):
        if bmi is None or h is None or w is None:
            continue
        if h <= 0:
            bad.append({"row": i, "expected": None, "found": bmi})
            continue
        expected = round(w / (h / 100.0) ** 2, 2)
        found = round(bmi, 2)
        if abs(expected - found) > BMI_TOLERANCE + 1e-9:
            bad.append({"row": i, "expected": expected, "found": found})
    return bad


def _check_exp(table: Table, rule: ExpInverse) -> list[dict]:
    bad = []
    for i, (ln, raw) in enumerate(zip(table.column(rule.log_col), table.column(rule.raw_out))):
        if ln is None or raw is None:
            continue
        try:
            expected = round(math.exp(ln), 2)
        except OverflowError:
            expected = math.inf
        found = round(raw, 2)
        if abs(expected - found) > BMI_TOLERANCE + 1e-9:
            bad.append({"row": i, "expected": expected, "found": found})
    return bad


def _rule_name(rule: DerivedFeatureRule) -> str:
    if isinstance(rule, BmiToHeightWeight):
        return f"{rule.bmi_col}={rule.weight_out}/({rule.height_out}/100)^2"
    return f"{rule.raw_out}=exp({rule.log_col})"


def _rule_columns(rule: DerivedFeatureRule) -> tuple[str, ...]:
    if isinstance(rule, BmiToHeightWeight):
        return (rule.bmi_col, rule.height_out, rule.weight_out)
    return (rule.log_col, rule.raw_out)


def validate_dataset(table: Table, profile: StatisticalProfile,
                     rules: Sequence[DerivedFeatureRule] | None = None,
                     expected_n: int | None = None) -> ValidationReport:
    """Check a generated table against the profile it was asked to follow.

    Structural checks cover column presence, row count and completeness;
    calculation checks cover BMI/height/weight and exp/ln pairs after
    rounding to hundredths; range checks cover bounds and category sets.
    A column whose kind differs from the expected one raises
    :class:`SchemaMismatch`. The table is not modified.
    """
    expected = profile.output_schema()
    rules = list(profile.derived_rules if rules is None else rules)
    expected_n = profile.n if expected_n is None else expected_n

    for name in table.names:
        if name in expected and table.schema[name].kind is not expected[name].kind:
            raise SchemaMismatch(
                f"{name}: table has {table.schema[name].kind.value}, expected {expected[name].kind.value}")

    missing_cols = [n for n in expected.names if n not in table.schema]
    missing_cells = [
        {"row": i, "column": name}
        for name in expected.names if name in table.schema
        for i, v in enumerate(table.column(name)) if v is None]
    structural = {
        "columns_present": not missing_cols,
        "row_count": table.n_rows == expected_n,
        "complete": not missing_cells,
    }

    calculation: dict[str, list[dict]] = {}
    for rule in rules:
        name = _rule_name(rule)
        if any(c not in table.schema for c in _rule_columns(rule)):
            calculation[name] = [{"row": None, "expected": "columns present", "found": "missing"}]
            continue
        if isinstance(rule, BmiToHeightWeight):
            calculation[name] = _check_bmi(table, rule)
        else:
            calculation[name] = _check_exp(table, rule)

    out_of_range = []
    for spec in expected:
        if spec.name not in table.schema:
            continue
        for i, v in enumerate(table.column(spec.name)):
            if v is None:
                continue
            if spec.kind in (Kind.CONTINUOUS, Kind.ORDINAL) and spec.bounds is not None:
                lo, hi = spec.bounds
                if not lo <= v <= hi:
                    out_of_range.append({"row": i, "column": spec.name, "value": v,
                                         "reason": f"outside [{lo}, {hi}]"})
            elif spec.kind in (Kind.CATEGORICAL, Kind.BINARY) and v not in spec.categories:
                out_of_range.append({"row": i, "column": spec.name, "value": v,
                                     "reason": "unknown category"})

    return ValidationReport(structural, calculation, out_of_range, missing_cols, missing_cells,
                            table.n_rows, expected_n)


def validation_schema(profile: StatisticalProfile, header: Sequence[str] | None = None) -> Schema:
    """Schema for loading an external file for validation: expected columns that are present."""
    expected = profile.output_schema()
    if header is None:
        return expected
    return Schema(tuple(c for c in expected if c.name in header))
