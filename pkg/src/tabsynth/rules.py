"""Derived-feature rules carried by a profile and honoured by the generator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Union

from .errors import SchemaError

HEIGHT_MEAN_CM = 170.0
HEIGHT_SD_CM = 8.0
HEIGHT_BOUNDS_CM = (145.0, 200.0)


@dataclass(frozen=True)
class BmiToHeightWeight:
    bmi_col: str
    height_out: str = "Height"
    weight_out: str = "Weight"

    @property
    def outputs(self) -> tuple[str, ...]:
        return (self.height_out, self.weight_out)

    def to_dict(self) -> dict:
        return {"type": "bmi_to_height_weight", "bmi_col": self.bmi_col,
                "height_out": self.height_out, "weight_out": self.weight_out}


@dataclass(frozen=True)
class ExpInverse:
    """``raw_out`` equals ``exp(log_col)``; the generator emits both columns."""

    log_col: str
    raw_out: str

    @property
    def outputs(self) -> tuple[str, ...]:
        return (self.log_col,)

    def to_dict(self) -> dict:
        return {"type": "exp_inverse", "log_col": self.log_col, "raw_out": self.raw_out}


DerivedFeatureRule = Union[BmiToHeightWeight, ExpInverse]


def rule_from_dict(d: Mapping[str, Any]) -> DerivedFeatureRule:
    kind = d.get("type")
    if kind == "bmi_to_height_weight":
        return BmiToHeightWeight(d["bmi_col"], d.get("height_out", "Height"), d.get("weight_out", "Weight"))
    if kind == "exp_inverse":
        return ExpInverse(d["log_col"], d["raw_out"])
    raise SchemaError(f"unknown derived rule type {kind!r}")
