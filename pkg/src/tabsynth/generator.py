"""Sample a synthetic table from a statistical profile.

Independent columns are drawn from their margins; each flagged pair is drawn
jointly through a Gaussian copula whose latent correlation is calibrated by
bisection so that the realised Pearson r lands on the profile's value.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    CalibrationFailed,
    InfeasibleTarget,
    IoFailure,
    NonNumericColumn,
    NonPositiveBmi,
)
from .marginals import (
    ContinuousMargin,
    DiscreteMargin,
    Margin,
    allocate_categories,
    codes_for,
    frechet_bounds,
    round_within,
    truncnorm_ppf,
)
from .model import ColumnSpec, Kind, NUMERIC_KINDS, Table
from .profile import ContinuousSummary, StatisticalProfile, pearson
from .rules import (
    HEIGHT_BOUNDS_CM,
    HEIGHT_MEAN_CM,
    HEIGHT_SD_CM,
    BmiToHeightWeight,
    DerivedFeatureRule,
    ExpInverse,
)

__all__ = [
    "BmiToHeightWeight", "DerivedFeatureRule", "ExpInverse", "GenerationConfig",
    "InducedPair", "allocate_categories", "derive_height_weight", "generate",
    "generate_with_manifest", "induce_correlation", "sample_continuous",
]

MIN_PILOT = 5000


@dataclass(frozen=True)
class GenerationConfig:
    n: int
    seed: int = 0
    correlation_tolerance: float = 0.05
    max_calibration_iters: int = 50
    rounding: Mapping[str, int | None] = field(default_factory=dict)
    match_moments: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if not 0.0 < self.correlation_tolerance < 0.5:
            raise ValueError("correlation_tolerance must be in (0, 0.5)")
        if self.max_calibration_iters < 1:
            raise ValueError("max_calibration_iters must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


# -- single columns ----------------------------------------------------------

def sample_continuous(summary: ContinuousSummary, n: int, rng: np.random.Generator,
                      match_moments: bool = True) -> np.ndarray:
    """Draw ``n`` raw-scale values inside [min, max] by inverse-CDF sampling.

    Log-flagged columns are drawn on the log scale and exponentiated.
    """
    if summary.sd == 0.0:
        return np.full(n, summary.mean)
    margin = ContinuousMargin.from_summary(summary, match_moments)
    x = margin.ppf(rng.random(n))
    return np.clip(x, summary.min, summary.max)


def _sample_discrete(margin: DiscreteMargin, n: int, rng: np.random.Generator) -> np.ndarray:
    idx = np.repeat(np.arange(len(margin.labels)), margin.counts(n))
    return rng.permutation(idx)


# -- correlated pairs --------------------------------------------------------

@dataclass(frozen=True)
class InducedPair:
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    rho: float
    realized_r: float
    pilot_r: float
    iterations: int
    refined: bool


def _latent_pair(z1: np.ndarray, z2: np.ndarray, rho: float) -> np.ndarray:
    return rho * z1 + math.sqrt(max(0.0, 1.0 - rho * rho)) * z2


def _map(margin: Margin, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(cell values, numeric codes) for a latent draw."""
    if isinstance(margin, DiscreteMargin):
        idx = margin.from_latent(z)
        return idx, margin.code_values(idx)
    x = margin.from_latent(z)
    return x, x


def _realized(a: Margin, b: Margin, z1: np.ndarray, z2: np.ndarray, rho: float) -> float:
    _, ca = _map(a, z1)
    _, cb = _map(b, _latent_pair(z1, z2, rho))
    r = pearson(ca, cb)
    return 0.0 if math.isnan(r) else r


def _bisect(a: Margin, b: Margin, z1: np.ndarray, z2: np.ndarray, r_target: float,
            tol: float, max_iters: int, start: float) -> tuple[float, float, int]:
    """Latent rho whose realised r on (z1, z2) is closest to ``r_target``.

    Realised r is monotone in rho for fixed draws, so plain bisection on
    [-1, 1] applies. Stops once within ``tol`` or after ``max_iters``.
    """
    best_rho, best_r = start, _realized(a, b, z1, z2, start)
    iters = 1
    if abs(best_r - r_target) <= tol:
        return best_rho, best_r, iters
    lo, hi = (-1.0, start) if best_r > r_target else (start, 1.0)
    while iters < max_iters:
        mid = 0.5 * (lo + hi)
        r = _realized(a, b, z1, z2, mid)
        iters += 1
        if abs(r - r_target) < abs(best_r - r_target):
            best_rho, best_r = mid, r
        if abs(r - r_target) <= tol or hi - lo < 1e-9:
            break
        if r < r_target:
            lo = mid
        else:
            hi = mid
    return best_rho, best_r, iters


def induce_correlation(a: Margin, b: Margin, r_target: float, n: int, rng: np.random.Generator,
                       tolerance: float = 0.05, max_iters: int = 50) -> InducedPair:
    """Jointly sample two margins so their Pearson r is within ``tolerance`` of ``r_target``.

    The latent correlation is calibrated on a pilot of ``max(n, 5000)`` rows
    (aiming a tenth of the tolerance inside the target), then checked on the
    final ``n`` rows; if sampling noise moves the final sample more than half
    the tolerance away, the same bisection is rerun on the final draws.
    Discrete margins are assigned by rank and so keep their quota counts exactly.
    Returned arrays hold level indices for discrete margins and values for
    continuous ones.
    """
    if not abs(r_target) < 1.0:
        raise InfeasibleTarget(r_target, -1.0, 1.0)
    lower, upper = frechet_bounds(a, b)
    if not lower <= r_target <= upper:
        raise InfeasibleTarget(r_target, lower, upper)

    pilot_rng, final_rng = rng.spawn(2)
    m = max(n, MIN_PILOT)
    pz1, pz2 = pilot_rng.standard_normal((2, m))
    aim = tolerance / 10
    rho, pilot_r, iters = _bisect(a, b, pz1, pz2, r_target, aim, max_iters, start=r_target)

    z1, z2 = final_rng.standard_normal((2, n))
    r = _realized(a, b, z1, z2, rho)
    refined = False
    if abs(r - r_target) > tolerance / 2:
        refined = True
        rho, r, extra = _bisect(a, b, z1, z2, r_target, aim, max_iters, start=rho)
        iters += extra
    if abs(r - r_target) > tolerance:
        raise CalibrationFailed(r_target, rho, r, iters)
    va, _ = _map(a, z1)
    vb, _ = _map(b, _latent_pair(z1, z2, rho))
    return InducedPair(va, vb, rho, r, pilot_r, iters, refined)


# -- derived features ----------------------------------------------------------

def derive_height_weight(bmi: Sequence[float], rng: np.random.Generator | None = None,
                         heights: Sequence[float] | None = None,
                         decimals: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Heights (cm) from a truncated normal and the weights (kg) that reproduce each BMI."""
    bmi = np.asarray(bmi, dtype=float)
    if np.any(~(bmi > 0)):
        raise NonPositiveBmi("every BMI must be > 0")
    if heights is None:
        if rng is None:
            raise ValueError("need rng or explicit heights")
        lo, hi = HEIGHT_BOUNDS_CM
        heights = truncnorm_ppf(rng.random(bmi.size), HEIGHT_MEAN_CM, HEIGHT_SD_CM, lo, hi)
        heights = round_within(heights, decimals, lo, hi)
    heights = np.asarray(heights, dtype=float)
    weights = np.round(bmi * (heights / 100.0) ** 2, decimals)
    return heights, weights


# -- full table ----------------------------------------------------------------

def _margin_for(spec: ColumnSpec, summary, match_moments: bool) -> Margin:
    if isinstance(summary, ContinuousSummary):
        return ContinuousMargin.from_summary(summary, match_moments)
    return DiscreteMargin(summary, codes_for(spec.levels, spec.kind is Kind.BINARY)
                          if spec.kind in NUMERIC_KINDS else tuple(range(len(spec.levels))))


def default_rounding(profile: StatisticalProfile) -> dict[str, int | None]:
    """Integer-valued source columns to whole numbers, other reals and height/weight to 2 places."""
    out: dict[str, int | None] = {}
    for spec in profile.schema:
        s = profile.summary(spec.name)
        if isinstance(s, ContinuousSummary):
            out[spec.name] = 0 if s.integer_valued else 2
    for rule in profile.derived_rules:
        if isinstance(rule, BmiToHeightWeight):
            out[rule.height_out] = 2
            out[rule.weight_out] = 2
        else:
            out[rule.log_col] = None
    return out


def _cells(spec: ColumnSpec, margin: Margin, values: np.ndarray, decimals: int | None) -> list:
    if isinstance(margin, DiscreteMargin):
        return [margin.labels[i] for i in values]
    lo, hi = spec.bounds
    return round_within(values, decimals, lo, hi).tolist()


def generate_with_manifest(profile: StatisticalProfile, config: GenerationConfig
                           ) -> tuple[Table, dict[str, Any]]:
    out_schema = profile.output_schema()
    rounding = default_rounding(profile)
    rounding.update(config.rounding)
    base = profile.schema
    margins = {spec.name: _margin_for(spec, profile.summary(spec.name), config.match_moments)
               for spec in base}

    # one job per independent column or flagged pair, placed at its first column
    jobs: list[tuple[str, ...]] = []
    claimed: set[str] = set()
    skipped = []
    pair_of: dict[str, Any] = {}
    for entry in profile.flagged_correlations:
        for c in (entry.col_a, entry.col_b):
            if base[c].kind not in NUMERIC_KINDS:
                raise NonNumericColumn(f"flagged pair uses non-numeric column {c}")
        if entry.col_a in claimed or entry.col_b in claimed:
            skipped.append({"col_a": entry.col_a, "col_b": entry.col_b, "r": entry.r,
                            "reason": "column already used by a stronger pair"})
            continue
        claimed.update((entry.col_a, entry.col_b))
        pair_of[entry.col_a] = entry
    for name in base.names:
        if name in pair_of:
            e = pair_of[name]
            jobs.append((e.col_a, e.col_b))
        elif name not in claimed:
            jobs.append((name,))
    jobs.sort(key=lambda j: min(base.index(c) for c in j))

    root = np.random.SeedSequence(config.seed)
    children = root.spawn(len(jobs) + len(profile.derived_rules))
    n = config.n

    def run(job_index: int):
        job = jobs[job_index]
        rng = np.random.default_rng(children[job_index])
        if len(job) == 1:
            name = job[0]
            m = margins[name]
            if isinstance(m, DiscreteMargin):
                return {name: _sample_discrete(m, n, rng)}, None
            return {name: sample_continuous(profile.summary(name), n, rng, config.match_moments)}, None
        a, b = job
        entry = pair_of[a]
        pair = induce_correlation(margins[a], margins[b], entry.r, n, rng,
                                  config.correlation_tolerance, config.max_calibration_iters)
        diag = {"col_a": a, "col_b": b, "r_target": entry.r, "rho": pair.rho,
                "pilot_r": pair.pilot_r, "realized_r": pair.realized_r,
                "iterations": pair.iterations, "refined": pair.refined}
        return {a: pair.a, b: pair.b}, diag

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run, range(len(jobs))))
    else:
        results = [run(i) for i in range(len(jobs))]

    raw: dict[str, np.ndarray] = {}
    calibrations = []
    for values, diag in results:
        raw.update(values)
        if diag is not None:
            calibrations.append(diag)

    columns: dict[str, list] = {}
    for spec in base:
        out_spec = out_schema[spec.name]
        columns[spec.name] = _cells(out_spec, margins[spec.name], raw[spec.name], rounding.get(spec.name))

    for k, rule in enumerate(profile.derived_rules):
        rng = np.random.default_rng(children[len(jobs) + k])
        if isinstance(rule, ExpInverse):
            columns[rule.log_col] = [math.log(v) for v in columns[rule.raw_out]]
        else:
            h_spec = out_schema[rule.height_out]
            h, w = derive_height_weight(columns[rule.bmi_col], rng,
                                        decimals=rounding.get(rule.height_out) or 2)
            columns[rule.height_out] = round_within(h, rounding.get(rule.height_out), *h_spec.bounds).tolist()
            columns[rule.weight_out] = w.tolist()

    table = Table.from_columns(out_schema, columns)
    manifest = {
        "seed": config.seed,
        "n": n,
        "config": {
            "correlation_tolerance": config.correlation_tolerance,
            "max_calibration_iters": config.max_calibration_iters,
            "match_moments": config.match_moments,
            "rounding": {k: rounding[k] for k in sorted(rounding)},
        },
        "columns": list(out_schema.names),
        "correlations": calibrations,
        "skipped_pairs": skipped,
    }
    return table, manifest


def generate(profile: StatisticalProfile, config: GenerationConfig) -> Table:
    return generate_with_manifest(profile, config)[0]


def save_manifest(manifest: Mapping[str, Any], path: str | Path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write manifest {path}: {exc}") from exc
