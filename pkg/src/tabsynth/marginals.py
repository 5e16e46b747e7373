"""One-dimensional target distributions used by the generator.

Continuous columns are truncated normals, either on the raw scale or on the
natural-log scale. Discrete columns are fixed-count quotas assigned by rank,
so a generated column hits its apportioned counts exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import optimize, stats

from .errors import DegenerateBounds
from .profile import CategoricalSummary, ContinuousSummary


def allocate_categories(summary: CategoricalSummary, n: int) -> dict:
    """Largest-remainder apportionment of ``n`` rows over the summary's labels.

    Remainder ties go to the earlier label.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    labels = summary.labels
    p = summary.probabilities
    total = p.sum()
    if total <= 0:
        raise ValueError("proportions must have positive mass")
    # round away float noise so that 0.5/0.5 style ties stay ties
    quotas = np.round(n * p / total, 9)
    counts = np.floor(quotas).astype(int)
    remainder = n - int(counts.sum())
    frac = np.round(quotas - counts, 9)
    order = sorted(range(len(labels)), key=lambda i: (-frac[i], i))
    for i in order[:remainder]:
        counts[i] += 1
    return {label: int(c) for label, c in zip(labels, counts)}


def fit_truncated_normal(mean: float, sd: float, lo: float, hi: float) -> tuple[float, float]:
    """Location/scale of a normal whose truncation to [lo, hi] has the given mean and sd.

    Falls back to matching the mean alone (scale fixed at the best joint fit)
    when no truncated normal reproduces both moments.
    """
    if sd == 0.0:
        return mean, 0.0
    if hi <= lo:
        raise DegenerateBounds(f"bounds [{lo}, {hi}] admit no spread (sd={sd})")
    mean = min(max(mean, lo), hi)

    def moments(theta):
        mu, log_s = theta
        s = math.exp(log_s)
        a, b = (lo - mu) / s, (hi - mu) / s
        m, v = stats.truncnorm.stats(a, b, loc=mu, scale=s, moments="mv")
        return float(m), math.sqrt(max(float(v), 0.0))

    def resid(theta):
        m, s = moments(theta)
        return [(m - mean) / sd, (s - sd) / sd]

    span = hi - lo
    x0 = [mean, math.log(sd)]
    fit = optimize.least_squares(
        resid, x0, method="trf", xtol=1e-12, ftol=1e-12, gtol=1e-12,
        bounds=([lo - 20 * span, math.log(sd) - 5], [hi + 20 * span, math.log(sd) + 5]))
    mu, log_s = fit.x
    if max(abs(r) for r in fit.fun) < 1e-6:
        return float(mu), float(math.exp(log_s))

    s = math.exp(log_s)

    def mean_gap(m):
        return moments([m, log_s])[0] - mean

    left, right = lo - 20 * span, hi + 20 * span
    if mean_gap(left) > 0 or mean_gap(right) < 0:
        return float(mu), float(s)
    mu = optimize.brentq(mean_gap, left, right, xtol=1e-12)
    return float(mu), float(s)


def truncnorm_ppf(u: np.ndarray, mu: float, sigma: float, lo: float, hi: float) -> np.ndarray:
    """Inverse CDF of normal(mu, sigma) truncated to [lo, hi]."""
    u = np.asarray(u, dtype=float)
    if sigma == 0.0:
        return np.full(u.shape, min(max(mu, lo), hi))
    a, b = (lo - mu) / sigma, (hi - mu) / sigma
    x = stats.truncnorm.ppf(u, a, b, loc=mu, scale=sigma)
    return np.clip(x, lo, hi)


@dataclass(frozen=True)
class ContinuousMargin:
    """Truncated normal on the raw scale, or on the log scale when ``log`` is set."""

    lo: float
    hi: float
    mu: float
    sigma: float
    log: bool = False

    @classmethod
    def from_summary(cls, summary: ContinuousSummary, match_moments: bool = True) -> "ContinuousMargin":
        if summary.min == summary.max and summary.sd > 0:
            raise DegenerateBounds(f"min == max == {summary.min} but sd = {summary.sd}")
        if summary.log_recommended and summary.log_scale_summary is not None:
            s = summary.log_scale_summary
            mean, sd, lo, hi, log = s.mean, s.sd, s.min, s.max, True
        else:
            mean, sd, lo, hi, log = summary.mean, summary.sd, summary.min, summary.max, False
        if match_moments and sd > 0:
            mu, sigma = fit_truncated_normal(mean, sd, lo, hi)
        else:
            mu, sigma = mean, sd
        return cls(lo, hi, mu, sigma, log)

    @property
    def bounds(self) -> tuple[float, float]:
        if self.log:
            return math.exp(self.lo), math.exp(self.hi)
        return self.lo, self.hi

    def ppf(self, u: np.ndarray) -> np.ndarray:
        x = truncnorm_ppf(u, self.mu, self.sigma, self.lo, self.hi)
        if self.log:
            lo, hi = self.bounds
            x = np.clip(np.exp(x), lo, hi)
        return x

    def from_latent(self, z: np.ndarray) -> np.ndarray:
        return self.ppf(stats.norm.cdf(z))


@dataclass(frozen=True)
class DiscreteMargin:
    """Labelled levels with target proportions; ``codes`` are the numeric values used for correlation."""

    summary: CategoricalSummary
    codes: tuple[float, ...]

    @property
    def labels(self) -> tuple:
        return self.summary.labels

    def counts(self, n: int) -> np.ndarray:
        alloc = allocate_categories(self.summary, n)
        return np.array([alloc[label] for label in self.labels], dtype=int)

    def from_latent(self, z: np.ndarray) -> np.ndarray:
        """Level index per row: the k-th smallest latent values take the lowest levels."""
        n = z.size
        idx = np.empty(n, dtype=int)
        order = np.argsort(z, kind="stable")
        idx[order] = np.repeat(np.arange(len(self.labels)), self.counts(n))
        return idx

    def code_values(self, idx: np.ndarray) -> np.ndarray:
        return np.asarray(self.codes, dtype=float)[idx]

    def ppf(self, u: np.ndarray) -> np.ndarray:
        """Quantile function on the codes (population proportions)."""
        p = self.summary.probabilities
        cum = np.cumsum(p / p.sum())
        cum[-1] = 1.0
        k = np.searchsorted(cum, np.asarray(u, dtype=float), side="left")
        return np.asarray(self.codes, dtype=float)[np.minimum(k, len(cum) - 1)]


Margin = Union[ContinuousMargin, DiscreteMargin]


def frechet_bounds(a: Margin, b: Margin,
                   grid: int = 200_000) -> tuple[float, float]:
    """Smallest and largest Pearson r attainable by any coupling of the two margins.

    Uses the antitone and comonotone quantile couplings on a midpoint grid.
    """
    u = (np.arange(grid) + 0.5) / grid
    qa = a.ppf(u)
    qb = b.ppf(u)
    qa_c = qa - qa.mean()
    qb_c = qb - qb.mean()
    denom = math.sqrt(float(np.dot(qa_c, qa_c)) * float(np.dot(qb_c, qb_c)))
    if denom == 0.0:
        return 0.0, 0.0
    upper = float(np.dot(qa_c, qb_c)) / denom
    lower = float(np.dot(qa_c, qb_c[::-1])) / denom
    return max(-1.0, lower), min(1.0, upper)


def round_within(x: np.ndarray, decimals: int | None, lo: float, hi: float) -> np.ndarray:
    """Round to ``decimals`` places and keep the result inside [lo, hi]."""
    x = np.clip(np.asarray(x, dtype=float), lo, hi)
    if decimals is None:
        return x
    scale = 10.0 ** decimals
    r = np.round(x, decimals)
    lo_r = math.ceil(lo * scale - 1e-9) / scale
    hi_r = math.floor(hi * scale + 1e-9) / scale
    if lo_r > hi_r:
        return x
    return np.clip(r, lo_r, hi_r)


def codes_for(levels: Sequence, kind_is_binary: bool) -> tuple[float, ...]:
    if kind_is_binary:
        return tuple(float(i) for i in range(len(levels)))
    return tuple(float(v) for v in levels)
