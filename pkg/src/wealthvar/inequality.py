"""Inequality indices on weighted net-wealth samples and monthly series.

All weighted indices treat a sampling weight as a replication count: an
index evaluated with integer weights equals the same index on the sample with
each row repeated ``weight`` times. Quantile-based measures use the
left-continuous inverse of the weighted empirical CDF and split households
fractionally at band edges (Lorenz-curve integration), so bands that
partition [0, 1) always add up to 100 percent.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, InsufficientDataError, UndefinedIndexError, WealthVarError
from .microdata import Month, MonthlyCohort, WealthConcept, net_wealth_array, top_code, weights_array


class NegativeShareWarning(UserWarning):
    """The bottom band holds negative total wealth, so a ratio changes sign."""


def _prepare(values, weights):
    x = np.asarray(values, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    if x.shape != w.shape:
        raise ValueError(f"values and weights differ in shape: {x.shape} vs {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)) or not np.all(np.isfinite(x)):
        raise ValueError("weights must be finite and non-negative, values finite")
    keep = w > 0
    x, w = x[keep], w[keep]
    if x.size < 2:
        raise InsufficientDataError(f"need at least 2 observations with positive weight, got {x.size}")
    order = np.argsort(x, kind="stable")
    return x[order], w[order]


def _check_mean(total: float, scale: float, what: str):
    if abs(total) <= 1e-14 * scale:
        raise UndefinedIndexError(f"{what} undefined: weighted total wealth is zero", total=total)


def gini(values, weights=None) -> float:
    """Gini coefficient of a (weighted) sample; negative values allowed.

    For unit weights this is sum_i (2i - n - 1) x_(i) / (n^2 mu) over the
    ascending sample. With weights, observation k with cumulative weight
    W_k contributes w_k x_k (W_{k-1} + W_k - N), which is the exact
    block sum of that formula over ``w_k`` replicated copies.
    """
    x, w = _prepare(values, weights)
    N = w.sum()
    cw = np.cumsum(w)
    prev = cw - w
    total = float(np.dot(w, x))
    _check_mean(total, float(np.dot(w, np.abs(x))), "Gini")
    num = float(np.dot(w * x, prev + cw - N))
    return num / (N * total)


def lorenz(values, weights=None, p=None) -> np.ndarray:
    """Cumulative wealth share L(p) held by the poorest fraction ``p`` of the population."""
    x, w = _prepare(values, weights)
    N = w.sum()
    total = float(np.dot(w, x))
    _check_mean(total, float(np.dot(w, np.abs(x))), "Lorenz curve")
    c_hi = np.cumsum(w) / N
    c_lo = c_hi - w / N
    p = np.atleast_1d(np.asarray(p, dtype=float))
    mass = np.clip(p[:, None] - c_lo[None, :], 0.0, (w / N)[None, :])
    return (mass @ x) * N / total


def quantile_share(values, weights=None, band: tuple[float, float] = (0.75, 1.0)) -> float:
    """Percent of total wealth held by households between population quantiles ``band``."""
    lo, hi = band
    if not 0.0 <= lo < hi <= 1.0:
        raise ConfigError(f"quantile band must satisfy 0 <= lo < hi <= 1, got {band}")
    L = lorenz(values, weights, [lo, hi])
    return 100.0 * float(L[1] - L[0])


def ratio_20_20(values, weights=None) -> float:
    """Top-quintile wealth share over bottom-quintile share."""
    top = quantile_share(values, weights, (0.8, 1.0))
    bottom = quantile_share(values, weights, (0.0, 0.2))
    if bottom == 0.0:
        raise UndefinedIndexError("20:20 ratio undefined: bottom 20% share is zero", top_share=top, bottom_share=bottom)
    if bottom < 0:
        warnings.warn(f"bottom 20% share is negative ({bottom:.4g}%); 20:20 ratio is negative",
                      NegativeShareWarning, stacklevel=2)
    return top / bottom


def coeff_variation(values, weights=None, topcode: tuple[float, float] = (0.01, 0.01)) -> float:
    """Weighted population standard deviation over the weighted mean, after top-coding."""
    x, w = _prepare(values, weights)
    if topcode is not None and any(topcode):
        x = top_code(x, w, *topcode)
    mean = float(np.dot(w, x) / w.sum())
    _check_mean(mean, float(np.dot(w, np.abs(x)) / w.sum()), "coefficient of variation")
    var = float(np.dot(w, (x - mean) ** 2) / w.sum())
    return math.sqrt(var) / mean


# --------------------------------------------------------------------------- series

MEASURE_KINDS = ("gini", "quantile_share", "ratio_20_20", "coeff_variation")


@dataclass(frozen=True)
class InequalityMeasure:
    kind: str
    params: dict = field(default_factory=dict, hash=False, compare=True)

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise ConfigError(f"unknown inequality measure {self.kind!r}; expected one of {MEASURE_KINDS}")
        if self.kind == "quantile_share":
            lo, hi = self.params.get("band", (0.75, 1.0))
            if not 0.0 <= lo < hi <= 1.0:
                raise ConfigError(f"quantile band must satisfy 0 <= lo < hi <= 1, got {(lo, hi)}")

    @property
    def label(self) -> str:
        if self.kind == "quantile_share":
            lo, hi = self.params.get("band", (0.75, 1.0))
            return f"share_{round(lo * 100)}_{round(hi * 100)}"
        return self.kind

    def __call__(self, values, weights=None) -> float:
        if self.kind == "gini":
            return gini(values, weights)
        if self.kind == "quantile_share":
            return quantile_share(values, weights, tuple(self.params.get("band", (0.75, 1.0))))
        if self.kind == "ratio_20_20":
            return ratio_20_20(values, weights)
        return coeff_variation(values, weights, tuple(self.params.get("topcode", (0.01, 0.01))))


@dataclass(frozen=True)
class InequalitySeries:
    measure: InequalityMeasure
    concept: WealthConcept
    months: tuple[Month, ...]
    values: np.ndarray
    valid_mask: np.ndarray
    errors: tuple[str, ...] = ()

    def __post_init__(self):
        ords = [m.ordinal for m in self.months]
        if any(b <= a for a, b in zip(ords, ords[1:])):
            raise ValueError("series months must be strictly increasing")
        if len(self.values) != len(self.months) or len(self.valid_mask) != len(self.months):
            raise ValueError("one value and one validity flag per month required")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "month": [str(m) for m in self.months],
            "measure": self.measure.label,
            "concept": self.concept.name,
            "value": self.values,
            "valid": self.valid_mask.astype(bool),
        })

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["month", "measure", "concept", "value", "valid"])
            for m, v, ok in zip(self.months, self.values, self.valid_mask):
                w.writerow([str(m), self.measure.label, self.concept.name, repr(float(v)), str(bool(ok)).lower()])


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean over up to ``window`` months (shorter at the start)."""
    if window < 1:
        raise ConfigError(f"moving-average window must be >= 1, got {window}")
    return pd.Series(values).rolling(window, min_periods=1).mean().to_numpy()


def build_series(
    cohorts: Sequence[MonthlyCohort],
    concept: WealthConcept,
    measure: InequalityMeasure,
    smoothing: int | None = None,
) -> InequalitySeries:
    """Measure value per cohort month; ``smoothing`` is an optional moving-average window.

    Months whose index cannot be computed get NaN and are marked invalid, as are
    cohorts below their minimum size.
    """
    concept.validate()
    months = tuple(c.month for c in cohorts)
    ords = [m.ordinal for m in months]
    if ords and ords != list(range(ords[0], ords[0] + len(ords))):
        raise ConfigError("cohorts must span a contiguous window of months")
    values = np.full(len(cohorts), np.nan)
    valid = np.zeros(len(cohorts), dtype=bool)
    errors = []
    for i, c in enumerate(cohorts):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", NegativeShareWarning)
                values[i] = measure(net_wealth_array(c.households, concept), weights_array(c.households))
            valid[i] = c.valid
        except (WealthVarError, ValueError) as exc:
            errors.append(f"{c.month}: {exc}")
    if smoothing:
        values = moving_average(values, smoothing)
    return InequalitySeries(measure, concept, months, values, valid, tuple(errors))


def jackknife_se(statistic, values, weights=None, groups: int = 50) -> float:
    """Delete-a-group jackknife standard error of ``statistic(values, weights)``.

    Observations are assigned to groups by position modulo ``groups``.
    """
    x = np.asarray(values, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    G = min(groups, x.size)
    if G < 2:
        raise InsufficientDataError("jackknife needs at least two observations")
    label = np.arange(x.size) % G
    reps = np.array([statistic(x[label != j], w[label != j]) for j in range(G)])
    return math.sqrt((G - 1) / G * float(np.sum((reps - reps.mean()) ** 2)))
