"""Household balance-sheet ingestion, wealth concepts and monthly cohorts."""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError, RecordValidationError, SchemaError

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Month:
    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")

    @classmethod
    def parse(cls, text: str) -> "Month":
        """Parse ``YYYY-MM`` (also accepts ``YYYY:MM``)."""
        s = str(text).strip().replace(":", "-")
        try:
            y, m = s.split("-")[:2]
            return cls(int(y), int(m))
        except (ValueError, TypeError):
            raise ValueError(f"malformed month {text!r}") from None

    @property
    def ordinal(self) -> int:
        return self.year * 12 + self.month - 1

    @classmethod
    def from_ordinal(cls, k: int) -> "Month":
        return cls(k // 12, k % 12 + 1)

    def __add__(self, k: int) -> "Month":
        return Month.from_ordinal(self.ordinal + int(k))

    def __sub__(self, other: "Month") -> int:
        return self.ordinal - other.ordinal

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


def month_range(start: Month, end: Month) -> list[Month]:
    """Inclusive list of months from ``start`` to ``end``."""
    return [Month.from_ordinal(k) for k in range(start.ordinal, end.ordinal + 1)]


# Category taxonomy. Amounts are gross and non-negative; concepts decide signs.
FINANCIAL_ASSETS = ("deposits", "savings_accounts", "isas", "shares")
FINANCIAL_LIABILITIES = ("credit_cards", "arrears", "loans")
HOUSING_ASSETS = ("housing", "other_property")
HOUSING_LIABILITIES = ("mortgage", "property_loans")
EXTRA_ASSETS = ("informal_assets", "durables", "valuables", "pension")
EXTRA_LIABILITIES = ("informal_debt",)

ASSET_CATEGORIES = FINANCIAL_ASSETS + HOUSING_ASSETS + EXTRA_ASSETS
LIABILITY_CATEGORIES = FINANCIAL_LIABILITIES + HOUSING_LIABILITIES + EXTRA_LIABILITIES


@dataclass(frozen=True)
class HouseholdRecord:
    household_id: str
    interview_date: Month
    weight: float
    asset_items: Mapping[str, float]
    liability_items: Mapping[str, float]

    def __post_init__(self):
        if not (math.isfinite(self.weight) and self.weight >= 0):
            raise RecordValidationError("negative_weight", f"{self.household_id}: {self.weight}")
        for kind, items in (("asset", self.asset_items), ("liability", self.liability_items)):
            for cat, amt in items.items():
                if not math.isfinite(amt):
                    raise RecordValidationError("nonfinite_item", f"{self.household_id}: {kind} {cat}")
                if amt < 0:
                    raise RecordValidationError("negative_item", f"{self.household_id}: {kind} {cat}={amt}")
        object.__setattr__(self, "asset_items", MappingProxyType(dict(self.asset_items)))
        object.__setattr__(self, "liability_items", MappingProxyType(dict(self.liability_items)))


@dataclass(frozen=True)
class WealthConcept:
    name: str
    included_asset_categories: frozenset[str]
    included_liability_categories: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "included_asset_categories", frozenset(self.included_asset_categories))
        object.__setattr__(self, "included_liability_categories", frozenset(self.included_liability_categories))

    def validate(self) -> None:
        bad = sorted(self.included_asset_categories - set(ASSET_CATEGORIES))
        bad += sorted(self.included_liability_categories - set(LIABILITY_CATEGORIES))
        if bad:
            raise ConfigError(f"wealth concept {self.name!r} references unknown categories: {bad}")


NET_FINANCIAL = WealthConcept("net_financial", frozenset(FINANCIAL_ASSETS), frozenset(FINANCIAL_LIABILITIES))
NET_HOUSING = WealthConcept("net_housing", frozenset(HOUSING_ASSETS), frozenset(HOUSING_LIABILITIES))
NET_TOTAL = WealthConcept(
    "net_total",
    frozenset(FINANCIAL_ASSETS + HOUSING_ASSETS),
    frozenset(FINANCIAL_LIABILITIES + HOUSING_LIABILITIES),
)
AUGMENTED = WealthConcept("augmented", frozenset(ASSET_CATEGORIES), frozenset(LIABILITY_CATEGORIES))

CONCEPTS: dict[str, WealthConcept] = {
    c.name: c for c in (NET_TOTAL, NET_FINANCIAL, NET_HOUSING, AUGMENTED)
}


def get_concept(name: str) -> WealthConcept:
    try:
        return CONCEPTS[name]
    except KeyError:
        raise ConfigError(f"unknown wealth concept {name!r}; expected one of {sorted(CONCEPTS)}") from None


def net_wealth(h: HouseholdRecord, c: WealthConcept) -> float:
    """Included assets minus included liabilities; absent items count as zero."""
    c.validate()
    assets = math.fsum(v for k, v in h.asset_items.items() if k in c.included_asset_categories)
    debts = math.fsum(v for k, v in h.liability_items.items() if k in c.included_liability_categories)
    return assets - debts


def net_wealth_array(records: Sequence[HouseholdRecord], c: WealthConcept) -> np.ndarray:
    return np.array([net_wealth(h, c) for h in records], dtype=float)


def weights_array(records: Sequence[HouseholdRecord]) -> np.ndarray:
    return np.array([h.weight for h in records], dtype=float)


# --------------------------------------------------------------------------- loading

@dataclass(frozen=True)
class Schema:
    """Maps the CSV header onto record fields and item categories."""

    id_col: str = "household_id"
    year_col: str = "interview_year"
    month_col: str = "interview_month"
    weight_col: str = "weight"
    asset_columns: Mapping[str, str] = field(default_factory=dict)  # category -> column
    liability_columns: Mapping[str, str] = field(default_factory=dict)

    @classmethod
    def default(cls) -> "Schema":
        return cls(
            asset_columns={c: c for c in ASSET_CATEGORIES},
            liability_columns={c: c for c in LIABILITY_CATEGORIES},
        )

    @classmethod
    def infer(cls, header: Sequence[str]) -> "Schema":
        """Default column names, keeping only the category columns present."""
        cols = set(header)
        return cls(
            asset_columns={c: c for c in ASSET_CATEGORIES if c in cols},
            liability_columns={c: c for c in LIABILITY_CATEGORIES if c in cols},
        )

    def required_columns(self) -> list[str]:
        return [self.id_col, self.year_col, self.month_col, self.weight_col,
                *self.asset_columns.values(), *self.liability_columns.values()]

    def check(self, header: Sequence[str]) -> None:
        unknown = sorted(set(self.asset_columns) - set(ASSET_CATEGORIES))
        unknown += sorted(set(self.liability_columns) - set(LIABILITY_CATEGORIES))
        if unknown:
            raise SchemaError(f"schema maps unknown categories: {unknown}")
        missing = [c for c in self.required_columns() if c not in header]
        if missing:
            raise SchemaError(f"CSV is missing required columns: {missing}")


@dataclass
class LoadReport:
    n_read: int = 0
    n_kept: int = 0
    drops: Counter = field(default_factory=Counter)
    examples: list[str] = field(default_factory=list)

    @property
    def n_dropped(self) -> int:
        return sum(self.drops.values())

    def add(self, err: RecordValidationError, line: int) -> None:
        self.drops[err.reason] += 1
        if len(self.examples) < 20:
            self.examples.append(f"line {line}: {err}")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["reason", "count"])
            for reason in sorted(self.drops):
                w.writerow([reason, self.drops[reason]])


_MISSING = {"", "na", "nan", "null", "none", "."}


def _amount(raw: str, column: str) -> float:
    s = raw.strip()
    if s.lower() in _MISSING:
        raise RecordValidationError("missing_item", column)
    try:
        v = float(s)
    except ValueError:
        raise RecordValidationError("malformed_number", f"{column}={raw!r}") from None
    if not math.isfinite(v):
        raise RecordValidationError("nonfinite_item", column)
    if v < 0:
        raise RecordValidationError("negative_item", f"{column}={v}")
    return v


def _parse_row(row: dict, schema: Schema, window: tuple[Month, Month] | None) -> HouseholdRecord:
    try:
        date = Month(int(row[schema.year_col]), int(row[schema.month_col]))
    except (ValueError, TypeError):
        raise RecordValidationError(
            "malformed_date", f"{row.get(schema.year_col)!r}-{row.get(schema.month_col)!r}"
        ) from None
    if window is not None and not (window[0] <= date <= window[1]):
        raise RecordValidationError("outside_window", str(date))
    try:
        weight = float(row[schema.weight_col])
    except (ValueError, TypeError):
        raise RecordValidationError("malformed_weight", repr(row.get(schema.weight_col))) from None
    if not math.isfinite(weight) or weight < 0:
        raise RecordValidationError("negative_weight", repr(weight))
    assets = {cat: _amount(row[col], col) for cat, col in schema.asset_columns.items()}
    debts = {cat: _amount(row[col], col) for cat, col in schema.liability_columns.items()}
    return HouseholdRecord(str(row[schema.id_col]), date, weight, assets, debts)


def load_households(
    path: str | Path,
    schema: Schema | None = None,
    window: tuple[Month, Month] | None = None,
) -> tuple[list[HouseholdRecord], LoadReport]:
    """Read a household CSV.

    Rows failing validation (missing item, malformed date, negative amount, ...)
    are dropped and tallied by reason in the returned report; the run goes on.
    ``schema=None`` infers the default column names from the header.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read households file {path}: {exc}") from exc
    report = LoadReport()
    records: list[HouseholdRecord] = []
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if schema is None:
            schema = Schema.infer(header)
        schema.check(header)
        for lineno, row in enumerate(reader, start=2):
            report.n_read += 1
            try:
                records.append(_parse_row(row, schema, window))
            except RecordValidationError as err:
                report.add(err, lineno)
    report.n_kept = len(records)
    if report.n_read == 0:
        log.warning("households file %s has a header but no rows", path)
    if report.n_dropped:
        log.info("dropped %d of %d household rows: %s", report.n_dropped, report.n_read, dict(report.drops))
    return records, report


# --------------------------------------------------------------------------- cohorts

@dataclass(frozen=True)
class MonthlyCohort:
    month: Month
    households: tuple[HouseholdRecord, ...]
    min_size: int = 800

    @property
    def size(self) -> int:
        return len(self.households)

    @property
    def valid(self) -> bool:
        return self.size >= self.min_size


def assign_cohorts(
    records: Iterable[HouseholdRecord],
    window: tuple[Month, Month],
    min_cohort_size: int = 800,
) -> list[MonthlyCohort]:
    """One cohort per month of the inclusive window, keyed by interview month.

    Each record is treated as a distinct observation; overlapping wave months are
    not deduplicated.
    """
    start, end = window
    if end < start:
        raise ConfigError(f"empty cohort window {start}..{end}")
    buckets: dict[Month, list[HouseholdRecord]] = {m: [] for m in month_range(start, end)}
    for h in records:
        b = buckets.get(h.interview_date)
        if b is not None:
            b.append(h)
    return [MonthlyCohort(m, tuple(hs), min_cohort_size) for m, hs in buckets.items()]


# --------------------------------------------------------------------------- weighted quantiles

def weighted_quantile(values, weights, p: float) -> float:
    """Left-continuous inverse of the weighted empirical CDF: inf{x : F(x) >= p}.

    ``p == 0`` returns the smallest value carrying positive weight.
    """
    x = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    keep = w > 0
    x, w = x[keep], w[keep]
    if x.size == 0:
        raise ValueError("no observations with positive weight")
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    cw = np.cumsum(w)
    target = p * cw[-1]
    # relative slack so that exact fractions like 99/100 are not lost to rounding
    idx = int(np.searchsorted(cw, target * (1 - 1e-12), side="left"))
    return float(x[min(max(idx, 0), x.size - 1)])


def top_code(values, weights, lower_fraction: float = 0.01, upper_fraction: float = 0.01) -> np.ndarray:
    """Winsorize at the weighted ``lower_fraction`` and ``1 - upper_fraction`` quantiles."""
    for f in (lower_fraction, upper_fraction):
        if not 0 <= f < 0.5:
            raise ConfigError(f"top-coding fraction must lie in [0, 0.5), got {f}")
    x = np.asarray(values, dtype=float).copy()
    w = np.asarray(weights, dtype=float)
    if x.size == 0:
        return x
    if lower_fraction > 0:
        lo = weighted_quantile(x, w, lower_fraction)
        x[x < lo] = lo
    if upper_fraction > 0:
        hi = weighted_quantile(x, w, 1.0 - upper_fraction)
        x[x > hi] = hi
    return x
