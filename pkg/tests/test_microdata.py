import csv
import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wealthvar.errors import ConfigError, DataError, RecordValidationError, SchemaError
from wealthvar.microdata import (ASSET_CATEGORIES, FINANCIAL_ASSETS, FINANCIAL_LIABILITIES, HOUSING_ASSETS,
                                 HOUSING_LIABILITIES, LIABILITY_CATEGORIES, NET_FINANCIAL, NET_HOUSING, NET_TOTAL,
                                 HouseholdRecord, Month, Schema, WealthConcept, assign_cohorts, get_concept,
                                 load_households, net_wealth, top_code, weighted_quantile)

HEADER = ["household_id", "interview_year", "interview_month", "weight", *ASSET_CATEGORIES, *LIABILITY_CATEGORIES]


def write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for r in rows:
            w.writerow(r)


def row(i, year=2010, month=1, weight=1.0, fill="0", **over):
    vals = {c: fill for c in ASSET_CATEGORIES + LIABILITY_CATEGORIES}
    vals.update({k: str(v) for k, v in over.items()})
    return [f"h{i}", year, month, weight] + [vals[c] for c in ASSET_CATEGORIES + LIABILITY_CATEGORIES]


def rec(assets=None, debts=None, date=Month(2010, 1), weight=1.0):
    return HouseholdRecord("x", date, weight, assets or {}, debts or {})


# ------------------------------------------------------------------ loading

def test_load_drops_row_with_missing_liability(tmp_path):
    p = tmp_path / "hh.csv"
    bad = row(3)
    bad[HEADER.index("mortgage")] = ""
    write_rows(p, [row(0), row(1), row(2), bad])
    records, report = load_households(p)
    assert len(records) == 3
    assert report.n_dropped == 1
    assert report.drops["missing_item"] == 1


def test_header_only_file_warns(tmp_path, caplog):
    p = tmp_path / "hh.csv"
    write_rows(p, [])
    with caplog.at_level(logging.WARNING):
        records, report = load_households(p)
    assert records == [] and report.n_read == 0
    assert "no rows" in caplog.text


def test_malformed_date_and_negative_item_reported(tmp_path):
    p = tmp_path / "hh.csv"
    r1 = row(1)
    r1[2] = "13"
    write_rows(p, [row(0), r1, row(2, deposits=-5)])
    records, report = load_households(p)
    assert len(records) == 1
    assert report.drops == {"malformed_date": 1, "negative_item": 1}


def test_unreadable_file_is_io_error(tmp_path):
    with pytest.raises(DataError):
        load_households(tmp_path / "missing.csv")


def test_schema_missing_column(tmp_path):
    p = tmp_path / "hh.csv"
    with open(p, "w") as fh:
        fh.write("household_id,interview_year,interview_month\n")
    with pytest.raises(SchemaError):
        load_households(p, Schema.default())


def test_drop_report_csv(tmp_path):
    p = tmp_path / "hh.csv"
    bad = row(1)
    bad[HEADER.index("loans")] = "NA"
    write_rows(p, [row(0), bad])
    _, report = load_households(p)
    report.to_csv(tmp_path / "drops.csv")
    assert (tmp_path / "drops.csv").read_text() == "reason,count\nmissing_item,1\n"


def test_synthetic_ten_thousand_rows_no_drops(tmp_path):
    from wealthvar.probkernel import RngStream
    from wealthvar.synth import HouseholdGenerator, generate_households
    gen = HouseholdGenerator(months=10, per_month=1000)
    hh, _ = generate_households(gen, RngStream(3))
    p = tmp_path / "hh.csv"
    hh.to_csv(p, index=False, float_format="%.2f")
    records, report = load_households(p)
    assert len(records) == 10_000 and report.n_dropped == 0


def test_window_filter_drops_outside(tmp_path):
    p = tmp_path / "hh.csv"
    write_rows(p, [row(0, month=1), row(1, month=6)])
    records, report = load_households(p, window=(Month(2010, 1), Month(2010, 3)))
    assert len(records) == 1 and report.drops["outside_window"] == 1


def test_record_rejects_negative_item():
    with pytest.raises(RecordValidationError):
        rec({"deposits": -1.0})


# ------------------------------------------------------------------ wealth concepts

def test_net_wealth_examples():
    h = rec({"housing": 100000, "deposits": 5000}, {"mortgage": 40000})
    assert net_wealth(h, NET_TOTAL) == 65000
    h2 = rec({"deposits": 1000}, {"loans": 2500})
    assert net_wealth(h2, NET_FINANCIAL) == -1500
    assert net_wealth(h2, NET_HOUSING) == 0


def test_unknown_category_concept_is_config_error():
    bad = WealthConcept("weird", frozenset({"yachts"}), frozenset())
    with pytest.raises(ConfigError):
        net_wealth(rec({"deposits": 1.0}), bad)
    with pytest.raises(ConfigError):
        get_concept("gross")


def test_builtin_concepts_partition():
    assert NET_FINANCIAL.included_asset_categories == set(FINANCIAL_ASSETS)
    assert NET_HOUSING.included_liability_categories == set(HOUSING_LIABILITIES)
    assert NET_TOTAL.included_asset_categories == set(FINANCIAL_ASSETS) | set(HOUSING_ASSETS)
    assert NET_TOTAL.included_liability_categories == set(FINANCIAL_LIABILITIES) | set(HOUSING_LIABILITIES)
    aug = get_concept("augmented")
    assert aug.included_asset_categories > NET_TOTAL.included_asset_categories
    assert {"pension", "durables", "valuables", "informal_assets"} <= aug.included_asset_categories


amounts = st.floats(0, 1e7, allow_nan=False, allow_infinity=False)
core_assets = st.dictionaries(st.sampled_from(FINANCIAL_ASSETS + HOUSING_ASSETS), amounts, max_size=6)
core_debts = st.dictionaries(st.sampled_from(FINANCIAL_LIABILITIES + HOUSING_LIABILITIES), amounts, max_size=5)


@given(core_assets, core_debts)
def test_total_is_financial_plus_housing(a, d):
    h = rec(a, d)
    assert net_wealth(h, NET_TOTAL) == pytest.approx(net_wealth(h, NET_FINANCIAL) + net_wealth(h, NET_HOUSING),
                                                    rel=1e-12, abs=1e-6)


@given(core_assets, core_debts, st.floats(0.01, 100))
def test_net_wealth_linear_in_amounts(a, d, k):
    h = rec(a, d)
    hk = rec({c: k * v for c, v in a.items()}, {c: k * v for c, v in d.items()})
    assert net_wealth(hk, NET_TOTAL) == pytest.approx(k * net_wealth(h, NET_TOTAL), rel=1e-9, abs=1e-6)


# ------------------------------------------------------------------ cohorts

def test_uniform_cohorts():
    records = [rec(date=Month(2010, 1 + i % 3)) for i in range(2400)]
    cohorts = assign_cohorts(records, (Month(2010, 1), Month(2010, 3)), 800)
    assert [c.size for c in cohorts] == [800, 800, 800]
    assert all(c.valid for c in cohorts)


def test_small_cohort_flagged():
    cohorts = assign_cohorts([rec() for _ in range(100)], (Month(2010, 1), Month(2010, 1)), 800)
    assert len(cohorts) == 1 and not cohorts[0].valid


def test_empty_window_is_error():
    with pytest.raises(ConfigError):
        assign_cohorts([], (Month(2010, 3), Month(2010, 1)))


@given(st.lists(st.integers(0, 30), max_size=300), st.integers(0, 10), st.integers(0, 20))
def test_cohort_partition(offsets, start, length):
    base = Month(2010, 1)
    records = [rec(date=base + o) for o in offsets]
    window = (base + start, base + start + length)
    cohorts = assign_cohorts(records, window, 5)
    inside = sum(1 for o in offsets if start <= o <= start + length)
    assert sum(c.size for c in cohorts) == inside
    assert len(cohorts) == length + 1
    for c in cohorts:
        assert all(h.interview_date == c.month for h in c.households)


# ------------------------------------------------------------------ quantiles and top-coding

def brute_quantile(x, w, p):
    """inf{v : F(v) >= p} by scanning candidate values."""
    x, w = np.asarray(x, float), np.asarray(w, float)
    keep = w > 0
    x, w = x[keep], w[keep]
    total = w.sum()
    for v in np.sort(np.unique(x)):
        if w[x <= v].sum() / total >= p - 1e-15:
            return v
    return x.max()


def test_top_code_one_to_hundred():
    x = np.arange(1.0, 101.0)
    w = np.ones(100)
    out = top_code(x, w, 0.01, 0.01)
    lo, hi = brute_quantile(x, w, 0.01), brute_quantile(x, w, 0.99)
    assert out.min() == lo and out.max() == hi
    assert (lo, hi) == (1.0, 99.0)
    np.testing.assert_array_equal(out[1:99], x[1:99])


def test_top_code_identity_cases():
    x = np.array([3.0, 1.0, 2.0])
    np.testing.assert_array_equal(top_code(x, np.ones(3), 0, 0), x)
    y = np.full(7, 4.2)
    np.testing.assert_array_equal(top_code(y, np.ones(7), 0.1, 0.1), y)


def test_top_code_bad_fraction():
    with pytest.raises(ConfigError):
        top_code(np.arange(5.0), np.ones(5), 0.5, 0.0)


samples = st.lists(st.tuples(st.floats(-1e6, 1e6), st.integers(0, 5)), min_size=1, max_size=60).filter(
    lambda s: sum(w for _, w in s) > 0)


@given(samples, st.floats(0, 1))
def test_weighted_quantile_matches_brute_force(s, p):
    x = [v for v, _ in s]
    w = [float(k) for _, k in s]
    assert weighted_quantile(x, w, p) == brute_quantile(x, w, p) if p > 0 else True


@given(samples, st.floats(0, 0.49), st.floats(0, 0.49))
def test_top_code_idempotent(s, lo, hi):
    x = np.array([v for v, _ in s])
    w = np.array([float(k) for _, k in s])
    once = top_code(x, w, lo, hi)
    np.testing.assert_array_equal(top_code(once, w, lo, hi), once)
