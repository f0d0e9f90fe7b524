import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inflation_dynamics.errors import DegenerateError, DomainError, IngestionError
from inflation_dynamics.panel import (
    ReturnsPanel,
    TimeSeriesPanel,
    l1_normalize,
    load_csv,
    log_returns,
    parse_date,
    write_csv,
)
from oracles import log_returns_mp


def write(tmp_path, text, name="in.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_well_formed(tmp_path):
    p = write(tmp_path, "date,A,B\n2020-01,1,2\n2020-02,1.5,2.5\n2020-03,2,3\n")
    panel = load_csv(p)
    assert panel.shape == (3, 2)
    assert panel.frequency == "monthly"
    assert panel.dates[0] == (2020, 1, 1)
    assert panel.entities == ("A", "B")


def test_drop_row_policy_reports_count(tmp_path, caplog):
    p = write(tmp_path, "date,A,B\n2020-01,1,2\n2020-02,,2.5\n2020-03,2,3\n")
    with caplog.at_level("INFO"):
        panel = load_csv(p, missing_policy="drop_row")
    assert panel.shape == (2, 2)
    assert panel.dropped_rows == 1
    assert "1 row dropped" in caplog.text


def test_reject_policy_names_row_and_column(tmp_path):
    p = write(tmp_path, "date,A,B\n2020-01,1,2\n2020-02,,2.5\n2020-03,2,3\n")
    with pytest.raises(IngestionError, match=r"row 3, column 'A'"):
        load_csv(p)


def test_dates_out_of_order(tmp_path):
    p = write(tmp_path, "date,A\n2020-02,1\n2020-01,2\n")
    with pytest.raises(IngestionError, match="dates not strictly increasing"):
        load_csv(p)


def test_duplicate_dates(tmp_path):
    p = write(tmp_path, "date,A\n2020-01-05,1\n2020-01-05,2\n")
    with pytest.raises(IngestionError, match="duplicate date"):
        load_csv(p)


@pytest.mark.parametrize(
    "text, match",
    [
        ("date,A\n2020-13,1\n2020-14,2\n", "unparseable date"),
        ("date,A\n2020-01,1\n2020-02,1,5\n", "cells"),
        ("date,A\n2020-01,1\n2020-02,1.2.3\n", r"column 'A': unparseable number"),
        ("when,A\n2020-01,1\n", "header"),
    ],
)
def test_ingestion_errors(tmp_path, text, match):
    with pytest.raises(IngestionError, match=match):
        load_csv(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(IngestionError, match="not found"):
        load_csv(tmp_path / "nope.csv")


def test_monthly_dates_normalized_to_first():
    assert parse_date("2021-09-30", "monthly") == (2021, 9, 1)
    assert parse_date("2021-09-30", "daily") == (2021, 9, 30)


def test_panel_is_immutable():
    p = TimeSeriesPanel(((2020, 1, 1), (2020, 2, 1)), ("A",), [[1.0], [2.0]])
    with pytest.raises(ValueError):
        p.values[0, 0] = 5.0


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    dates = [(2001, 1, d) for d in range(1, 11)]
    panel = TimeSeriesPanel(dates, ("X", "Y", "Z"), rng.lognormal(size=(10, 3)), "daily")
    write_csv(panel, tmp_path / "a.csv")
    again = load_csv(tmp_path / "a.csv", "daily")
    write_csv(again, tmp_path / "b.csv")
    assert load_csv(tmp_path / "b.csv", "daily") == panel
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def _panel(col):
    return TimeSeriesPanel([(2000, m, 1) for m in range(1, len(col) + 1)], ("A",), np.array(col)[:, None])


def test_log_returns_constant_and_exponential():
    assert np.array_equal(log_returns(_panel([3.0, 3.0, 3.0])).values[:, 0], [0.0, 0.0])
    r = log_returns(_panel([1.0, math.e, math.e ** 2])).values[:, 0]
    np.testing.assert_allclose(r, [1.0, 1.0], atol=1e-15)


def test_log_returns_against_extended_precision():
    col = np.random.default_rng(1).uniform(0.5, 200.0, size=10)
    r = log_returns(_panel(col))
    np.testing.assert_allclose(r.values[:, 0], log_returns_mp(col), rtol=0, atol=1e-14)
    assert r.dates == _panel(col).dates[1:]


def test_log_returns_rejects_nonpositive():
    with pytest.raises(DomainError, match=r"A at 2000-03"):
        log_returns(_panel([1.0, 2.0, 0.0]))


def _returns(col):
    return ReturnsPanel([(2000, m, 1) for m in range(1, len(col) + 1)], ("A",), np.array(col, float)[:, None])


def test_l1_normalize_examples():
    np.testing.assert_array_equal(l1_normalize(_returns([1, -1, 2]), "A").values, [0.25, -0.25, 0.5])
    with pytest.raises(DegenerateError, match="degenerate trajectory"):
        l1_normalize(_returns([0, 0, 0]), "A")


def test_l1_normalize_random_is_positive_multiple():
    x = np.random.default_rng(2).normal(size=50)
    t = l1_normalize(_returns(x), "A").values
    assert abs(math.fsum(abs(v) for v in t) - 1) < 1e-12
    ratio = t / x
    assert np.all(ratio > 0)
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-13)


finite_col = st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=40).filter(
    lambda v: any(abs(x) > 1e-6 for x in v)
)


@given(finite_col)
def test_l1_normalize_idempotent(col):
    once = l1_normalize(_returns(col), "A")
    twice = l1_normalize(_returns(once.values), "A")
    assert abs(np.abs(once.values).sum() - 1) < 1e-12
    np.testing.assert_allclose(twice.values, once.values, rtol=0, atol=1e-12)


@settings(max_examples=50)
@given(st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=60))
def test_cumulative_returns_reconstruct_levels(col):
    r = log_returns(_panel(col)).values[:, 0]
    rebuilt = np.exp(np.concatenate([[0.0], np.cumsum(r)]))
    np.testing.assert_allclose(rebuilt, np.array(col) / col[0], rtol=1e-10)
