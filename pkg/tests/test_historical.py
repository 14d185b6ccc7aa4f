import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from termloan.historical import (
    HistoricalSeries,
    PartitionSpec,
    partition_bundle,
    partition_convergence,
    partition_series,
    rescale_partition,
    value_historical,
)
from termloan.payoffs import DiscountConfig, TermLoanContract, value_stock_holding
from termloan.processes import Kind


def gbm_history(n, start, drift, vol, seed, spy=252):
    rng = np.random.default_rng(seed)
    tau = 1 / spy
    steps = (drift - 0.5 * vol**2) * tau + vol * np.sqrt(tau) * rng.standard_normal(n - 1)
    return start * np.exp(np.concatenate([[0.0], np.cumsum(steps)]))


H90 = TermLoanContract((90.0,), (1.0,), (0.5,))


# ------------------------------------------------------------ partitions


def test_ten_year_window_arithmetic():
    assert PartitionSpec(10).windows(2590) == [(259 * j, 259 * (j + 1)) for j in range(10)]
    half = PartitionSpec(10, 0.5).windows(2590)
    assert len(half) == 19
    assert all(b - a == 259 for a, b in half)


def test_single_partition_returns_whole_series():
    x = np.arange(1.0, 102.0)
    (only,) = partition_series(x, PartitionSpec(1))
    assert np.array_equal(only, x)


def test_remainder_dropped_from_tail():
    parts = partition_series(np.arange(1.0, 24.0), PartitionSpec(5))
    assert [p.size for p in parts] == [4] * 5
    assert parts[-1][-1] == 20.0


@settings(max_examples=100)
@given(length=st.integers(4, 5000), data=st.data())
def test_non_overlapping_windows_tile_the_prefix(length, data):
    p = data.draw(st.integers(1, length // 2))
    windows = PartitionSpec(p).windows(length)
    size = length // p
    assert len(windows) == p
    covered = np.concatenate([np.arange(a, b) for a, b in windows])
    assert np.array_equal(covered, np.arange(p * size))


def test_too_many_partitions_rejected():
    with pytest.raises(ValueError, match="shorter than 2"):
        PartitionSpec(6).windows(10)
    with pytest.raises(ValueError):
        PartitionSpec(0)
    with pytest.raises(ValueError):
        PartitionSpec(3, overlap=1.0)


# ------------------------------------------------------------- rescaling


def test_rescale_examples():
    scaled, f = rescale_partition([50.0, 55.0, 45.0], 100.0)
    assert f == 2.0 and scaled.tolist() == [100.0, 110.0, 90.0]
    same, g = rescale_partition([7.0, 8.0], 7.0)
    assert g == 1.0 and same.tolist() == [7.0, 8.0]


@settings(max_examples=100)
@given(st.lists(st.floats(1e-3, 1e6), min_size=2, max_size=50), st.floats(1e-3, 1e6))
def test_rescale_is_exact_and_preserves_returns(sub, target):
    scaled, _ = rescale_partition(sub, target)
    assert scaled[0] == target
    sub = np.array(sub)
    np.testing.assert_allclose(np.log(scaled[1:] / scaled[:-1]), np.log(sub[1:] / sub[:-1]),
                               rtol=0, atol=1e-14)


def test_rescale_rejects_nonpositive_values():
    with pytest.raises(ValueError):
        rescale_partition([0.0, 1.0], 5.0)
    with pytest.raises(ValueError):
        rescale_partition([1.0, 1.0], -5.0)


def test_series_validation():
    with pytest.raises(ValueError, match="positive"):
        HistoricalSeries([1.0, -2.0])
    with pytest.raises(ValueError, match="two"):
        HistoricalSeries([1.0])


# ------------------------------------------------------------- valuation


def test_constant_availability_above_quantity_is_worthless():
    price = gbm_history(500, 40, 0.1, 0.3, seed=1)
    res = value_historical(np.full(500, 150.0), price, H90, PartitionSpec(5),
                           starts={"A": 150, "S": 50})
    assert res.result.estimate == 0.0


def test_single_partition_reduces_to_stock_holding():
    avail = gbm_history(300, 100, 0.0, 0.4, seed=2)
    price = gbm_history(300, 40, 0.05, 0.3, seed=3)
    starts = {"A": 95.0, "S": 50.0}
    res = value_historical(avail, price, H90, PartitionSpec(1), starts=starts,
                           discount=DiscountConfig(0.02))
    bundle, factors = partition_bundle({"A": avail, "S": price}, starts, PartitionSpec(1))
    direct = value_stock_holding(bundle, H90, DiscountConfig(0.02))
    assert res.result.estimate == direct.estimate
    assert factors[Kind.AVAILABILITY][0] == 95.0 / avail[0]


def test_estimate_is_mean_of_partition_estimates():
    avail = gbm_history(2590, 100, 0.0, 0.4, seed=4)
    price = gbm_history(2590, 40, 0.05, 0.3, seed=5)
    res = value_historical(avail, price, H90, PartitionSpec(10), starts={"A": 100, "S": 50})
    assert res.partition_estimates.size == 10
    assert res.result.estimate == np.mean(res.partition_estimates)
    assert res.result.std_error == np.std(res.partition_estimates, ddof=1) / np.sqrt(10)
    assert res.pnl.shape == (10, 259)


def test_quantity_is_not_rescaled():
    avail = gbm_history(400, 1000, 0.0, 0.4, seed=6)
    price = gbm_history(400, 40, 0.05, 0.3, seed=7)
    low = value_historical(avail, price, H90, PartitionSpec(4), starts={"A": 100, "S": 50})
    high = value_historical(avail, price, H90, PartitionSpec(4), starts={"A": 1000, "S": 50})
    # at the raw level of 1000 the 90-share loan is never short
    assert high.result.estimate == 0.0
    assert low.result.estimate != 0.0


def test_windows_start_at_contract_values():
    avail = gbm_history(1000, 300, 0.0, 0.4, seed=8)
    price = gbm_history(1000, 10, 0.05, 0.3, seed=9)
    bundle, _ = partition_bundle({"A": avail, "S": price}, {"A": 100.0, "S": 50.0}, PartitionSpec(10, 0.5))
    assert np.all(bundle.series("A")[:, 0] == 100.0)
    assert np.all(bundle.series("S")[:, 0] == 50.0)
    assert bundle.n_paths == 19


def test_every_structure_runs_on_history():
    n = 600
    series = {k: gbm_history(n, s, 0.0, 0.3, seed=i) for i, (k, s) in
              enumerate((("Q", 0.02), ("L", 60), ("B", 40), ("H", 90)))}
    avail = gbm_history(n, 100, 0.0, 0.4, seed=10)
    price = gbm_history(n, 40, 0.05, 0.3, seed=11)
    c = TermLoanContract((90.0,), (1.0,), (0.5,), spread=0.2, exclusive_fee=0.01)
    for s in ("constant", "proportional_time", "constant_counter", "proportional_counter",
              "stock_holding", "borrow_rate", "stochastic_demand", "desk_profit"):
        res = value_historical(avail, price, c, PartitionSpec(6), s, extra=series)
        assert res.result.structure == s and np.isfinite(res.result.estimate)


def test_mismatched_indices_rejected():
    a = HistoricalSeries(np.ones(10) * 100, np.arange(10))
    s = HistoricalSeries(np.ones(10) * 50, np.arange(1, 11))
    with pytest.raises(ValueError, match="time indices"):
        value_historical(a, s, H90, PartitionSpec(2))
    with pytest.raises(ValueError, match="different"):
        value_historical(np.ones(10) * 100, np.ones(12) * 50, H90, PartitionSpec(2))


def test_unknown_structure_rejected():
    with pytest.raises(ValueError, match="unknown structure"):
        value_historical(np.ones(10) * 100, np.ones(10) * 50, H90, PartitionSpec(2), "swap")


def test_convergence_table():
    avail = gbm_history(1200, 100, 0.0, 0.4, seed=12)
    price = gbm_history(1200, 40, 0.05, 0.3, seed=13)
    rows = partition_convergence(avail, price, H90, [2, 5, 10], starts={"A": 100, "S": 50})
    assert [r["partitions"] for r in rows] == [2, 5, 10]
    assert all(np.isfinite(r["estimate"]) for r in rows)


def test_csv_round_trips(tmp_path):
    avail = HistoricalSeries(gbm_history(50, 100, 0.0, 0.4, seed=14))
    avail.to_csv(tmp_path / "a.csv")
    back = HistoricalSeries.from_csv(tmp_path / "a.csv")
    assert np.array_equal(back.values, avail.values)
    res = value_historical(avail, gbm_history(50, 40, 0.0, 0.3, seed=15), H90, PartitionSpec(2))
    res.pnl_to_csv(tmp_path / "pnl.csv")
    lines = (tmp_path / "pnl.csv").read_text().splitlines()
    assert lines[0] == "partition,step,pnl"
    assert len(lines) == 1 + res.pnl.size
