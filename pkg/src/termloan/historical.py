"""Valuation on one historical series split into rescaled partitions.

Each window of the history is treated as one path.  Every variable in a
window is multiplied by a constant so that its first value matches the
contract's start value; the term quantity is left unscaled.  The estimate
is the average of the single-window payoffs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .payoffs import (
    STRUCTURES,
    DiscountConfig,
    TermLoanContract,
    ValuationResult,
    structure_cashflows,
    summarize,
)
from .processes import TRADING_DAYS, Kind, PathBundle, TimeGrid, as_kind


@dataclass(frozen=True)
class HistoricalSeries:
    values: np.ndarray
    times: np.ndarray | None = None
    kind: Kind = Kind.AVAILABILITY

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("historical series needs at least two observations")
        if not np.all(values > 0):
            raise ValueError("historical series must be strictly positive")
        times = np.arange(values.size) if self.times is None else np.asarray(self.times)
        if times.shape != values.shape:
            raise ValueError("times and values differ in length")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "kind", as_kind(self.kind))

    def __len__(self) -> int:
        return self.values.size

    @classmethod
    def from_csv(cls, path, kind=Kind.AVAILABILITY) -> "HistoricalSeries":
        times, values = [], []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                times.append(rec["time"])
                values.append(float(rec["value"]))
        return cls(np.array(values), np.array(times), kind)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "value"])
            for t, v in zip(self.times, self.values):
                w.writerow([t, repr(float(v))])


@dataclass(frozen=True)
class PartitionSpec:
    """``count`` windows; ``overlap`` is the fraction shared by neighbours.

    Window length is ``len // count``.  With overlap ``f`` the windows are
    shifted by ``floor(length * (1 - f))`` and as many as fit are used,
    which for ``f = 1/2`` gives ``2 * count - 1`` windows.
    """

    count: int
    overlap: float = 0.0

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"partition count must be a positive integer, got {self.count}")
        if not 0 <= self.overlap < 1:
            raise ValueError(f"overlap must lie in [0, 1), got {self.overlap}")

    def windows(self, length: int) -> list[tuple[int, int]]:
        """Half-open ``(start, end)`` index ranges."""
        if self.count > length // 2:
            raise ValueError(
                f"{self.count} partitions of a {length}-point series leave windows shorter than 2"
            )
        size = length // self.count
        usable = size * self.count
        shift = max(1, int(size * (1 - self.overlap)))
        return [(a, a + size) for a in range(0, usable - size + 1, shift)]


def partition_series(series, spec: PartitionSpec) -> list[np.ndarray]:
    values = series.values if isinstance(series, HistoricalSeries) else np.asarray(series, dtype=float)
    return [values[a:b] for a, b in spec.windows(values.size)]


def rescale_partition(sub, target_start: float) -> tuple[np.ndarray, float]:
    """Multiply ``sub`` so its first value is ``target_start``.

    Returns the scaled series and the factor.  The first scaled value is
    set to ``target_start`` itself so the match is exact.
    """
    sub = np.asarray(sub, dtype=float)
    if not sub[0] > 0:
        raise ValueError(f"first observation must be positive, got {sub[0]}")
    if not target_start > 0:
        raise ValueError(f"target start must be positive, got {target_start}")
    factor = target_start / sub[0]
    scaled = sub * factor
    scaled[0] = target_start
    return scaled, factor


def partition_bundle(series: dict, starts: dict, spec: PartitionSpec,
                     steps_per_year: int = TRADING_DAYS) -> tuple[PathBundle, dict]:
    """Rescaled windows of every series as one PathBundle (one path per window).

    ``series`` and ``starts`` map process kinds to historical series and
    contract start values.  Windows of ``m`` points give a grid of
    ``m - 2`` steps so the last point serves as step ``T + 1``.

    Returns the bundle and the scale factors per kind (one per window).
    """
    kinds = [as_kind(k) for k in series]
    arrays = {as_kind(k): (v.values if isinstance(v, HistoricalSeries) else np.asarray(v, float))
              for k, v in series.items()}
    lengths = {a.size for a in arrays.values()}
    if len(lengths) != 1:
        raise ValueError(f"historical series cover different time indices (lengths {sorted(lengths)})")
    windows = spec.windows(lengths.pop())
    m = windows[0][1] - windows[0][0]
    if m < 3:
        raise ValueError(f"windows of {m} points are too short to value")
    starts = {as_kind(k): v for k, v in starts.items()}
    values = np.empty((len(windows), len(kinds), m))
    factors = {}
    for j, kind in enumerate(kinds):
        if kind not in starts:
            raise ValueError(f"no contract start value for {kind.value}")
        fs = []
        for w, (a, b) in enumerate(windows):
            values[w, j], f = rescale_partition(arrays[kind][a:b], starts[kind])
            fs.append(f)
        factors[kind] = np.array(fs)
    grid = TimeGrid((m - 2) / steps_per_year, m - 2)
    return PathBundle(values, grid, tuple((k, 0) for k in kinds)), factors


@dataclass
class HistoricalResult:
    result: ValuationResult
    pnl: np.ndarray
    partition_estimates: np.ndarray
    scale_factors: dict

    def pnl_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["partition", "step", "pnl"])
            for j, row in enumerate(self.pnl):
                for t, v in enumerate(row):
                    w.writerow([j, t, repr(float(v))])


def value_historical(availability, price, contract: TermLoanContract, spec: PartitionSpec,
                     structure: str = "stock_holding",
                     discount: DiscountConfig = DiscountConfig(), *,
                     starts: dict | None = None, extra: dict | None = None,
                     steps_per_year: int = TRADING_DAYS, **options) -> HistoricalResult:
    """Value ``structure`` on the rescaled windows of a single history.

    ``starts`` gives the contract start values per kind; availability and
    price default to the first historical observations.  ``extra`` adds
    further series (borrow rate, demand, books) rescaled the same way.
    The standard error is across partitions.
    """
    if structure not in STRUCTURES:
        raise ValueError(f"unknown structure {structure!r}")
    if contract.n_securities != 1:
        raise ValueError("historical valuation handles one security at a time")
    series = {Kind.AVAILABILITY: availability, Kind.PRICE: price}
    series.update({as_kind(k): v for k, v in (extra or {}).items()})
    for k, v in list(series.items()):
        if not isinstance(v, HistoricalSeries):
            series[k] = HistoricalSeries(v, kind=k)
    idx = [tuple(s.times) for s in series.values()]
    if any(i != idx[0] for i in idx):
        raise ValueError("historical series cover different time indices")
    starts = {as_kind(k): v for k, v in (starts or {}).items()}
    for k, s in series.items():
        starts.setdefault(k, float(s.values[0]))
    bundle, factors = partition_bundle(series, starts, spec, steps_per_year)
    cf = structure_cashflows(structure, bundle, contract, discount, **options)
    res = summarize(structure, cf, bundle, contract)
    return HistoricalResult(res, cf, res.pathwise.copy(), factors)


def partition_convergence(availability, price, contract: TermLoanContract, counts,
                          structure: str = "stock_holding",
                          discount: DiscountConfig = DiscountConfig(), **kwargs) -> list[dict]:
    """Estimate and standard error as the partition count varies."""
    rows = []
    for p in counts:
        res = value_historical(availability, price, contract, PartitionSpec(p), structure,
                               discount, **kwargs).result
        rows.append({"partitions": p, "estimate": res.estimate, "std_error": res.std_error})
    return rows
