"""Newsvendor-style retailer P&L and demand-barrier payoffs.

Symbols from the inventory setting are namespaced so they cannot be
confused with the lending rate model: ``unit_cost`` (c), ``wholesale``
(w), ``salvage`` (s), ``stockout`` (r), ``retail`` (p).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import payoffs
from .payoffs import DiscountConfig, TermLoanContract, ValuationResult
from .processes import (
    _STREAM_JUMP,
    CorrelatedSystem,
    Kind,
    PathBundle,
    ProcessSpec,
    TimeGrid,
    path_rng,
    simulate_gbm_paths,
)


def _as_series(value, n_times: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n_times, float(arr))
    if arr.shape[-1] < n_times:
        raise ValueError(f"{name} series has {arr.shape[-1]} points, need {n_times}")
    return arr[..., :n_times]


@dataclass(frozen=True)
class InventoryParams:
    """Costs may be scalars or per-period series (the stochastic-cost case)."""

    wholesale: object
    retail: object
    salvage: object
    stockout: object
    order: object
    unit_cost: float = 0.0
    threshold: float = 1.0
    payoff_down: float = 1.0
    payoff_up: float = 0.0

    def __post_init__(self):
        w, p, s, r = (np.asarray(x, dtype=float) for x in
                      (self.wholesale, self.retail, self.salvage, self.stockout))
        if not (np.all(0 < s) and np.all(s < w) and np.all(w < p)):
            raise ValueError("inventory costs must satisfy 0 < salvage < wholesale < retail")
        if not np.all(p > self.unit_cost):
            raise ValueError("retail price must exceed unit cost")
        if not np.all(r > 0):
            raise ValueError("stockout cost must be positive")
        if np.any(np.asarray(self.order, dtype=float) < 0):
            raise ValueError("order quantity must be nonnegative")
        if not self.threshold > 0:
            raise ValueError(f"demand threshold must be positive, got {self.threshold}")
        if self.payoff_down < 0 or self.payoff_up < 0:
            raise ValueError("payoffs must be nonnegative")

    def contract(self) -> TermLoanContract:
        return TermLoanContract((self.threshold,), (self.payoff_down,), (self.payoff_up,))


def simulate_demand(spec: ProcessSpec, grid: TimeGrid, n_paths: int, seed: int, *,
                    jump_prob: float = 0.0, jump_mean: float = 0.0, jump_sd: float = 0.0) -> PathBundle:
    """GBM demand, optionally with lognormal jumps mixed in per step.

    Each step jumps with probability ``jump_prob``; the log jump size is
    ``Normal(jump_mean, jump_sd)``.  With ``jump_prob=0`` this is plain GBM.
    """
    if not 0 <= jump_prob <= 1:
        raise ValueError(f"jump_prob must lie in [0, 1], got {jump_prob}")
    if spec.kind is not Kind.DEMAND:
        raise ValueError(f"demand spec must have kind H, got {spec.kind.value}")
    bundle = simulate_gbm_paths(CorrelatedSystem((spec,)), grid, n_paths, seed)
    if jump_prob == 0:
        return bundle
    values = np.array(bundle.values)
    for p in range(n_paths):
        rng = path_rng(seed, p, _STREAM_JUMP)
        jumps = (rng.random(grid.n_steps) < jump_prob) * rng.normal(jump_mean, jump_sd, grid.n_steps)
        values[p, 0, 1:] *= np.exp(np.cumsum(jumps))
    return PathBundle(values, grid, bundle.labels, seed)


def retailer_cashflows(demand: PathBundle, params: InventoryParams,
                       discount: DiscountConfig = DiscountConfig(), kind=Kind.DEMAND) -> np.ndarray:
    n = demand.grid.n_steps
    d = demand.series(kind)[:, : n + 1]
    if np.any(d < 0):
        raise ValueError("demand must be nonnegative")
    q = _as_series(params.order, n + 1, "order")
    p = _as_series(params.retail, n + 1, "retail")
    w = _as_series(params.wholesale, n + 1, "wholesale")
    r = _as_series(params.stockout, n + 1, "stockout")
    s = _as_series(params.salvage, n + 1, "salvage")
    excess = d - q
    pnl = (np.minimum(d, q) * p - q * w
           - np.maximum(excess, 0.0) * r + np.maximum(-excess, 0.0) * s)
    cf = np.zeros((demand.n_paths, demand.n_times))
    cf[:, : n + 1] = pnl * payoffs.discount_factors(demand, discount)[: n + 1]
    return cf


def retailer_pnl(demand: PathBundle, params: InventoryParams,
                 discount: DiscountConfig = DiscountConfig(), kind=Kind.DEMAND) -> ValuationResult:
    """Expected retailer profit over periods ``0..T``.

    Per period: ``min(D, Q) p - Q w - (D - Q)^+ r + (D - Q)^- s``.  Passing
    series for the costs gives the stochastic-cost variant.
    """
    cf = retailer_cashflows(demand, params, discount, kind)
    return payoffs.summarize("retailer_pnl", cf, demand)


def value_demand_breach(demand: PathBundle, params: InventoryParams,
                        discount: DiscountConfig = DiscountConfig(), mode: str = "constant",
                        direction: str = "down", kind=Kind.DEMAND) -> ValuationResult:
    """Barrier payoffs with demand as the underlying and the threshold as barrier.

    ``direction="down"`` pays ``payoff_down`` when demand falls to the
    threshold.  ``direction="up"`` treats ``D >= H`` as the breach and
    costs ``payoff_up``; for the counters a move back below the threshold
    then pays ``-payoff_down``.
    """
    if direction not in ("down", "up"):
        raise ValueError(f"direction must be 'down' or 'up', got {direction!r}")
    if not demand.has(kind):
        raise ValueError(f"demand bundle has no {Kind(kind).value} series")
    k_hit, k_back = ((params.payoff_down, params.payoff_up) if direction == "down"
                     else (params.payoff_up, params.payoff_down))
    contract = TermLoanContract((params.threshold,), (k_hit,), (k_back,))
    if mode in ("constant", "proportional_time"):
        cf = payoffs._first_breach_cashflows(demand, contract, discount,
                                             proportional=mode == "proportional_time",
                                             kind=kind, direction=direction)
    elif mode in ("constant_counter", "proportional_counter"):
        cf = payoffs.value_counter(demand, contract, discount, mode.split("_")[0],
                                   kind=kind, direction=direction).cashflows
    else:
        raise ValueError(f"unknown demand-breach mode {mode!r}")
    return payoffs.summarize(f"inventory_{mode}_{direction}", cf, demand)
