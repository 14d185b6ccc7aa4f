"""Term-loan payoff structures evaluated on simulated or historical paths.

Every structure is computed as a discounted cashflow matrix of shape
``(n_paths, n_times)``.  Summing a row gives the pathwise payoff; the
estimate is the mean over paths.  The same matrix doubles as the daily
P&L series used by the historical valuation.

Step ``k`` corresponds to time ``k * tau``.  Structures that need prices
or rates one step past the horizon (``S[T+1]``, ``Q[T+1]``) require a
bundle simulated with ``extra_steps=1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .processes import Kind, PathBundle

STRUCTURES = (
    "constant",
    "proportional_time",
    "constant_counter",
    "proportional_counter",
    "stock_holding",
    "borrow_rate",
    "stochastic_demand",
    "desk_profit",
)

DISCOUNT_MODES = ("discrete_beta", "continuous_exp", "none")


def _per_security(values, n: int, name: str) -> tuple[float, ...]:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if arr.size == 1 and n > 1:
        arr = np.repeat(arr, n)
    if arr.shape != (n,):
        raise ValueError(f"{name} needs {n} entries, got {arr.size}")
    return tuple(float(v) for v in arr)


@dataclass(frozen=True)
class TermLoanContract:
    """Term-loan terms, one entry per security for the per-security fields.

    ``forward_start`` is a step index; ``exclusive_fee`` is charged once
    per step; the loan rate is ``(1 + spread) * Q``.
    """

    quantity: tuple[float, ...]
    payoff_down: tuple[float, ...] = (1.0,)
    payoff_up: tuple[float, ...] = (0.0,)
    forward_start: int = 0
    exclusive_fee: float = 0.0
    spread: float = 0.0

    def __post_init__(self):
        qty = np.atleast_1d(np.asarray(self.quantity, dtype=float))
        n = qty.size
        object.__setattr__(self, "quantity", _per_security(qty, n, "quantity"))
        object.__setattr__(self, "payoff_down", _per_security(self.payoff_down, n, "payoff_down"))
        object.__setattr__(self, "payoff_up", _per_security(self.payoff_up, n, "payoff_up"))
        if any(not h > 0 for h in self.quantity):
            raise ValueError(f"term quantity must be positive, got {self.quantity}")
        if any(k < 0 for k in self.payoff_down + self.payoff_up):
            raise ValueError("payoffs must be nonnegative")
        if int(self.forward_start) != self.forward_start or self.forward_start < 0:
            raise ValueError(f"forward_start must be a nonnegative step, got {self.forward_start}")
        object.__setattr__(self, "forward_start", int(self.forward_start))

    @property
    def n_securities(self) -> int:
        return len(self.quantity)

    @property
    def rate_multiplier(self) -> float:
        return 1.0 + self.spread

    def loan_rate(self, borrow_rate):
        return self.rate_multiplier * borrow_rate


@dataclass(frozen=True)
class DiscountConfig:
    """Annual rate ``r``; cashflows at time ``t`` (years) are scaled by
    ``beta**t`` with ``beta = 1/(1+r)``, by ``exp(-r t)``, or not at all."""

    rate: float = 0.0
    mode: str = "discrete_beta"

    def __post_init__(self):
        if self.mode not in DISCOUNT_MODES:
            raise ValueError(f"unknown discount mode {self.mode!r}")
        if self.mode == "discrete_beta" and not self.rate > -1:
            raise ValueError(f"discrete discount needs r > -1, got {self.rate}")

    @property
    def beta(self) -> float:
        return 1.0 / (1.0 + self.rate)

    def factors(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.mode == "none" or self.rate == 0.0:
            return np.ones_like(times)
        if self.mode == "discrete_beta":
            return self.beta**times
        return np.exp(-self.rate * times)


@dataclass
class ValuationResult:
    structure: str
    estimate: float
    std_error: float
    n_paths: int
    annualized_rate: float | None = None
    pathwise: np.ndarray | None = field(default=None, repr=False)
    cashflows: np.ndarray | None = field(default=None, repr=False)

    def row(self) -> dict:
        return {
            "structure": self.structure,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "n_paths": self.n_paths,
            "annualized_rate": self.annualized_rate,
        }


RESULT_HEADER = ["structure", "estimate", "std_error", "n_paths", "annualized_rate"]


def format_results(results) -> str:
    """CSV text ``structure,estimate,std_error,n_paths,annualized_rate``.

    Floats use ``repr`` so values round-trip exactly; an undefined rate is
    left blank.
    """
    lines = [",".join(RESULT_HEADER)]
    for r in results:
        rate = "" if r.annualized_rate is None else repr(float(r.annualized_rate))
        lines.append(f"{r.structure},{float(r.estimate)!r},{float(r.std_error)!r},{r.n_paths},{rate}")
    return "\n".join(lines) + "\n"


def write_results(results, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_results(results))


@dataclass(frozen=True)
class StateIndicator:
    """0/1 arrays of shape ``(n_paths, n_securities, n_steps + 1)``."""

    up: np.ndarray
    down: np.ndarray


def annualized_rate(value: float, quantity: float, start_price: float, horizon: float) -> float | None:
    """Continuously compounded rate ``ln(value / (H * S0)) / T``.

    Returns None when the value is not positive (rate undefined).
    """
    if quantity <= 0 or start_price <= 0 or horizon <= 0:
        raise ValueError("quantity, start price and horizon must be positive")
    if not value > 0:
        return None
    return math.log(value / (quantity * start_price)) / horizon


def _notional(bundle: PathBundle, contract: TermLoanContract) -> float | None:
    total = 0.0
    for i, h in enumerate(contract.quantity):
        if not bundle.has(Kind.PRICE, i):
            return None
        total += h * float(np.mean(bundle.series(Kind.PRICE, i)[:, 0]))
    return total


def summarize(structure: str, cashflows: np.ndarray, bundle: PathBundle,
              contract: TermLoanContract | None = None) -> ValuationResult:
    """Collapse a cashflow matrix into an estimate with its standard error."""
    pathwise = cashflows.sum(axis=1)
    n = pathwise.size
    est = float(pathwise.mean())
    se = float(pathwise.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    rate = None
    if contract is not None:
        notional = _notional(bundle, contract)
        if notional:
            rate = annualized_rate(est, 1.0, notional, bundle.grid.horizon)
    return ValuationResult(structure, est, se, n, rate, pathwise, cashflows)


def discount_factors(bundle: PathBundle, discount: DiscountConfig) -> np.ndarray:
    return discount.factors(np.arange(bundle.n_times) * bundle.grid.step)


def _check_securities(bundle: PathBundle, contract: TermLoanContract, *kinds: Kind) -> None:
    for i in range(contract.n_securities):
        for kind in kinds:
            if not bundle.has(kind, i):
                raise ValueError(f"path bundle is missing the {kind.value}[{i}] series")
    if contract.forward_start > bundle.grid.n_steps:
        raise ValueError(
            f"forward_start {contract.forward_start} beyond horizon of {bundle.grid.n_steps} steps"
        )


def _require_extension(bundle: PathBundle) -> None:
    if bundle.n_times < bundle.grid.n_steps + 2:
        raise ValueError(
            "structure needs values at step T+1; simulate with extra_steps=1 "
            f"(have {bundle.n_times} points for {bundle.grid.n_steps} steps)"
        )


# ---------------------------------------------------------------- breaches


def first_breach(series: np.ndarray, barrier, direction: str = "down") -> tuple[np.ndarray, np.ndarray]:
    """Flag and step of the first breach along the last axis.

    A down breach is ``series <= barrier``, an up breach ``series >= barrier``.
    Steps are only meaningful where the flag is set.
    """
    breached = 1 - indicator_from_series(series, barrier, direction)
    return breached.any(axis=-1), breached.argmax(axis=-1)


def _first_breach_cashflows(bundle, contract, discount, proportional: bool,
                            kind=Kind.AVAILABILITY, direction: str = "down"):
    _check_securities(bundle, contract, kind)
    n = bundle.grid.n_steps
    d = discount_factors(bundle, discount)
    cf = np.zeros((bundle.n_paths, bundle.n_times))
    rows = np.arange(bundle.n_paths)
    for i, (h, k) in enumerate(zip(contract.quantity, contract.payoff_down)):
        hit, step = first_breach(bundle.series(kind, i)[:, : n + 1], h, direction)
        amount = k * d[step]
        if proportional:
            amount = amount * (n - step) / n
        np.add.at(cf, (rows[hit], step[hit]), amount[hit])
    return cf


def value_constant_breach(paths: PathBundle, contract: TermLoanContract,
                          discount: DiscountConfig = DiscountConfig()) -> ValuationResult:
    """Pay ``K_i`` at the first step where availability is at or below ``H_i``."""
    cf = _first_breach_cashflows(paths, contract, discount, proportional=False)
    return summarize("constant", cf, paths, contract)


def value_proportional_time(paths: PathBundle, contract: TermLoanContract,
                            discount: DiscountConfig = DiscountConfig()) -> ValuationResult:
    """Pay ``K_i (T - t*) / T`` at the first breach step ``t*``."""
    cf = _first_breach_cashflows(paths, contract, discount, proportional=True)
    return summarize("proportional_time", cf, paths, contract)


# ---------------------------------------------------------------- counters


def indicator_from_series(series: np.ndarray, barrier, direction: str = "down") -> np.ndarray:
    """Up-state indicator of a series relative to a barrier.

    For ``direction="down"`` a path is Up while strictly above the barrier
    and a touch counts as the Down (breach) state.  ``direction="up"``
    mirrors this for upper thresholds: the breach state is ``series >= barrier``.
    """
    if direction == "down":
        return (series > barrier).astype(np.int8)
    if direction == "up":
        return (series < barrier).astype(np.int8)
    raise ValueError(f"direction must be 'down' or 'up', got {direction!r}")


def compute_state_indicator(paths: PathBundle, contract: TermLoanContract,
                            kind=Kind.AVAILABILITY, direction: str = "down") -> StateIndicator:
    """Up/Down states of each security relative to its term quantity.

    A value equal to the quantity is assigned to the breach state.
    """
    _check_securities(paths, contract, kind)
    n = paths.grid.n_steps
    up = np.stack(
        [indicator_from_series(paths.series(kind, i)[:, : n + 1], h, direction)
         for i, h in enumerate(contract.quantity)],
        axis=1,
    )
    return StateIndicator(up=up, down=1 - up)


def count_transitions(indicator) -> tuple[np.ndarray, np.ndarray]:
    """Downward and upward transition counts along the last axis.

    Accepts a StateIndicator or a raw Up array.  Uses the floor-function
    counters ``floor((1 + U_t - U_{t+1}) / 2)`` and ``floor((1 - U_t + U_{t+1}) / 2)``.
    """
    up = np.asarray(indicator.up if isinstance(indicator, StateIndicator) else indicator, dtype=np.int64)
    if up.shape[-1] < 1:
        raise ValueError("indicator must have at least one step")
    cur, nxt = up[..., :-1], up[..., 1:]
    down_count = np.floor_divide(1 + cur - nxt, 2).sum(axis=-1)
    up_count = np.floor_divide(1 - cur + nxt, 2).sum(axis=-1)
    return down_count, up_count


def counter_cashflows(up: np.ndarray, payoff_down: float, payoff_up: float, *,
                      mode: str = "constant", factors: np.ndarray | None = None,
                      unscaled: bool = False) -> np.ndarray:
    """Cashflows of the per-crossing payoff on an Up-indicator array.

    ``up`` has shape ``(..., T + 1)``.  Starting in the Down state pays
    ``payoff_down`` at step 0; each Up->Down move between ``t`` and
    ``t + 1`` pays ``payoff_down`` at step ``t + 1`` and each Down->Up move
    pays ``-payoff_up``.  In proportional mode transition cashflows carry
    the weight ``(T - t - 1) / T``; ``unscaled=True`` selects the variant
    with weight ``T - t - 1`` and initial cashflow ``payoff_down * T``.

    The result has the same shape as ``up``.
    """
    up = np.asarray(up, dtype=np.int64)
    t_steps = up.shape[-1] - 1
    if t_steps < 1:
        raise ValueError("counter payoffs need a horizon of at least one step")
    if mode not in ("constant", "proportional"):
        raise ValueError(f"counter mode must be 'constant' or 'proportional', got {mode!r}")
    cur, nxt = up[..., :-1], up[..., 1:]
    down_moves = np.floor_divide(1 + cur - nxt, 2)
    up_moves = np.floor_divide(1 - cur + nxt, 2)
    t = np.arange(t_steps)
    if mode == "constant":
        weight = np.ones(t_steps)
        initial = payoff_down
    elif unscaled:
        weight = (t_steps - t - 1).astype(float)
        initial = payoff_down * t_steps
    else:
        weight = (t_steps - t - 1) / t_steps
        initial = payoff_down
    cf = np.zeros(up.shape, dtype=float)
    cf[..., 0] = initial * (1 - up[..., 0])
    cf[..., 1:] = weight * (payoff_down * down_moves - payoff_up * up_moves)
    if factors is not None:
        cf = cf * np.asarray(factors)[: t_steps + 1]
    return cf


def value_counter(paths: PathBundle, contract: TermLoanContract,
                  discount: DiscountConfig = DiscountConfig(), mode: str = "constant",
                  *, unscaled: bool = False, kind=Kind.AVAILABILITY,
                  direction: str = "down") -> ValuationResult:
    """Constant or proportional payoff every time the barrier is crossed."""
    ind = compute_state_indicator(paths, contract, kind, direction)
    n = paths.grid.n_steps
    d = discount_factors(paths, discount)
    cf = np.zeros((paths.n_paths, paths.n_times))
    for i in range(contract.n_securities):
        cf[:, : n + 1] += counter_cashflows(
            ind.up[:, i], contract.payoff_down[i], contract.payoff_up[i],
            mode=mode, factors=d, unscaled=unscaled,
        )
    return summarize(f"{mode}_counter", cf, paths, contract)


# ---------------------------------------------------------- holding costs


def _holding_terms(shortfall, price, start: int, n: int, d) -> np.ndarray:
    """``shortfall_t * (S_t - S_{t+1})`` discounted, for ``t = start..n``."""
    cf = np.zeros(price.shape)
    t = slice(start, n + 1)
    cf[:, t] = shortfall[:, t] * (price[:, t] - price[:, start + 1 : n + 2]) * d[t]
    return cf


def _stock_holding_cashflows(bundle, contract, discount, quantity=None):
    _check_securities(bundle, contract, Kind.AVAILABILITY, Kind.PRICE)
    _require_extension(bundle)
    n, k0 = bundle.grid.n_steps, contract.forward_start
    d = discount_factors(bundle, discount)
    cf = np.zeros((bundle.n_paths, bundle.n_times))
    for i in range(contract.n_securities):
        h = contract.quantity[i] if quantity is None else quantity[i]
        short = np.maximum(h - bundle.series(Kind.AVAILABILITY, i), 0.0)
        cf += _holding_terms(short, bundle.series(Kind.PRICE, i), k0, n, d)
    return cf


def value_stock_holding(paths: PathBundle, contract: TermLoanContract,
                        discount: DiscountConfig = DiscountConfig()) -> ValuationResult:
    """Cost of holding stock equal to the availability shortfall.

    ``sum_t (H - A_t)^+ (S_t - S_{t+1})`` over ``t = kappa..T``.
    """
    return summarize("stock_holding", _stock_holding_cashflows(paths, contract, discount), paths, contract)


def _rate_terms(filled, price, rate, start: int, n: int, d) -> np.ndarray:
    """``filled_t * (S_t Q_t - S_{t+1} Q_{t+1})`` discounted, ``t = start..n``."""
    sq = price * rate
    cf = np.zeros(price.shape)
    t = slice(start, n + 1)
    cf[:, t] = filled[:, t] * (sq[:, t] - sq[:, start + 1 : n + 2]) * d[t]
    return cf


def _borrow_cashflows(bundle, contract, discount, form, final_relend, demand=None):
    kinds = [Kind.AVAILABILITY, Kind.PRICE, Kind.BORROW_RATE]
    _check_securities(bundle, contract, *kinds)
    _require_extension(bundle)
    if form not in ("whole_quantity", "incremental"):
        raise ValueError(f"borrow-rate form must be 'whole_quantity' or 'incremental', got {form!r}")
    n, k0, tau = bundle.grid.n_steps, contract.forward_start, bundle.grid.step
    d = discount_factors(bundle, discount)
    cf = np.zeros((bundle.n_paths, bundle.n_times))
    for i in range(contract.n_securities):
        a = bundle.series(Kind.AVAILABILITY, i)
        s = bundle.series(Kind.PRICE, i)
        q = bundle.series(Kind.BORROW_RATE, i)
        h = contract.quantity[i] if demand is None else demand[i]
        cf += _holding_terms(np.maximum(h - a, 0.0), s, k0, n, d)
        filled = np.minimum(h, a)
        if form == "whole_quantity":
            # rate accrues over [t, t+1) for each of the N periods
            t = slice(k0, n)
            cf[:, t] += s[:, t] * q[:, t] * filled[:, t] * tau * d[t]
        else:
            cf += _rate_terms(filled, s, q, k0, n, d)
            if final_relend:
                cf[:, n + 1] += filled[:, n] * s[:, n + 1] * q[:, n + 1] * d[n + 1]
    return cf


def value_borrow_rate(paths: PathBundle, contract: TermLoanContract,
                      discount: DiscountConfig = DiscountConfig(), form: str = "whole_quantity",
                      *, final_relend: bool = False) -> ValuationResult:
    """Stock-holding cost plus the borrow cost of the filled quantity.

    ``whole_quantity`` accrues ``S_t Q_t min(H, A_t) tau`` per period.
    ``incremental`` charges ``min(H, A_t) (S_t Q_t - S_{t+1} Q_{t+1})`` and by
    default drops the final re-lend term (shares assumed re-lent at the
    prevailing borrow rate); pass ``final_relend=True`` to keep it.
    """
    cf = _borrow_cashflows(paths, contract, discount, form, final_relend)
    return summarize("borrow_rate", cf, paths, contract)


def value_stochastic_demand(paths: PathBundle, demand_paths: PathBundle | None,
                            contract: TermLoanContract,
                            discount: DiscountConfig = DiscountConfig(),
                            *, final_relend: bool = False) -> ValuationResult:
    """Incremental borrow-rate payoff with the term quantity following ``H_t``.

    ``demand_paths`` holds the ``H`` series (it may be ``paths`` itself or
    None to read ``H`` from ``paths``).
    """
    demand_paths = paths if demand_paths is None else demand_paths
    n = paths.grid.n_steps
    if demand_paths.grid != paths.grid or demand_paths.n_paths != paths.n_paths:
        raise ValueError("demand and availability paths must share grid and path count")
    if demand_paths.n_times < n + 1:
        raise ValueError("demand series shorter than the horizon")
    demand = []
    for i in range(contract.n_securities):
        if not demand_paths.has(Kind.DEMAND, i):
            raise ValueError(f"demand bundle is missing the H[{i}] series")
        h = np.zeros((paths.n_paths, paths.n_times))
        m = min(paths.n_times, demand_paths.n_times)
        h[:, :m] = demand_paths.series(Kind.DEMAND, i)[:, :m]
        demand.append(h)
    cf = _borrow_cashflows(paths, contract, discount, "incremental", final_relend, demand)
    return summarize("stochastic_demand", cf, paths, contract)


def _desk_profit_cashflows(bundle, contract, discount):
    _check_securities(bundle, contract, Kind.LOAN_BOOK, Kind.BORROW_BOOK, Kind.PRICE, Kind.BORROW_RATE)
    _require_extension(bundle)
    n = bundle.grid.n_steps
    d = discount_factors(bundle, discount)
    cf = np.zeros((bundle.n_paths, bundle.n_times))
    for i in range(contract.n_securities):
        s = bundle.series(Kind.PRICE, i)
        q = bundle.series(Kind.BORROW_RATE, i)
        r = contract.loan_rate(q)
        loans = bundle.series(Kind.LOAN_BOOK, i)
        borrows = bundle.series(Kind.BORROW_BOOK, i)
        cf += _rate_terms(loans, s, r, 0, n, d) - _rate_terms(borrows, s, q, 0, n, d)
        cf[:, n + 1] += (loans[:, n] * s[:, n + 1] * r[:, n + 1]
                         - borrows[:, n] * s[:, n + 1] * q[:, n + 1]) * d[n + 1]
    cf[:, :n] -= contract.exclusive_fee * d[:n]
    return cf


def desk_profit(paths: PathBundle, contract: TermLoanContract,
                discount: DiscountConfig = DiscountConfig()) -> ValuationResult:
    """Loan-book revenue at ``R = (1 + c) Q`` less borrow-book cost and exclusive fees."""
    return summarize("desk_profit", _desk_profit_cashflows(paths, contract, discount), paths, contract)


def structure_cashflows(structure: str, paths: PathBundle, contract: TermLoanContract,
                        discount: DiscountConfig = DiscountConfig(), **options) -> np.ndarray:
    """Discounted cashflow matrix of any structure tag.

    Recognised options: ``unscaled`` (counters), ``form`` and
    ``final_relend`` (borrow rate), ``final_relend`` and ``demand_paths``
    (stochastic demand).  Options a structure does not use are ignored.
    """
    unknown = set(options) - {"unscaled", "form", "final_relend", "demand_paths"}
    if unknown:
        raise ValueError(f"unknown valuation options {sorted(unknown)}")
    if structure == "constant":
        return _first_breach_cashflows(paths, contract, discount, proportional=False)
    if structure == "proportional_time":
        return _first_breach_cashflows(paths, contract, discount, proportional=True)
    if structure in ("constant_counter", "proportional_counter"):
        return value_counter(paths, contract, discount, structure.split("_")[0],
                            unscaled=options.get("unscaled", False)).cashflows
    if structure == "stock_holding":
        return _stock_holding_cashflows(paths, contract, discount)
    if structure == "borrow_rate":
        return _borrow_cashflows(paths, contract, discount, options.get("form", "whole_quantity"),
                                 options.get("final_relend", False))
    if structure == "stochastic_demand":
        return value_stochastic_demand(paths, options.get("demand_paths"), contract, discount,
                                       final_relend=options.get("final_relend", False)).cashflows
    if structure == "desk_profit":
        return _desk_profit_cashflows(paths, contract, discount)
    raise ValueError(f"unknown structure {structure!r}; expected one of {STRUCTURES}")


def value_structure(structure: str, paths: PathBundle, contract: TermLoanContract,
                    discount: DiscountConfig = DiscountConfig(), **options) -> ValuationResult:
    cf = structure_cashflows(structure, paths, contract, discount, **options)
    return summarize(structure, cf, paths, contract)


# ------------------------------------------------------------ benchmarks


def value_vanilla_put(paths: PathBundle, contract: TermLoanContract,
                      discount: DiscountConfig = DiscountConfig(), *,
                      strike_multiple: float = 2.0, thresholds=None) -> ValuationResult:
    """American put on availability, normalized against the binary payoff.

    The put is struck at ``strike_multiple * H`` and its share payoff is
    scaled by ``K / (strike - H)`` so that exercising exactly at the term
    quantity pays ``K``.  The American value is approximated from below by
    the best of a family of threshold rules (exercise at the first
    ``A <= b``, otherwise at expiry if in the money).
    """
    if strike_multiple <= 1:
        raise ValueError("strike_multiple must exceed 1")
    _check_securities(paths, contract, Kind.AVAILABILITY)
    if thresholds is None:
        # 1.0 is included exactly: that rule alone dominates the binary pathwise
        thresholds = np.union1d(np.linspace(0.5, strike_multiple, 16), [1.0])
    n = paths.grid.n_steps
    d = discount_factors(paths, discount)
    rows = np.arange(paths.n_paths)
    best = None
    for mult in thresholds:
        cf = np.zeros((paths.n_paths, paths.n_times))
        for i, (h, k) in enumerate(zip(contract.quantity, contract.payoff_down)):
            strike = strike_multiple * h
            scale = k / (strike - h)
            a = paths.series(Kind.AVAILABILITY, i)[:, : n + 1]
            hit, step = first_breach(a, mult * h)
            step = np.where(hit, step, n)
            pay = scale * np.maximum(strike - a[rows, step], 0.0) * d[step]
            np.add.at(cf, (rows, step), pay)
        res = summarize("vanilla_put", cf, paths, contract)
        if best is None or res.estimate > best.estimate:
            best = res
    return best


def first_passage_mc(start: float, barrier: float, drift: float, vol: float, horizon: float, *,
                     payoff: float = 1.0, discount_rate: float = 0.0, n_paths: int = 100_000,
                     steps_per_year: int = 5000, seed: int = 0, bridge: bool = True,
                     batch: int = 20_000, block: int = 256) -> tuple[float, float]:
    """Monte Carlo value of ``payoff * exp(-discount_rate * tau)`` paid at the
    first time a GBM falls to ``barrier``, if that happens before ``horizon``.

    With ``bridge=True`` the probability of crossing between grid points is
    taken from the Brownian bridge, which removes the discrete-monitoring
    bias; with ``bridge=False`` only grid points are monitored.  Returns
    ``(estimate, std_error)``.
    """
    if start <= barrier:
        return float(payoff), 0.0
    if vol <= 0:
        raise ValueError("first-passage simulation needs vol > 0")
    n = max(1, math.ceil(horizon * steps_per_year - 1e-9))
    tau = horizon / n
    mu = (drift - 0.5 * vol**2) * tau
    sd = vol * math.sqrt(tau)
    lb = math.log(barrier / start)
    values = np.empty(n_paths)
    for b, lo in enumerate(range(0, n_paths, batch)):
        m = min(batch, n_paths - lo)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(b,))))
        x = np.zeros(m)
        surv = np.ones(m)
        val = np.zeros(m)
        alive = np.arange(m)
        t0 = 0
        while t0 < n and alive.size:
            k = min(block, n - t0)
            path = x[:, None] + np.cumsum(mu + sd * rng.standard_normal((alive.size, k)), axis=1)
            if bridge:
                prev = np.concatenate([x[:, None], path[:, :-1]], axis=1)
                gap = (prev - lb) * (path - lb)
                p = np.where((path > lb) & (prev > lb), np.exp(-2.0 * gap / sd**2), 1.0)
                when = (t0 + np.arange(1, k + 1) - 0.5) * tau
            else:
                p = (path <= lb).astype(float)
                when = (t0 + np.arange(1, k + 1)) * tau
            s_after = surv[:, None] * np.cumprod(1.0 - p, axis=1)
            s_before = np.concatenate([surv[:, None], s_after[:, :-1]], axis=1)
            val[alive] += (s_before * p) @ np.exp(-discount_rate * when)
            surv = s_after[:, -1]
            x = path[:, -1]
            keep = surv > 0
            alive, surv, x = alive[keep], surv[keep], x[keep]
            t0 += k
        values[lo : lo + m] = val
    values *= payoff
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(n_paths))
