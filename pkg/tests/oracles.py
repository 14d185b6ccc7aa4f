"""Reference computations written independently of the package.

Each oracle uses a different formulation or a brute-force loop over the
same inputs, so agreement with the library is evidence rather than a
restatement.  Only the standard library and numpy are used here.
"""

from __future__ import annotations

import itertools
import math
from statistics import NormalDist

import numpy as np

_PHI = NormalDist().cdf


def erf_series(x: float, terms: int = 80) -> float:
    """Maclaurin series ``2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))``."""
    total, term = 0.0, x
    for n in range(terms):
        total += term / (2 * n + 1)
        term *= -x * x / (n + 1)
    return 2.0 / math.sqrt(math.pi) * total


def first_passage_probability(a0: float, h: float, mu: float, sigma: float, t: float) -> float:
    """``P(min_{s<=t} A_s <= h)`` for GBM via the reflection principle."""
    if h >= a0:
        return 1.0
    nu = mu - 0.5 * sigma**2
    b = math.log(h / a0)
    st = sigma * math.sqrt(t)
    return _PHI((b - nu * t) / st) + math.exp(2 * nu * b / sigma**2) * _PHI((b + nu * t) / st)


def first_passage_laplace(a0: float, h: float, mu: float, sigma: float, t: float, lam: float) -> float:
    """``E[exp(-lam * tau) 1{tau <= t}]`` for the GBM hitting time of ``h``.

    Written with the normal CDF in log-space drift/vol parameters, which
    is an independent route to the same quantity as the erf form.
    """
    if h >= a0:
        return 1.0
    nu = mu - 0.5 * sigma**2
    b = math.log(h / a0)
    c = math.sqrt(nu**2 + 2 * lam * sigma**2)
    st = sigma * math.sqrt(t)
    return (math.exp((nu - c) * b / sigma**2) * _PHI((b - c * t) / st)
            + math.exp((nu + c) * b / sigma**2) * _PHI((b + c * t) / st))


def brute_transitions(seq) -> tuple[int, int]:
    """(Up->Down, Down->Up) counts by an adjacent-pair scan."""
    down = up = 0
    for a, b in zip(seq[:-1], seq[1:]):
        if a == 1 and b == 0:
            down += 1
        elif a == 0 and b == 1:
            up += 1
    return down, up


def event_driven_counter(seq, payoff_down: float, payoff_up: float, *, mode: str = "constant",
                         unscaled: bool = False, factors=None) -> list[float]:
    """Walk the state sequence and book a cashflow at every state change.

    Returns the per-step cashflow list.  Step 0 pays the down payoff if the
    path starts in the breach state.
    """
    n = len(seq) - 1
    d = [1.0] * (n + 1) if factors is None else list(factors)
    out = [0.0] * (n + 1)
    if seq[0] == 0:
        out[0] = (payoff_down * n if unscaled and mode == "proportional" else payoff_down) * d[0]
    for t in range(n):
        if mode == "constant":
            w = 1.0
        elif unscaled:
            w = float(n - t - 1)
        else:
            w = (n - t - 1) / n
        if seq[t] == 1 and seq[t + 1] == 0:
            out[t + 1] = w * payoff_down * d[t + 1]
        elif seq[t] == 0 and seq[t + 1] == 1:
            out[t + 1] = -(w * payoff_up) * d[t + 1]
    return out


def all_sequences(length: int):
    return itertools.product((0, 1), repeat=length)


def unsimplified_stock_holding(a: np.ndarray, s: np.ndarray, h: float) -> np.ndarray:
    """Buy the initial shortfall, rebalance each step, dispose at ``T+1``.

    ``a`` has shape ``(paths, T+1)`` and ``s`` shape ``(paths, T+2)``.
    Loops over steps explicitly instead of using the telescoped sum.
    """
    short = np.maximum(h - a, 0.0)
    n = a.shape[1] - 1
    total = short[:, 0] * s[:, 0]
    for t in range(1, n + 1):
        total = total + (short[:, t] - short[:, t - 1]) * s[:, t]
    return total - short[:, n] * s[:, n + 1]


def exhaustive_retailer(support, probs, order, retail, wholesale, stockout, salvage,
                        periods: int, factors) -> float:
    """Expected discounted retailer profit over every demand sequence.

    Demand is i.i.d. per period on ``support`` with ``probs``.
    """
    total = 0.0
    for combo in itertools.product(range(len(support)), repeat=periods):
        p = 1.0
        pnl = 0.0
        for t, k in enumerate(combo):
            p *= probs[k]
            d = support[k]
            sold = min(d, order)
            over = max(order - d, 0.0)
            under = max(d - order, 0.0)
            pnl += (sold * retail - order * wholesale - under * stockout + over * salvage) * factors[t]
        total += p * pnl
    return total


def recount_grid(n_axes: int, steps: int, n_levels: int) -> int:
    """Scenario count by explicit enumeration of (level, axis, multiplier)."""
    count = 0
    for _level in range(n_levels):
        count += 1
        for _axis in range(n_axes):
            for _k in range(2 * steps):
                count += 1
    return count
