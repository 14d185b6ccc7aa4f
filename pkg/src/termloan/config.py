"""JSON configuration shared by the library workflows and the CLI.

Top-level keys (all optional except ``processes`` and ``contract``)::

    {
      "seed": 42,
      "n_paths": 5000,
      "horizon": 1.0,                 # years
      "steps_per_year": 252,
      "processes": [
        {"kind": "A", "security": 0, "start": 100, "drift": 0.0, "vol": 0.3},
        {"kind": "D", "mean": 50, "sd": 10}            # locate process
      ],
      "correlation": [[1.0, 0.2], [0.2, 1.0]],         # GBM processes, in order
      "locate_mode": "abs_normal",                     # or "poisson"
      "contract": {"quantity": [90], "payoff_down": [1.0], "payoff_up": [0.5],
                   "forward_start": 0, "exclusive_fee": 0.0, "spread": 0.2},
      "discount": {"rate": 0.02, "mode": "discrete_beta"},
      "structures": ["constant", "stock_holding"],
      "options": {"form": "whole_quantity", "unscaled": false},
      "grid": {"axes": ["availability_vol"], "steps": 5, "step_size": 0.1,
               "iteration_levels": [5000, 10000]},
      "historical": {"availability_csv": "a.csv", "price_csv": "s.csv",
                     "partitions": 10, "overlap": 0.0, "structure": "stock_holding",
                     "starts": {"A": 100, "S": 50}},
      "inventory": {"wholesale": 5, "retail": 9, "salvage": 1, "stockout": 2,
                    "order": 100, "unit_cost": 3, "threshold": 80,
                    "payoff_down": 1, "payoff_up": 1,
                    "demand": {"start": 100, "drift": 0.0, "vol": 0.3},
                    "modes": ["constant"], "direction": "down"}
    }

Relative file paths are resolved against the config file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .payoffs import STRUCTURES, DiscountConfig, TermLoanContract
from .processes import TRADING_DAYS, CorrelatedSystem, Kind, ProcessSpec, TimeGrid

DEFAULT_SEED = 20_160_601


@dataclass(frozen=True)
class ValuationConfig:
    """Everything needed to simulate paths and value term-loan structures."""

    system: CorrelatedSystem
    contract: TermLoanContract
    discount: DiscountConfig = DiscountConfig()
    horizon: float = 1.0
    steps_per_year: int = TRADING_DAYS
    n_paths: int = 5000
    seed: int = DEFAULT_SEED
    locate_mode: str = "abs_normal"
    structures: tuple[str, ...] = STRUCTURES
    options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False, compare=False)
    base_dir: Path = field(default=Path("."), repr=False, compare=False)

    def __post_init__(self):
        for s in self.structures:
            if s not in STRUCTURES:
                raise ValueError(f"unknown structure {s!r}; expected one of {STRUCTURES}")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid.from_years(self.horizon, self.steps_per_year)

    def notional(self) -> float | None:
        """``sum_i H_i S_i0`` from the configured price starts, if any."""
        total = 0.0
        for i, h in enumerate(self.contract.quantity):
            try:
                total += h * self.system.spec(Kind.PRICE, i).start
            except KeyError:
                return None
        return total

    def with_(self, **changes) -> "ValuationConfig":
        return replace(self, **changes)


def _spec(d: dict) -> ProcessSpec:
    known = {"kind", "start", "drift", "vol", "security", "rate", "mean", "sd"}
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown process keys {sorted(extra)}")
    return ProcessSpec(**d)


def parse_config(raw: dict, base_dir=".") -> ValuationConfig:
    if "processes" not in raw:
        raise ValueError("config needs a 'processes' list")
    if "contract" not in raw:
        raise ValueError("config needs a 'contract' section")
    specs = tuple(_spec(p) for p in raw["processes"])
    system = CorrelatedSystem(specs, raw.get("correlation"))
    c = dict(raw["contract"])
    contract = TermLoanContract(
        quantity=c.pop("quantity"),
        payoff_down=c.pop("payoff_down", 1.0),
        payoff_up=c.pop("payoff_up", 0.0),
        forward_start=c.pop("forward_start", 0),
        exclusive_fee=c.pop("exclusive_fee", 0.0),
        spread=c.pop("spread", 0.0),
    )
    if c:
        raise ValueError(f"unknown contract keys {sorted(c)}")
    discount = DiscountConfig(**raw.get("discount", {}))
    return ValuationConfig(
        system=system,
        contract=contract,
        discount=discount,
        horizon=float(raw.get("horizon", 1.0)),
        steps_per_year=int(raw.get("steps_per_year", TRADING_DAYS)),
        n_paths=int(raw.get("n_paths", 5000)),
        seed=int(raw.get("seed", DEFAULT_SEED)),
        locate_mode=raw.get("locate_mode", "abs_normal"),
        structures=tuple(raw.get("structures", STRUCTURES)),
        options=dict(raw.get("options", {})),
        raw=raw,
        base_dir=Path(base_dir),
    )


def load_config(path) -> ValuationConfig:
    path = Path(path)
    with open(path) as fh:
        raw = json.load(fh)
    return parse_config(raw, path.parent)


def default_system(**overrides) -> CorrelatedSystem:
    """Single-security system with every process the eight structures use."""
    specs = {
        Kind.AVAILABILITY: dict(start=100.0, drift=0.0, vol=0.4),
        Kind.PRICE: dict(start=50.0, drift=0.03, vol=0.25),
        Kind.BORROW_RATE: dict(start=0.02, drift=0.0, vol=0.2),
        Kind.LOAN_BOOK: dict(start=60.0, drift=0.0, vol=0.5),
        Kind.BORROW_BOOK: dict(start=40.0, drift=0.0, vol=0.5),
        Kind.DEMAND: dict(start=90.0, drift=0.0, vol=0.3),
    }
    for kind, changes in overrides.items():
        specs[Kind(kind)].update(changes)
    return CorrelatedSystem(tuple(ProcessSpec(k, **v) for k, v in specs.items()))


def default_config(**changes) -> ValuationConfig:
    base = ValuationConfig(
        system=default_system(),
        contract=TermLoanContract((90.0,), (1.0,), (0.5,), spread=0.25, exclusive_fee=0.01),
        discount=DiscountConfig(0.02),
    )
    return replace(base, **changes)
