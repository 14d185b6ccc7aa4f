"""Retailer profit and a demand-triggered payment.

A retailer orders a fixed quantity each period against lognormal demand.
The same breach payoffs used for lending can be written on demand: a
payment when demand falls to a threshold, here a quarter below today.
"""

from termloan.inventory import InventoryParams, retailer_pnl, simulate_demand, value_demand_breach
from termloan.payoffs import DiscountConfig
from termloan.processes import ProcessSpec, TimeGrid

params = InventoryParams(wholesale=5.0, retail=9.0, salvage=1.0, stockout=2.0,
                         order=100.0, unit_cost=3.0, threshold=75.0, payoff_down=1.0)
grid = TimeGrid(1.0, 12)
disc = DiscountConfig(0.03)

for label, jumps in (("plain", {}), ("with jumps", dict(jump_prob=0.1, jump_mean=-0.2, jump_sd=0.1))):
    demand = simulate_demand(ProcessSpec("H", start=100.0, vol=0.3), grid, 20_000, seed=11, **jumps)
    pnl = retailer_pnl(demand, params, disc)
    hit = value_demand_breach(demand, params, disc, "constant")
    print(f"{label:11} profit {pnl.estimate:9.2f} +- {pnl.std_error:.2f}   "
          f"breach payment {hit.estimate:.4f} +- {hit.std_error:.4f}")
