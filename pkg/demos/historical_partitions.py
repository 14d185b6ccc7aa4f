"""Value a term loan on a single history cut into rescaled windows.

A synthetic ten-year daily history stands in for market data.  Each
window is rescaled to start at the contract values, so it acts as one
sample path; the partition count trades the number of samples against
their length.
"""

import numpy as np

from termloan.historical import PartitionSpec, partition_convergence, value_historical
from termloan.payoffs import DiscountConfig, TermLoanContract


def gbm(n, start, drift, vol, rng, spy=252):
    steps = (drift - 0.5 * vol**2) / spy + vol / np.sqrt(spy) * rng.standard_normal(n - 1)
    return start * np.exp(np.concatenate([[0.0], np.cumsum(steps)]))


rng = np.random.default_rng(7)
availability = gbm(2590, 1000.0, 0.0, 0.4, rng)
price = gbm(2590, 20.0, 0.05, 0.3, rng)
contract = TermLoanContract((90.0,), (1.0,), (0.5,))
starts = {"A": 100.0, "S": 50.0}

for overlap in (0.0, 0.5):
    spec = PartitionSpec(10, overlap)
    res = value_historical(availability, price, contract, spec, "stock_holding",
                           DiscountConfig(0.02), starts=starts)
    print(f"overlap {overlap}: {len(spec.windows(2590))} windows, "
          f"estimate {res.result.estimate:.2f} +- {res.result.std_error:.2f}")

print("partitions  estimate  std_error")
for row in partition_convergence(availability, price, contract, [2, 5, 10, 20], starts=starts):
    print(f"{row['partitions']:10d}  {row['estimate']:8.2f}  {row['std_error']:9.2f}")
