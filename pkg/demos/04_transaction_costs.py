"""Trade bonds under proportional costs and inspect the liquidation ledger.

Builds a simple rebalancing strategy, runs it against simulated
discounted surfaces, and shows how the terminal liquidation value V^k
decreases with the cost level.  The exact discrete pairing identity
(holdings against prices) is checked along the way, and the oscillation
probe reports how often the surface stays inside narrow bands -- the
mechanism by which small frictions remove arbitrage from rough paths.
"""

import numpy as np

from fhjm import (
    DiscreteMeasure,
    HurstParam,
    InitialCurve,
    Strategy,
    StrategyLeg,
    drift_for_simulation,
    ho_lee,
    integration_by_parts_check,
    liquidation_value,
    oscillation_probe,
    simulate_discounted_batches,
    simulation_grids,
    total_variation,
)

hurst = HurstParam(0.7)
spec = ho_lee(0.02)
tg, xg = simulation_grids(1.0, 32, 1.0, 32)
field = drift_for_simulation(spec, hurst, tg, xg)
init = InitialCurve.flat(0.03, tg.dt, 65)

surfaces = list(
    simulate_discounted_batches(
        spec, hurst, field, init, tg, xg, n_paths=500, seed=21, batch_size=500
    )
)
market = surfaces[0]

strategy = Strategy(
    legs=(
        StrategyLeg(0.0, 0.5, DiscreteMeasure(((1.0, 2.0), (0.75, -1.0)))),
        StrategyLeg(0.5, 1.0, DiscreteMeasure(((1.0, 1.0),))),
    ),
    horizon=1.0,
)
print(f"strategy total variation: {total_variation(strategy)}")
resid = max(integration_by_parts_check(strategy, market, path=p) for p in range(10))
print(f"pairing-identity residual over 10 paths: {resid:.2e}")

print("\nterminal V^k by cost level (mean / 5% / 95% over 500 paths):")
for k in (0.0, 0.001, 0.005, 0.01):
    finals = np.array(
        [liquidation_value(strategy, market, k=k, path=p).final_values()[0]
         for p in range(market.n_paths)]
    )
    print(f"  k={k:<6} mean {finals.mean():+.5f}   "
          f"q05 {np.quantile(finals, 0.05):+.5f}   q95 {np.quantile(finals, 0.95):+.5f}")

print("\nsmall-oscillation frequencies (per restart time tau):")
probe = oscillation_probe(surfaces, thresholds=[0.01, 0.05, 0.2], taus=[0.0, 0.5])
for a, tau in enumerate(probe.taus):
    row = ", ".join(
        f"k={k:g}: {probe.frequencies[a, b]:.3f}"
        for b, k in enumerate(probe.thresholds)
    )
    print(f"  tau={tau}: {row}")
