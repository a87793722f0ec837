import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fhjm.drift import DriftField
from fhjm.fbm import FbmPathSet, generate_cholesky
from fhjm.hjm import (
    BondSurface,
    InitialCurve,
    bond_surface,
    discounted_surface,
    drift_for_simulation,
    money_account,
    simulate_forward,
    simulation_grids,
)
from fhjm.kernels import HurstParam
from fhjm.ledger import (
    DiscreteMeasure,
    Gate,
    Strategy,
    StrategyLeg,
    integration_by_parts_check,
    liquidation_value,
    total_variation,
)
from fhjm.vol import ho_lee

H75 = HurstParam(0.75)


def _flat_unit_market(n=16):
    tg, xg = simulation_grids(1.0, n, 1.0, n)
    init = InitialCurve.flat(0.0, tg.dt, 2 * n + 1)
    zero_drift = DriftField(
        tg.points, np.arange(2 * n + 1) * tg.dt, np.zeros((n + 1, 2 * n + 1))
    )
    zero_paths = FbmPathSet(
        grid=tg, dims=1, n_paths=1, samples=np.zeros((1, 1, n + 1)),
        seed=0, method="cholesky",
    )
    surf = simulate_forward(ho_lee(0.01), H75, zero_drift, init, zero_paths, xg)
    return discounted_surface(bond_surface(surf), money_account(surf))


def _noisy_market(n=16, n_paths=3, seed=77):
    tg, xg = simulation_grids(1.0, n, 1.0, n)
    spec = ho_lee(0.02)
    drift = drift_for_simulation(spec, H75, tg, xg, theta_cells=64)
    init = InitialCurve.flat(0.03, tg.dt, 2 * n + 1)
    paths = generate_cholesky(tg, 1, n_paths, H75, seed=seed)
    surf = simulate_forward(spec, H75, drift, init, paths, xg)
    return discounted_surface(bond_surface(surf), money_account(surf))


def buy_hold(weight=1.0, T=1.0, horizon=1.0):
    return Strategy(
        legs=(StrategyLeg(0.0, horizon, DiscreteMeasure(((T, weight),))),),
        horizon=horizon,
    )


def test_total_variation_examples():
    assert total_variation(buy_hold()) == 1.0
    two_step = Strategy(
        legs=(
            StrategyLeg(0.0, 0.5, DiscreteMeasure(((1.0, 1.0),))),
            StrategyLeg(0.5, 1.0, DiscreteMeasure(((1.0, 2.0),))),
        ),
        horizon=1.0,
    )
    assert total_variation(two_step) == 2.0
    assert total_variation(Strategy(legs=(), horizon=1.0)) == 0.0
    # exiting before the horizon adds the closing jump
    early = Strategy(
        legs=(StrategyLeg(0.0, 0.5, DiscreteMeasure(((0.5, 1.0),))),), horizon=1.0
    )
    assert total_variation(early) == 2.0


def test_flat_market_buy_hold_costs_twice():
    market = _flat_unit_market()
    assert np.nanmax(np.abs(market.discounted - 1.0)) == 0.0
    for k in (0.001, 0.01, 0.5):
        res = liquidation_value(buy_hold(), market, k=k)
        assert res.final_values()[0] == pytest.approx(-2 * k, abs=1e-15)
    res0 = liquidation_value(buy_hold(), market, k=0.0)
    assert np.all(res0.value == 0.0)


def test_value_scales_linearly_in_weights():
    market = _noisy_market()
    a = liquidation_value(buy_hold(1.0), market, k=0.01, path=1)
    b = liquidation_value(buy_hold(2.0), market, k=0.01, path=1)
    assert b.final_values()[0] == pytest.approx(2 * a.final_values()[0], rel=1e-12)
    assert np.allclose(b.gains, 2 * a.gains)
    assert np.allclose(b.costs, 2 * a.costs)


def test_value_nonincreasing_in_k():
    market = _noisy_market()
    strat = Strategy(
        legs=(
            StrategyLeg(0.0, 0.5, DiscreteMeasure(((1.0, 1.0),))),
            StrategyLeg(0.5, 1.0, DiscreteMeasure(((1.0, -0.5),))),
        ),
        horizon=1.0,
    )
    values = [
        liquidation_value(strat, market, k=k, path=2).value for k in (0.0, 0.01, 0.05)
    ]
    assert np.all(values[1] <= values[0] + 1e-15)
    assert np.all(values[2] <= values[1] + 1e-15)


def test_zero_cost_value_telescopes():
    market = _noisy_market()
    strat = buy_hold()
    res = liquidation_value(strat, market, k=0.0, path=0)
    z = market.discounted[0, :, -1]
    # V_t^0 is the telescoped left-point sum of holdings against increments
    expected = np.concatenate([[0.0], np.cumsum(np.diff(z))])
    assert np.allclose(res.value[0], expected)


def test_admissibility_floor_reported():
    market = _noisy_market()
    res = liquidation_value(buy_hold(), market, k=0.01, path=0)
    floor = res.admissibility_floor()[0]
    assert floor <= 0.0
    assert floor >= -10.0  # default bound is configuration, sanity here


def test_gate_threshold_uses_information_at_start():
    market = _noisy_market()
    z0 = market.discounted[0, 0, -1]
    active = Gate(kind="threshold", maturity=1.0, op="<=", level=z0 + 1e-9)
    inactive = Gate(kind="threshold", maturity=1.0, op=">=", level=z0 + 1.0)
    on = Strategy(
        legs=(StrategyLeg(0.0, 1.0, DiscreteMeasure(((1.0, 1.0),)), gate=active),),
        horizon=1.0,
    )
    off = Strategy(
        legs=(StrategyLeg(0.0, 1.0, DiscreteMeasure(((1.0, 1.0),)), gate=inactive),),
        horizon=1.0,
    )
    plain = liquidation_value(buy_hold(), market, k=0.01, path=0)
    gated_on = liquidation_value(on, market, k=0.01, path=0)
    gated_off = liquidation_value(off, market, k=0.01, path=0)
    assert np.allclose(gated_on.value, plain.value)
    assert np.all(gated_off.value == 0.0)


def test_strategy_validation():
    with pytest.raises(ValueError):
        Gate(kind="future-peek")
    with pytest.raises(ValueError):  # lookahead-style op rejected
        Gate(kind="threshold", maturity=1.0, op="<", level=1.0)
    with pytest.raises(ValueError):  # overlapping legs
        Strategy(
            legs=(
                StrategyLeg(0.0, 0.75, DiscreteMeasure(((1.0, 1.0),))),
                StrategyLeg(0.5, 1.0, DiscreteMeasure(((1.0, 1.0),))),
            ),
            horizon=1.0,
        )
    with pytest.raises(ValueError):  # support must stay ahead of time
        Strategy(
            legs=(StrategyLeg(0.5, 1.0, DiscreteMeasure(((0.25, 1.0),))),),
            horizon=1.0,
        )
    with pytest.raises(ValueError):  # beyond the horizon
        Strategy(
            legs=(StrategyLeg(0.0, 2.0, DiscreteMeasure(((2.0, 1.0),))),),
            horizon=1.0,
        )


def test_integration_by_parts_exact_on_grid():
    market = _noisy_market()
    strat = Strategy(
        legs=(
            StrategyLeg(0.0, 0.5, DiscreteMeasure(((1.0, 1.0), (0.5, -2.0)))),
            StrategyLeg(0.5, 1.0, DiscreteMeasure(((1.0, 3.0),))),
        ),
        horizon=1.0,
    )
    for p in range(market.n_paths):
        assert integration_by_parts_check(strat, market, path=p) < 1e-12
    empty = Strategy(legs=(), horizon=1.0)
    assert integration_by_parts_check(empty, market, path=0) == 0.0


@given(data=st.data())
@settings(max_examples=100, deadline=None)
def test_integration_by_parts_randomized(data):
    # randomized strategies and surfaces; the identity telescopes exactly
    n = 8
    seed = data.draw(st.integers(0, 2**31 - 1))
    rng = np.random.default_rng(seed)
    tg, xg = simulation_grids(1.0, n, 1.0, n)
    prices = np.exp(rng.normal(0.0, 0.2, size=(1, n + 1, n + 1)))
    mats = tg.points
    for i in range(n + 1):
        prices[0, i, :i] = np.nan
    surface = BondSurface(
        t_grid=tg, maturities=mats, prices=prices, discounted=prices
    )
    n_legs = data.draw(st.integers(1, 3))
    bounds = sorted(rng.choice(np.arange(n + 1), size=2 * n_legs, replace=False))
    legs = []
    for a, b in zip(bounds[::2], bounds[1::2]):
        if a == b:
            continue
        t_end = tg.points[b]
        candidates = mats[mats >= t_end - 1e-12]
        T = float(rng.choice(candidates))
        w = float(rng.uniform(-3, 3))
        legs.append(StrategyLeg(tg.points[a], t_end, DiscreteMeasure(((T, w),))))
    strategy = Strategy(legs=tuple(legs), horizon=1.0)
    assert integration_by_parts_check(strategy, surface, path=0) <= 1e-10
