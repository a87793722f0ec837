import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import kurtosis, skew

from fhjm.drift import DriftField, ho_lee_drift
from fhjm.fbm import FbmPathSet, TimeGrid, generate_cholesky
from fhjm.hjm import (
    InitialCurve,
    bond_surface,
    closed_form_bond,
    discounted_surface,
    drift_for_simulation,
    money_account,
    simulate_forward,
    simulation_grids,
)
from fhjm.kernels import HurstParam
from fhjm.vol import MaturityGrid, ho_lee

H75 = HurstParam(0.75)


def _zero_paths(grid, dims=1, n_paths=1):
    return FbmPathSet(
        grid=grid, dims=dims, n_paths=n_paths,
        samples=np.zeros((n_paths, dims, grid.n_steps + 1)),
        seed=0, method="cholesky",
    )


def _zero_drift(tg, n_ext):
    return DriftField(tg.points, np.arange(n_ext) * tg.dt, np.zeros((tg.n_steps + 1, n_ext)))


def test_grid_alignment_enforced():
    with pytest.raises(ValueError):
        simulation_grids(1.0, 64, 1.0, 48)
    tg, xg = simulation_grids(2.0, 64, 1.0, 32)
    assert tg.dt == xg.dx


def test_pure_transport_shift_exact():
    tg, xg = simulation_grids(1.0, 32, 1.0, 32)
    init = InitialCurve.from_table([0, 2], [0.01, 0.05], tg.dt, 65)
    surf = simulate_forward(
        ho_lee(0.02), H75, _zero_drift(tg, 65), init, _zero_paths(tg), xg
    )
    for i in range(33):
        assert np.array_equal(surf.rates[0, i, :], init.values[i : i + 33])


def test_grid_mismatch_rejected():
    tg, xg = simulation_grids(1.0, 32, 1.0, 32)
    init = InitialCurve.flat(0.03, tg.dt, 65)
    bad_drift = _zero_drift(tg, 40)  # does not cover the extended range
    with pytest.raises(ValueError):
        simulate_forward(ho_lee(0.02), H75, bad_drift, init, _zero_paths(tg), xg)
    short_init = InitialCurve.flat(0.03, tg.dt, 33)
    with pytest.raises(ValueError):
        simulate_forward(
            ho_lee(0.02), H75, _zero_drift(tg, 65), short_init, _zero_paths(tg), xg
        )
    wrong_x = MaturityGrid(1.0, 16)
    with pytest.raises(ValueError):
        simulate_forward(
            ho_lee(0.02), H75, _zero_drift(tg, 65), init, _zero_paths(tg), wrong_x
        )


def test_deterministic_flat_market():
    tg, xg = simulation_grids(1.0, 64, 1.0, 64)
    init = InitialCurve.flat(0.03, tg.dt, 129)
    surf = simulate_forward(
        ho_lee(0.02), H75, _zero_drift(tg, 129), init, _zero_paths(tg), xg
    )
    bonds = bond_surface(surf)
    assert bonds.prices[0, 0, -1] == pytest.approx(np.exp(-0.03), rel=1e-14)
    # P(t, t) = 1 exactly on the diagonal
    for i in (0, 10, 64):
        assert bonds.prices[0, i, i] == 1.0
    account = money_account(surf)
    assert account[0, 0] == 1.0
    assert account[0, -1] == pytest.approx(np.exp(0.03), rel=1e-14)
    assert np.all(np.diff(account[0]) >= 0)
    z = discounted_surface(bonds, account).discounted
    # flat deterministic market: Z_t(T) = exp(-r T) constant in t
    col = z[0, :, -1]
    assert np.nanmax(np.abs(col - col[0])) < 1e-13
    assert z[0, 0, -1] == pytest.approx(bonds.prices[0, 0, -1])


def test_bond_prices_decrease_in_maturity():
    tg, xg = simulation_grids(1.0, 32, 1.0, 32)
    init = InitialCurve.flat(0.04, tg.dt, 65)
    drift = drift_for_simulation(ho_lee(0.005), H75, tg, xg, theta_cells=64)
    paths = generate_cholesky(tg, 1, 4, H75, seed=3)
    surf = simulate_forward(ho_lee(0.005), H75, drift, init, paths, xg)
    prices = bond_surface(surf).prices
    for p in range(4):
        row = prices[p, 0, :]
        assert np.all(np.diff(row) < 0)


def test_maturity_beyond_grid_rejected():
    tg, xg = simulation_grids(1.0, 16, 0.5, 8)
    init = InitialCurve.flat(0.03, tg.dt, 25)
    surf = simulate_forward(
        ho_lee(0.02), H75, _zero_drift(tg, 25), init, _zero_paths(tg), xg
    )
    with pytest.raises(ValueError):
        bond_surface(surf, maturities=[2.0])
    with pytest.raises(ValueError):
        bond_surface(surf, maturities=[0.517])  # off-grid


def test_maturity_window_prices_only_reachable_pairs():
    # T = 0.75 with x_max = 0.5: priced for t in [0.25, 0.75], NaN elsewhere
    tg, xg = simulation_grids(1.0, 16, 0.5, 8)
    init = InitialCurve.flat(0.03, tg.dt, 25)
    surf = simulate_forward(
        ho_lee(0.02), H75, _zero_drift(tg, 25), init, _zero_paths(tg), xg
    )
    bonds = bond_surface(surf, maturities=[0.75])
    col = bonds.prices[0, :, 0]
    assert np.all(np.isnan(col[:4]))
    assert np.all(np.isnan(col[13:]))
    assert np.all(np.isfinite(col[4:13]))
    assert col[12] == 1.0  # P(T, T)
    assert col[4] == pytest.approx(np.exp(-0.03 * 0.5), rel=1e-12)


def test_flat_vol_moments():
    hurst = HurstParam(0.7)
    sigma = 0.02
    spec = ho_lee(sigma)
    tg, xg = simulation_grids(1.0, 64, 1.0, 64)
    drift = drift_for_simulation(spec, hurst, tg, xg, theta_cells=256)
    init = InitialCurve.flat(0.03, tg.dt, 129)
    paths = generate_cholesky(tg, 1, 20_000, hurst, seed=99)
    surf = simulate_forward(spec, hurst, drift, init, paths, xg)

    # variance of r_t(x): the noise term is sigma * beta_t for every x
    for i, k in [(32, 0), (64, 17)]:
        t = tg.points[i]
        target = sigma**2 * t ** (2 * hurst.h)
        se = target * np.sqrt(2 / 20_000)
        assert abs(surf.rates[:, i, k].var() - target) < 3 * se

    # mean short rate: initial curve plus the accumulated drift along the
    # diagonal, oracle by adaptive quadrature of the closed form
    i = 64
    oracle, _ = quad(lambda s: ho_lee_drift(sigma, hurst, s, 1.0 - s), 0, 1)
    sample = surf.rates[:, i, 0]
    se_mean = sample.std() / np.sqrt(sample.size)
    assert abs(sample.mean() - (0.03 + oracle)) < 3 * se_mean


def test_gaussian_marginals():
    hurst = HurstParam(0.7)
    tg, xg = simulation_grids(1.0, 32, 1.0, 32)
    spec = ho_lee(0.02)
    drift = drift_for_simulation(spec, hurst, tg, xg, theta_cells=64)
    init = InitialCurve.flat(0.03, tg.dt, 65)
    paths = generate_cholesky(tg, 1, 10_000, hurst, seed=111)
    surf = simulate_forward(spec, hurst, drift, init, paths, xg)
    sample = surf.rates[:, 20, 5]
    n = sample.size
    assert abs(skew(sample)) < 4 * np.sqrt(6 / n)
    assert abs(kurtosis(sample)) < 4 * np.sqrt(24 / n)


def test_closed_form_bond_deterministic_reduction():
    tg, xg = simulation_grids(1.0, 32, 1.0, 32)
    spec = ho_lee(0.02)
    init = InitialCurve.flat(0.03, tg.dt, 65)
    zd = _zero_drift(tg, 65)
    cf = closed_form_bond(spec, H75, zd, init, _zero_paths(tg), xg)
    direct = bond_surface(
        simulate_forward(spec, H75, zd, init, _zero_paths(tg), xg)
    )
    mask = ~np.isnan(cf.prices)
    assert np.abs(cf.prices[mask] - direct.prices[mask]).max() < 1e-12
    # t = 0 row reproduces P(0, T) exactly
    assert cf.prices[0, 0, -1] == pytest.approx(np.exp(-0.03), rel=1e-13)


def test_two_oracle_agreement_and_refinement():
    spec = ho_lee(0.02)
    devs = {}
    for n in (128, 512):
        tg, xg = simulation_grids(1.0, n, 1.0, n)
        drift = drift_for_simulation(spec, H75, tg, xg, theta_cells=64)
        init = InitialCurve.flat(0.02, tg.dt, 2 * n + 1)
        paths = generate_cholesky(tg, 1, 3, H75, seed=4)
        surf = simulate_forward(spec, H75, drift, init, paths, xg)
        direct = bond_surface(surf)
        cf = closed_form_bond(spec, H75, drift, init, paths, xg)
        mask = ~np.isnan(direct.prices)
        devs[n] = np.abs(direct.prices[mask] / cf.prices[mask] - 1).max()
    assert devs[512] < 1e-3
    assert devs[512] < devs[128]
