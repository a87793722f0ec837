"""Forward-rate surface simulation and bond pricing on the triangular grid.

The forward curve follows transport dynamics: today's curve is shifted
left while the no-arbitrage drift and the volatility-weighted noise
increments are layered on top.  On grids with equal time and maturity
spacing the mild-solution sum

    r_{t_i}(x_k) = init(t_i + x_k)
                 + sum_{l<i} drift(t_l, x_k + t_i - t_l) * dt
                 + sum_j sum_{l<i} sigma_j(t_l, x_k + t_i - t_l) * dbeta_j_l

telescopes into the exact one-step recursion

    r_{t_{i+1}}(x_k) = r_{t_i}(x_{k+1}) + drift(t_i, x_{k+1}) * dt
                     + sum_j sigma_j(t_i, x_{k+1}) * dbeta_j_i,

which this module uses (same values to rounding, linear cost).  The
stochastic term is a left-point Riemann-Stieltjes sum, the correct
pathwise reading for deterministic integrands against Hoelder paths with
exponent above 1/2.

Bond prices integrate the curve by trapezoid, the money account
accumulates the short rate by trapezoid, and ``closed_form_bond``
reprices bonds through the exponential formula

    P(t,T) = P(0,T) * exp{ int_0^t [r_s(0) - IA(s,T)] ds
                           - sum_j int_0^t IV_j(s,T) dbeta_j_s },

an independent oracle for the surface-integration route.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .drift import DriftField
from .fbm import FbmPathSet, TimeGrid
from .kernels import HurstParam
from .vol import MaturityGrid, VolatilitySpec, eval_vol, integrated_vol

__all__ = [
    "InitialCurve",
    "ForwardSurface",
    "BondSurface",
    "simulation_grids",
    "drift_for_simulation",
    "simulate_forward",
    "bond_surface",
    "money_account",
    "discounted_surface",
    "closed_form_bond",
    "write_forward_csv",
    "write_bond_csv",
]


@dataclass(frozen=True)
class InitialCurve:
    """Initial forward curve sampled on the extended grid [0, t_star + x_max].

    The transport recursion reads init(t + x), so the curve is stored once
    on the full extended range and never extrapolated.
    """

    dx: float
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("initial curve needs a 1-d array of at least 2 values")
        if not np.all(np.isfinite(v)):
            raise ValueError("initial curve values must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "dx", float(self.dx))

    @classmethod
    def flat(cls, rate: float, dx: float, n_points: int) -> "InitialCurve":
        return cls(dx=dx, values=np.full(n_points, float(rate)))

    @classmethod
    def from_table(cls, xs, vals, dx: float, n_points: int) -> "InitialCurve":
        xs = np.asarray(xs, dtype=float)
        vals = np.asarray(vals, dtype=float)
        grid = np.arange(n_points) * dx
        if grid[-1] > xs[-1] + 1e-12:
            raise ValueError("initial-curve table does not cover the extended grid")
        return cls(dx=dx, values=np.interp(grid, xs, vals))

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dx


@dataclass(frozen=True)
class ForwardSurface:
    """Per-path forward rates r[p, i, k] on (time, time-to-maturity) grids."""

    t_grid: TimeGrid
    x_grid: MaturityGrid
    rates: np.ndarray
    seed: int | None = None

    @property
    def n_paths(self) -> int:
        return self.rates.shape[0]

    def short_rate(self) -> np.ndarray:
        return self.rates[:, :, 0]


@dataclass(frozen=True)
class BondSurface:
    """Per-path bond prices P[p, i, m] = P(t_i, T_m), NaN where t_i > T_m."""

    t_grid: TimeGrid
    maturities: np.ndarray
    prices: np.ndarray
    discounted: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.prices.shape[0]


def simulation_grids(t_star: float, n_steps: int, x_max: float, m_steps: int):
    """Aligned simulation grids: the transport shift must be an exact index move.

    Requires t_star/n_steps == x_max/m_steps (relative tolerance 1e-9).
    """
    tg = TimeGrid(t_star, n_steps)
    xg = MaturityGrid(x_max, m_steps)
    if abs(tg.dt - xg.dx) > 1e-9 * tg.dt:
        raise ValueError(
            "grids must be aligned: t_star/n_steps must equal x_max/m_steps"
        )
    return tg, xg


def drift_for_simulation(
    spec: VolatilitySpec,
    hurst: HurstParam,
    t_grid: TimeGrid,
    x_grid: MaturityGrid,
    theta_cells: int = 1024,
) -> DriftField:
    """No-arbitrage drift on the extended maturity range [0, x_max + t_star].

    The recursion consumes drift arguments up to x_max + t_star; building
    the field on the extended grid keeps every lookup an exact index.
    """
    from .drift import drift_field

    ext_points = np.arange(x_grid.m_steps + t_grid.n_steps + 1) * t_grid.dt
    return drift_field(spec, hurst, t_grid.points, ext_points, theta_cells=theta_cells)


def _check_sim_inputs(spec, drift, init, paths, x_grid):
    tg = paths.grid
    n, m = tg.n_steps, x_grid.m_steps
    if abs(tg.dt - x_grid.dx) > 1e-9 * tg.dt:
        raise ValueError("time and maturity grids must share their spacing")
    if drift.values.shape[0] != n + 1 or drift.values.shape[1] < n + m + 1:
        raise ValueError(
            "drift field must cover the t-grid and the extended maturity range"
        )
    if abs(drift.dt - tg.dt) > 1e-9 * tg.dt or abs(drift.dx - tg.dt) > 1e-9 * tg.dt:
        raise ValueError("drift field grids do not match the simulation grids")
    if init.values.size < n + m + 1 or abs(init.dx - tg.dt) > 1e-9 * tg.dt:
        raise ValueError("initial curve must cover [0, t_star + x_max] at grid spacing")
    if paths.dims != spec.dims:
        raise ValueError("path set dimension does not match the volatility spec")


def _vol_cube(spec: VolatilitySpec, t_grid: TimeGrid, ext_points: np.ndarray) -> np.ndarray:
    """sigma_j(t_i, x_q) on the extended maturity grid; shape (d, n, Q)."""
    d = spec.dims
    n = t_grid.n_steps
    cube = np.empty((d, n, ext_points.size))
    for j in range(1, d + 1):
        for i in range(n):
            cube[j - 1, i] = np.asarray(
                eval_vol(spec, j, t_grid.points[i], ext_points, extrapolate="flat"),
                dtype=float,
            )
    return cube


def simulate_forward(
    spec: VolatilitySpec,
    hurst: HurstParam,
    drift: DriftField,
    init: InitialCurve,
    paths: FbmPathSet,
    x_grid: MaturityGrid,
) -> ForwardSurface:
    """Evolve the forward surface for every path in ``paths``.

    With zero drift and zero volatility this reduces to the exact shift
    r_t(x) = init(t + x).
    """
    _check_sim_inputs(spec, drift, init, paths, x_grid)
    tg = paths.grid
    n, m = tg.n_steps, x_grid.m_steps
    dt = tg.dt
    n_paths = paths.n_paths
    ext_points = np.arange(n + m + 1) * dt
    vol = _vol_cube(spec, tg, ext_points)
    dbeta = paths.increments()

    rates = np.empty((n_paths, n + 1, m + 1))
    cur = np.tile(init.values[: n + m + 1], (n_paths, 1))
    rates[:, 0, :] = cur[:, : m + 1]
    for i in range(n):
        length = n + m - i  # points retained after this step
        upd = drift.values[i, 1 : length + 1] * dt
        new = cur[:, 1 : length + 1] + upd[None, :]
        for j in range(spec.dims):
            new += dbeta[:, j, i][:, None] * vol[j, i, 1 : length + 1][None, :]
        cur = new
        rates[:, i + 1, :] = cur[:, : m + 1]
    return ForwardSurface(t_grid=tg, x_grid=x_grid, rates=rates, seed=paths.seed)


def _maturity_indices(t_grid: TimeGrid, x_grid: MaturityGrid, maturities) -> np.ndarray:
    mats = np.asarray(maturities, dtype=float)
    dt = t_grid.dt
    idx = np.round(mats / dt).astype(int)
    if np.any(np.abs(idx * dt - mats) > 1e-9 * max(dt, 1.0)):
        raise ValueError("maturities must sit on the time grid")
    if np.any(mats > t_grid.t_star + x_grid.x_max + 1e-12):
        raise ValueError("maturity beyond the maturity grid")
    return idx


def bond_surface(
    surface: ForwardSurface, maturities=None
) -> BondSurface:
    """Zero-coupon prices P(t_i, T_m) = exp(-trapz of r_{t_i} over [0, T_m - t_i]).

    ``maturities`` default to the full time grid; every requested pair
    needs T_m - t_i <= x_max.  P(t, t) = 1 exactly (empty integral);
    entries with t_i > T_m are NaN.
    """
    tg, xg = surface.t_grid, surface.x_grid
    if maturities is None:
        maturities = tg.points
    idx = _maturity_indices(tg, xg, maturities)
    dx = xg.dx
    # cumulative trapezoid along x, written in place to limit temporaries
    cum = surface.rates[:, :, 1:] + surface.rates[:, :, :-1]
    cum *= 0.5 * dx
    np.cumsum(cum, axis=2, out=cum)
    n_paths = surface.n_paths
    m = xg.m_steps
    prices = np.full((n_paths, tg.n_steps + 1, idx.size), np.nan)
    for m_i, mat_idx in enumerate(idx):
        # rows with both t_i <= T_m and T_m - t_i <= x_max
        first = max(0, mat_idx - m)
        last = min(mat_idx, tg.n_steps)
        if first > tg.n_steps:
            raise ValueError("maturity beyond the maturity grid")
        rows = np.arange(first, last + 1)
        spans = mat_idx - rows
        vals = np.zeros((n_paths, rows.size))
        nz = spans > 0
        vals[:, nz] = cum[:, rows[nz], spans[nz] - 1]
        prices[:, first : last + 1, m_i] = np.exp(-vals)
    return BondSurface(
        t_grid=tg, maturities=np.asarray(maturities, dtype=float), prices=prices
    )


def money_account(surface: ForwardSurface) -> np.ndarray:
    """Numeraire S0[p, i] = exp(trapz of the short rate up to t_i); S0(0) = 1."""
    short = surface.short_rate()
    dt = surface.t_grid.dt
    steps = 0.5 * (short[:, 1:] + short[:, :-1]) * dt
    out = np.ones_like(short)
    out[:, 1:] = np.exp(np.cumsum(steps, axis=1))
    return out


def discounted_surface(bonds: BondSurface, account: np.ndarray) -> BondSurface:
    """Discounted prices Z = P / S0 with aligned (path, time) axes."""
    if account.shape != bonds.prices.shape[:2]:
        raise ValueError("money account shape does not match the bond surface")
    z = bonds.prices / account[:, :, None]
    return BondSurface(
        t_grid=bonds.t_grid, maturities=bonds.maturities, prices=bonds.prices,
        discounted=z,
    )


def closed_form_bond(
    spec: VolatilitySpec,
    hurst: HurstParam,
    drift: DriftField,
    init: InitialCurve,
    paths: FbmPathSet,
    x_grid: MaturityGrid,
    maturities=None,
) -> BondSurface:
    """Bond prices via the exponential formula, bypassing curve integration.

    Rebuilds only the short-rate column with the transport recursion, then
    prices every (t_i, T_m) pair from P(0, T), the accumulated short rate,
    the maturity-integrated drift, and left-point stochastic sums of the
    maturity-integrated volatilities.  Serves as the second oracle against
    :func:`bond_surface`.
    """
    _check_sim_inputs(spec, drift, init, paths, x_grid)
    tg = paths.grid
    n = tg.n_steps
    dt = tg.dt
    if maturities is None:
        maturities = tg.points
    idx = _maturity_indices(tg, x_grid, maturities)
    mats = np.asarray(maturities, dtype=float)
    dbeta = paths.increments()
    n_paths = paths.n_paths

    # short-rate path r_{t_i}(0) = init(t_i)
    #   + sum_{l<i} drift(t_l, t_i - t_l) dt + sum_j sigma_j(t_l, t_i - t_l) dbeta
    short = np.empty((n_paths, n + 1))
    short[:, 0] = init.values[0]
    for i in range(1, n + 1):
        ls = np.arange(i)
        acc = init.values[i] + drift.values[ls, i - ls].sum() * dt
        noise = np.zeros(n_paths)
        for j in range(1, spec.dims + 1):
            svals = np.asarray(
                eval_vol(spec, j, tg.points[ls], (i - ls) * dt, extrapolate="flat"),
                dtype=float,
            )
            noise += dbeta[:, j - 1, :i] @ svals
        short[:, i] = acc + noise

    log_s0 = np.zeros((n_paths, n + 1))
    log_s0[:, 1:] = np.cumsum(0.5 * (short[:, 1:] + short[:, :-1]) * dt, axis=1)

    # deterministic pieces per maturity
    prices = np.full((n_paths, n + 1, idx.size), np.nan)
    p0 = np.empty(idx.size)
    for m_i, mat_idx in enumerate(idx):
        span_vals = init.values[: mat_idx + 1]
        p0[m_i] = np.exp(-np.trapezoid(span_vals, dx=dt))
    for m_i, mat_idx in enumerate(idx):
        maturity = mats[m_i]
        last = min(mat_idx, n)
        # drift maturity integral IA(t_l, T) on the l-th row
        ia = np.array(
            [drift.maturity_integral(l, maturity - tg.points[l]) for l in range(last + 1)]
        )
        iv = np.zeros((spec.dims, last + 1))
        for j in range(1, spec.dims + 1):
            iv[j - 1] = np.asarray(
                integrated_vol(spec, j, tg.points[: last + 1], maturity), dtype=float
            )
        ia_cum = np.zeros(last + 1)
        if last >= 1:
            ia_cum[1:] = np.cumsum(0.5 * (ia[1:] + ia[:-1]) * dt)
        stoch = np.zeros((n_paths, last + 1))
        for j in range(spec.dims):
            if last >= 1:
                stoch[:, 1:] += np.cumsum(dbeta[:, j, :last] * iv[j, :last][None, :], axis=1)
        prices[:, : last + 1, m_i] = p0[m_i] * np.exp(
            log_s0[:, : last + 1] - ia_cum[None, :] - stoch
        )
    return BondSurface(t_grid=tg, maturities=mats, prices=prices)


def write_forward_csv(surface: ForwardSurface, fileobj) -> None:
    """Rows (path_id, t, x, r), 17 significant digits."""
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(["path_id", "t", "x", "r"])
    tp = surface.t_grid.points
    xp = surface.x_grid.points
    for p in range(surface.n_paths):
        for i, t in enumerate(tp):
            for k, x in enumerate(xp):
                writer.writerow(
                    [p, f"{t:.17g}", f"{x:.17g}", f"{surface.rates[p, i, k]:.17g}"]
                )


def write_bond_csv(bonds: BondSurface, fileobj) -> None:
    """Rows (path_id, t, T, P, Z); Z empty when no discounting was applied."""
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(["path_id", "t", "T", "P", "Z"])
    tp = bonds.t_grid.points
    for p in range(bonds.n_paths):
        for i, t in enumerate(tp):
            for m_i, mat in enumerate(bonds.maturities):
                price = bonds.prices[p, i, m_i]
                if np.isnan(price):
                    continue
                z = "" if bonds.discounted is None else f"{bonds.discounted[p, i, m_i]:.17g}"
                writer.writerow([p, f"{t:.17g}", f"{mat:.17g}", f"{price:.17g}", z])
