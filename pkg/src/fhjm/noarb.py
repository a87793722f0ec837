"""Constant-expectation (quasi-martingale) checks and the oscillation probe.

Under the no-arbitrage drift the discounted bond prices satisfy
E Z_t(T) = P(0, T) for every pair t <= T.  Two independent verifications:

* :func:`drift_identity_check` -- the deterministic core: the maturity
  integral of the drift must equal the expectation kernel e(t, T)
  pointwise in t.  Both sides come from independent quadratures.
* :func:`check_quasi_martingale` -- Monte Carlo: panel z-scores of the
  sample mean of Z_t(T) against the time-zero price extracted from the
  simulated surfaces themselves.

The oscillation probe estimates, per deterministic restart time tau, how
often the discounted surface stays within a relative band k of its value
at (tau, tau); a strictly positive frequency at small k is the desk-scale
counterpart of the positive-probability condition under which arbitrarily
small proportional costs remove arbitrage.

Surfaces can be supplied as one discounted :class:`~fhjm.hjm.BondSurface`
or as any iterable of them (batches); statistics accumulate in a fixed
deterministic order, so results are identical run to run and do not
depend on batch sizing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .drift import DriftField, expectation_kernel
from .hjm import BondSurface
from .kernels import HurstParam
from .vol import VolatilitySpec

__all__ = [
    "QuasiMartingaleReport",
    "OscillationReport",
    "drift_identity_check",
    "check_quasi_martingale",
    "oscillation_probe",
    "simulate_discounted_batches",
]


def simulate_discounted_batches(
    spec: VolatilitySpec,
    hurst: HurstParam,
    drift: DriftField,
    init,
    t_grid,
    x_grid,
    n_paths: int,
    seed: int,
    maturities=None,
    batch_size: int = 1000,
    method: str = "cholesky",
):
    """Generator of discounted bond-surface batches through the full pipeline.

    Each batch runs simulate -> bond prices -> money account -> discount.
    Per-path substreams are indexed by the global path number, so the
    yielded paths are identical for any batch size.  Memory stays bounded
    by the batch, which is what makes 1e5-path panels feasible.
    """
    from .fbm import BrownianDriver, generate_cholesky, generate_volterra
    from .hjm import bond_surface, discounted_surface, money_account, simulate_forward

    done = 0
    while done < n_paths:
        take = min(batch_size, n_paths - done)
        if method == "cholesky":
            paths = generate_cholesky(t_grid, spec.dims, take, hurst, seed, path_offset=done)
        elif method == "volterra":
            driver = BrownianDriver.generate(t_grid, spec.dims, take, seed, path_offset=done)
            paths = generate_volterra(driver, hurst)
        else:
            raise ValueError(f"unknown generation method {method!r}")
        surface = simulate_forward(spec, hurst, drift, init, paths, x_grid)
        bonds = bond_surface(surface, maturities=maturities)
        account = money_account(surface)
        yield discounted_surface(bonds, account)
        done += take


@dataclass
class QuasiMartingaleReport:
    """Panel statistics for E Z_t(T) = P(0, T)."""

    pairs: list
    targets: np.ndarray
    means: np.ndarray
    std_errors: np.ndarray
    z_scores: np.ndarray
    n_paths: int
    identity_gap: float | None = None

    def n_exceeding(self, level: float = 3.0) -> int:
        return int(np.sum(np.abs(self.z_scores) > level))

    def to_json(self) -> str:
        rows = [
            {
                "t": t, "T": T,
                "target": tg, "mc_mean": mu, "std_error": se, "z": z,
            }
            for (t, T), tg, mu, se, z in zip(
                self.pairs, self.targets, self.means, self.std_errors, self.z_scores
            )
        ]
        return json.dumps(
            {
                "n_paths": self.n_paths,
                "identity_gap": self.identity_gap,
                "panel": rows,
            },
            indent=2,
        )

    def table(self) -> str:
        lines = [f"{'t':>8} {'T':>8} {'target':>12} {'mc_mean':>12} {'se':>10} {'z':>8}"]
        for (t, T), tg, mu, se, z in zip(
            self.pairs, self.targets, self.means, self.std_errors, self.z_scores
        ):
            lines.append(f"{t:8.4f} {T:8.4f} {tg:12.8f} {mu:12.8f} {se:10.2e} {z:8.2f}")
        return "\n".join(lines)


@dataclass
class OscillationReport:
    """Empirical small-oscillation frequencies per (tau, k)."""

    taus: np.ndarray
    thresholds: np.ndarray
    frequencies: np.ndarray  # shape (len(taus), len(thresholds))
    n_paths: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_paths": self.n_paths,
                "taus": self.taus.tolist(),
                "thresholds": self.thresholds.tolist(),
                "frequencies": self.frequencies.tolist(),
            },
            indent=2,
        )


def drift_identity_check(
    spec: VolatilitySpec,
    hurst: HurstParam,
    drift: DriftField,
    maturity: float,
    theta_cells: int = 512,
) -> float:
    """max over grid t of |maturity integral of the drift - e(t, T)|.

    The left side integrates the drift field over [0, T - t] by trapezoid;
    the right side is the expectation kernel from its own product
    integration.  Agreement is the core no-arbitrage drift restriction.
    """
    gaps = []
    for i, t in enumerate(drift.t_points):
        if t > maturity + 1e-12:
            break
        lhs = drift.maturity_integral(i, maturity - t)
        rhs = expectation_kernel(spec, hurst, float(t), maturity, n_cells=theta_cells)
        gaps.append(abs(lhs - rhs))
    return float(max(gaps))


def _iter_surfaces(discounted) -> list:
    if isinstance(discounted, BondSurface):
        return [discounted]
    return discounted


def _pair_indices(surface: BondSurface, pairs) -> list:
    dt = surface.t_grid.dt
    out = []
    for t, maturity in pairs:
        i = int(round(t / dt))
        if abs(i * dt - t) > 1e-9:
            raise ValueError(f"panel time {t} not on the grid")
        m_candidates = np.nonzero(np.abs(surface.maturities - maturity) < 1e-9)[0]
        if m_candidates.size == 0:
            raise ValueError(f"panel maturity {maturity} not among surface maturities")
        out.append((i, int(m_candidates[0])))
    return out


def check_quasi_martingale(
    discounted,
    spec: VolatilitySpec,
    hurst: HurstParam,
    pairs,
    drift: DriftField | None = None,
) -> QuasiMartingaleReport:
    """Panel z-scores of mean discounted prices against their t = 0 values.

    ``discounted`` is a discounted surface or an iterable of batch
    surfaces (the Monte Carlo set).  The target P(0, T) is read off the
    t = 0 row, which is path independent.  When ``drift`` is given, the
    deterministic decomposition check (drift maturity integral vs
    expectation kernel, integrated in t) is reported as ``identity_gap``.
    """
    count = 0
    acc = None
    acc_sq = None
    targets = None
    pair_idx = None
    first = None
    for surface in _iter_surfaces(discounted):
        if surface.discounted is None:
            raise ValueError("check_quasi_martingale needs discounted surfaces")
        if first is None:
            first = surface
            pair_idx = _pair_indices(surface, pairs)
            targets = np.array([surface.discounted[0, 0, m] for (_, m) in pair_idx])
            acc = np.zeros(len(pair_idx))
            acc_sq = np.zeros(len(pair_idx))
        vals = np.stack(
            [surface.discounted[:, i, m] for (i, m) in pair_idx], axis=1
        )
        if np.any(np.isnan(vals)):
            raise ValueError("panel pairs must satisfy t <= T on the surface")
        count += vals.shape[0]
        # accumulate deviations from the target: avoids the catastrophic
        # cancellation a raw sum-of-squares would suffer at tiny variances
        dev = vals - targets[None, :]
        acc += dev.sum(axis=0)
        acc_sq += (dev**2).sum(axis=0)
    if count == 0:
        raise ValueError("no surfaces supplied")
    if count < 2:
        raise ValueError("need at least two paths for standard errors")
    mean_dev = acc / count
    means = targets + mean_dev
    variances = (acc_sq - count * mean_dev**2) / (count - 1)
    std_errors = np.sqrt(np.maximum(variances, 0.0) / count)
    z = mean_dev / np.where(std_errors > 0, std_errors, np.inf)

    identity_gap = None
    if drift is not None:
        from .drift import log_expectation

        gaps = []
        for t, maturity in pairs:
            i = int(round(t / drift.dt))
            lhs = 0.0
            if i >= 1:
                rows = np.array(
                    [drift.maturity_integral(l, maturity - drift.t_points[l])
                     for l in range(i + 1)]
                )
                lhs = float(np.trapezoid(rows, dx=drift.dt))
            rhs = log_expectation(spec, hurst, float(t), float(maturity), n_cells=256)
            gaps.append(abs(lhs - rhs))
        identity_gap = float(max(gaps))
    return QuasiMartingaleReport(
        pairs=list(pairs), targets=targets, means=means, std_errors=std_errors,
        z_scores=z, n_paths=count, identity_gap=identity_gap,
    )


def oscillation_probe(discounted, thresholds, taus) -> OscillationReport:
    """Frequency of { sup_{tau <= t <= T} |Z_tau(tau)/Z_t(T) - 1| < k } per path.

    ``taus`` must sit on the time grid and the surface maturities must
    include the grid (Z_tau(tau) is read off the diagonal).  Frequencies
    are nonincreasing as k decreases and equal 1 for large k on bounded
    surfaces.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    if np.any(thresholds <= 0):
        raise ValueError("thresholds must be positive")
    taus = np.asarray(taus, dtype=float)
    counts = None
    total = 0
    for surface in _iter_surfaces(discounted):
        if surface.discounted is None:
            raise ValueError("oscillation_probe needs discounted surfaces")
        z = surface.discounted
        if counts is None:
            counts = np.zeros((taus.size, thresholds.size), dtype=np.int64)
        mat_idx = _pair_indices(surface, [(t, t) for t in taus])
        for a, tau in enumerate(taus):
            i_tau, m_tau = mat_idx[a]
            diag = z[:, i_tau, m_tau]
            # region t >= tau, maturity >= t: NaN entries already encode t > T
            region = z[:, i_tau:, :]
            with np.errstate(invalid="ignore"):
                ratio = diag[:, None, None] / region
                dev = np.nanmax(np.abs(ratio - 1.0), axis=(1, 2))
            for b, k in enumerate(thresholds):
                counts[a, b] += int(np.sum(dev < k))
        total += z.shape[0]
    if counts is None or total == 0:
        raise ValueError("no surfaces supplied")
    freq = counts / float(total)
    return OscillationReport(
        taus=taus, thresholds=thresholds, frequencies=freq, n_paths=total
    )
