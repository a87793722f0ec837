import io

import numpy as np
import pytest

from fhjm.fbm import (
    BrownianDriver,
    TimeGrid,
    fbm_covariance,
    fbm_covariance_matrix,
    generate_cholesky,
    generate_polygonal,
    generate_volterra,
    write_paths_csv,
    _cholesky_with_jitter,
    _increment_gram,
    _kernel_matrix,
)
from fhjm.kernels import HurstParam, calibrate_kernel_scale, cov_cell_integral

H75 = HurstParam(0.75)


def test_covariance_examples():
    assert fbm_covariance(1.0, 1.0, HurstParam(0.6)) == 1.0
    assert fbm_covariance(0.5, 1.0, HurstParam(0.8)) == pytest.approx(0.5, abs=1e-15)
    # direct evaluation, cross-checked against the cell integral below
    assert fbm_covariance(0.25, 0.75, H75) == pytest.approx(0.2104828311225276, rel=1e-12)


def test_covariance_equals_cell_integral():
    for s, t in [(0.25, 0.75), (0.4, 1.3), (1.0, 1.0)]:
        assert fbm_covariance(s, t, H75) == pytest.approx(
            cov_cell_integral(0.0, s, 0.0, t, H75), rel=1e-12
        )


def test_cholesky_level_gram_exact():
    grid = TimeGrid(1.0, 128)
    gram_inc = _increment_gram(grid, H75)
    lower = _cholesky_with_jitter(gram_inc)
    cum = np.tril(np.ones((128, 128)))
    level_gram = cum @ (lower @ lower.T) @ cum.T
    target = fbm_covariance_matrix(grid.points[1:], H75)
    assert np.abs(level_gram - target).max() < 1e-10


def test_cholesky_statistics():
    grid = TimeGrid(1.0, 64)
    paths = generate_cholesky(grid, 2, 10_000, H75, seed=7)
    assert paths.samples.shape == (10_000, 2, 65)
    assert np.all(paths.samples[:, :, 0] == 0.0)
    var = paths.samples[:, 0, -1].var()
    se = 1.0 * np.sqrt(2 / 10_000)
    assert abs(var - 1.0) < 3 * se
    # independent components
    cross = np.mean(paths.samples[:, 0, -1] * paths.samples[:, 1, 32])
    se_cross = np.sqrt(fbm_covariance(0.5, 0.5, H75) * 1.0 / 10_000)
    assert abs(cross) < 3 * se_cross


def test_cholesky_determinism_and_substreams():
    grid = TimeGrid(1.0, 32)
    one = generate_cholesky(grid, 1, 1, H75, seed=9)
    again = generate_cholesky(grid, 1, 1, H75, seed=9)
    many = generate_cholesky(grid, 1, 8, H75, seed=9)
    assert np.array_equal(one.samples, again.samples)
    assert np.array_equal(one.samples[0], many.samples[0])
    # path_offset reproduces the tail of a larger draw
    tail = generate_cholesky(grid, 1, 5, H75, seed=9, path_offset=3)
    assert np.array_equal(many.samples[3:], tail.samples)


def test_cholesky_step_budget():
    with pytest.raises(ValueError):
        generate_cholesky(TimeGrid(1.0, 8192), 1, 1, H75, seed=0)


def test_stationary_increments():
    grid = TimeGrid(1.0, 64)
    paths = generate_cholesky(grid, 1, 6000, H75, seed=3)
    delta = 16  # 0.25 units
    target = 0.25**1.5
    se = target * np.sqrt(2 / 6000)
    for start in (0, 16, 32, 48):
        inc = paths.samples[:, 0, start + delta] - paths.samples[:, 0, start]
        assert abs(inc.var() - target) < 3 * se


def test_self_similarity():
    grid = TimeGrid(1.0, 64)
    paths = generate_cholesky(grid, 1, 6000, H75, seed=13)
    base = paths.samples[:, 0, 16].var()  # t = 0.25
    for c, idx in ((2, 32), (4, 64)):
        scaled = paths.samples[:, 0, idx].var() / c**1.5
        joint_se = 0.25**1.5 * np.sqrt(2 / 6000) * np.sqrt(2)
        assert abs(scaled - base) < 3 * joint_se


def test_volterra_same_driver_same_paths():
    grid = TimeGrid(1.0, 64)
    driver = BrownianDriver.generate(grid, 1, 5, seed=11)
    a = generate_volterra(driver, H75)
    b = generate_volterra(driver, H75)
    assert np.array_equal(a.samples, b.samples)


def test_volterra_zero_driver():
    grid = TimeGrid(1.0, 32)
    driver = BrownianDriver.generate(grid, 1, 2, seed=1)
    zero = BrownianDriver(grid=grid, increments=np.zeros_like(driver.increments), seed=1)
    paths = generate_volterra(zero, H75)
    assert np.all(paths.samples == 0.0)


def test_volterra_discrete_variance_matches_self_similar_law():
    # resolution-matched calibration pins the horizon variance exactly
    for n in (128, 256, 512):
        grid = TimeGrid(2.0, n)
        scale = calibrate_kernel_scale(H75, n)
        kmat = _kernel_matrix(grid, H75, scale)
        dvar = float(np.sum(kmat[-1] ** 2) * grid.dt)
        assert dvar == pytest.approx(2.0**1.5, rel=1e-12)


def test_volterra_empirical_covariance():
    grid = TimeGrid(1.0, 64)
    driver = BrownianDriver.generate(grid, 1, 10_000, seed=5)
    paths = generate_volterra(driver, H75)
    pts = grid.points
    for i, j in [(16, 48), (32, 64), (64, 64)]:
        emp = np.mean(paths.samples[:, 0, i] * paths.samples[:, 0, j])
        tgt = fbm_covariance(pts[i], pts[j], H75)
        var_prod = fbm_covariance(pts[i], pts[i], H75) * fbm_covariance(
            pts[j], pts[j], H75
        ) + tgt**2
        se = np.sqrt(var_prod / 10_000)
        assert abs(emp - tgt) < 3 * se


def test_cross_method_agreement():
    grid = TimeGrid(1.0, 64)
    chol = generate_cholesky(grid, 1, 10_000, H75, seed=17)
    driver = BrownianDriver.generate(grid, 1, 10_000, seed=18)
    volt = generate_volterra(driver, H75)
    for i, j in [(32, 64), (16, 32)]:
        a = np.mean(chol.samples[:, 0, i] * chol.samples[:, 0, j])
        b = np.mean(volt.samples[:, 0, i] * volt.samples[:, 0, j])
        pts = grid.points
        tgt = fbm_covariance(pts[i], pts[j], H75)
        var_prod = (
            fbm_covariance(pts[i], pts[i], H75) * fbm_covariance(pts[j], pts[j], H75)
            + tgt**2
        )
        joint_se = np.sqrt(2 * var_prod / 10_000)
        assert abs(a - b) < 3 * joint_se


def test_polygonal_factor_one_matches_volterra():
    grid = TimeGrid(1.0, 64)
    driver = BrownianDriver.generate(grid, 1, 50, seed=23)
    ref = generate_volterra(driver, H75)
    poly = generate_polygonal(driver, H75, coarse_factor=1)
    assert np.abs(poly.samples - ref.samples).max() < 1e-3


def test_polygonal_zero_driver_and_divisibility():
    grid = TimeGrid(1.0, 32)
    zero = BrownianDriver(grid=grid, increments=np.zeros((2, 1, 32)), seed=0)
    paths = generate_polygonal(zero, H75, coarse_factor=4)
    assert np.all(paths.samples == 0.0)
    with pytest.raises(ValueError):
        generate_polygonal(zero, H75, coarse_factor=5)


def test_polygonal_error_decreases_with_mesh():
    grid = TimeGrid(1.0, 256)
    driver = BrownianDriver.generate(grid, 1, 200, seed=29)
    ref = generate_volterra(driver, H75)
    errs = []
    for cf in (8, 4, 2):
        poly = generate_polygonal(driver, H75, coarse_factor=cf)
        errs.append(np.abs(poly.samples - ref.samples).max(axis=2).mean())
    assert errs[0] > errs[1] > errs[2]


def test_paths_csv_format():
    grid = TimeGrid(1.0, 2)
    paths = generate_cholesky(grid, 1, 1, H75, seed=1)
    buf = io.StringIO()
    write_paths_csv(paths, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0] == "path_id,component,t,value"
    assert len(lines) == 1 + 3  # header + (n+1) rows for one path, one component
    assert lines[1].startswith("0,1,0,")
