"""Generate long-memory Gaussian paths three ways and compare their laws.

The Cholesky sampler is exact by construction; the Volterra transform
approaches the same law as the grid refines; the polygonal variant smooths
the driver on a coarser mesh first.  Running this script prints variance
and covariance diagnostics for each generator and writes a CSV of sample
paths next to it.
"""

import numpy as np

from fhjm import (
    BrownianDriver,
    HurstParam,
    TimeGrid,
    fbm_covariance,
    generate_cholesky,
    generate_polygonal,
    generate_volterra,
)
from fhjm.fbm import write_paths_csv

hurst = HurstParam(0.75)
grid = TimeGrid(1.0, 256)

print(f"== exact sampler (H = {hurst.h}) ==")
paths = generate_cholesky(grid, dims=1, n_paths=5000, hurst=hurst, seed=1)
var = paths.samples[:, 0, -1].var()
print(f"sample Var at horizon: {var:.4f}  (target {1.0:.4f}, "
      f"3 SE band +-{3*np.sqrt(2/5000):.4f})")

print("\n== kernel-transform sampler ==")
driver = BrownianDriver.generate(grid, dims=1, n_paths=5000, seed=2)
volterra = generate_volterra(driver, hurst)
for i, j in [(64, 192), (128, 256), (256, 256)]:
    emp = np.mean(volterra.samples[:, 0, i] * volterra.samples[:, 0, j])
    tgt = fbm_covariance(grid.points[i], grid.points[j], hurst)
    print(f"cov(t={grid.points[i]:.2f}, t={grid.points[j]:.2f}): "
          f"empirical {emp:.4f} vs analytic {tgt:.4f}")

print("\n== polygonal driver smoothing ==")
ref = generate_volterra(driver, hurst)
for cf in (8, 4, 2, 1):
    poly = generate_polygonal(driver, hurst, coarse_factor=cf)
    err = np.abs(poly.samples - ref.samples).max(axis=2).mean()
    print(f"coarse mesh {cf:>2} cells/step: mean sup distance to reference {err:.5f}")

with open("fbm_paths.csv", "w") as fh:
    write_paths_csv(generate_cholesky(grid, 1, 3, hurst, seed=3), fh)
print("\nwrote fbm_paths.csv (3 sample paths)")
