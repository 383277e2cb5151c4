"""Shared test utilities: random instances and brute-force oracles."""
import os

import numpy as np

from breglr.bregman import ConstraintMatrix

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")


def random_instance(rng, n, m, noise=0.5):
    """Normalized noisy linear problem with an intercept column last."""
    x = rng.uniform(-1, 1, size=(m, n - 1))
    w = rng.normal(size=n - 1)
    y = np.where(x @ w + noise * rng.normal(size=m) >= 0, 1.0, -1.0)
    h = np.hstack([x, np.ones((m, 1))]) / n
    return ConstraintMatrix.from_features(h, y)


def grid_min(wp, wm, lo, hi, step=1e-6):
    """Brute-force minimum of G over [lo, hi], endpoints included."""
    k = max(int(np.ceil((hi - lo) / step)), 1) + 1
    best = np.inf
    # chunked so wide boxes do not allocate huge arrays
    for grid in np.array_split(np.linspace(lo, hi, k), max(k // 2_000_000, 1)):
        g = wp * np.expm1(-grid) + wm * np.expm1(grid)
        best = min(best, float(g.min()))
    return best
