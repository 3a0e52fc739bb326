"""Shared independent oracles for the test suite.

These deliberately avoid the production code paths they cross-check:
window integrals are summed piece by piece per window, and the window-end
search scans a dense grid augmented with the kink candidates.
"""

import numpy as np
import pytest


def window_integral_direct(u, rho, lo, hi):
    """Integral of rho(|u|) over [lo, hi] by direct piece-overlap sums."""
    total = 0.0
    for start, end, val in u.pieces():
        a, b = max(start, lo), min(end, hi)
        if b > a:
            total += float(rho.eval(float(np.linalg.norm(val)))) * (b - a)
    return total


def brute_force_avg_power(u, rho, T, step=1e-3):
    """Dense-grid brute force for the moving-average power norm.

    Window ends scan a regular grid of the given step augmented with the
    breakpoints and breakpoint+T kinks (the windowed integral is piecewise
    affine, so the supremum sits at a kink); each window integral is summed
    directly from the signal pieces.
    """
    bps = list(u.breakpoints) + [u.horizon]
    t_max = u.horizon + T
    candidates = set(np.arange(0.0, t_max + step, step).tolist())
    for b in bps:
        candidates.add(float(b))
        candidates.add(float(b) + T)
    best = 0.0
    for t in sorted(candidates):
        best = max(best, window_integral_direct(u, rho, max(t - T, 0.0), t))
    return best / T


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
