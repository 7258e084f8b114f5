"""Shared statistical kernels: Mann-Whitney U, quantiles and kernel density."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EXACT_MAX_PAIRS = 400


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str  # "exact" or "normal-approx"

    __test__ = False  # keep pytest from collecting this class


@dataclass(frozen=True)
class DensityEstimate:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    n: int

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))


def midranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    a = np.asarray(values, dtype=float)
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    ranks = np.empty(len(a), dtype=float)
    # boundaries of runs of equal values in sorted order
    starts = np.flatnonzero(np.r_[True, sorted_a[1:] != sorted_a[:-1]])
    ends = np.r_[starts[1:], len(a)]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = (s + 1 + e) / 2.0
    return ranks


def _tie_sizes(values: np.ndarray) -> np.ndarray:
    _, counts = np.unique(values, return_counts=True)
    return counts


def _exact_rank_sum_counts(doubled_ranks: np.ndarray, k: int) -> np.ndarray:
    """Number of k-subsets of the pooled sample for every doubled rank sum.

    Doubled midranks are integers, so a subset-sum DP gives the exact
    permutation distribution even in the presence of ties.
    """
    ranks = doubled_ranks.astype(np.int64)
    total = int(np.sort(ranks)[::-1][:k].sum())
    dp = np.zeros((k + 1, total + 1), dtype=np.int64)
    dp[0, 0] = 1
    for i, r in enumerate(ranks):
        for j in range(min(i + 1, k), 0, -1):
            dp[j, r:] += dp[j - 1, : total + 1 - r]
    return dp[k]


def mann_whitney_u(
    x: Sequence[float],
    y: Sequence[float],
    two_sided: bool = True,
    exact_max_pairs: int = EXACT_MAX_PAIRS,
) -> TestResult:
    """Mann-Whitney U test of ``x`` against ``y``.

    The statistic is U for ``x`` (pairs with x > y, ties counted half).
    When ``len(x) * len(y) <= exact_max_pairs`` the p-value comes from the
    full permutation distribution of the midrank sum; otherwise a normal
    approximation with tie-corrected variance and continuity correction is
    used. The one-sided variant tests whether ``x`` tends to be larger.
    """
    xa = np.asarray(x, dtype=float).ravel()
    ya = np.asarray(y, dtype=float).ravel()
    n, m = len(xa), len(ya)
    if n == 0 or m == 0:
        raise ValueError("mann_whitney_u needs two non-empty samples")
    if np.isnan(xa).any() or np.isnan(ya).any():
        raise ValueError("samples contain NaN")
    pooled = np.concatenate([xa, ya])
    N = n + m
    ranks = midranks(pooled)
    r1 = float(ranks[:n].sum())
    u = r1 - n * (n + 1) / 2.0
    centre = n * m / 2.0

    if n * m <= exact_max_pairs:
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        # enumerate subsets of the smaller side; U_y = nm - U_x mirrors it
        if n <= m:
            k, obs = n, int(doubled[:n].sum())
        else:
            k, obs = m, int(doubled[n:].sum())
        counts = _exact_rank_sum_counts(doubled, k)
        sums = np.arange(len(counts), dtype=np.int64)
        mean2 = k * (N + 1)  # doubled expected rank sum
        total = counts.sum()
        if two_sided:
            hit = np.abs(sums - mean2) >= abs(obs - mean2)
        elif k == n:
            hit = sums >= obs
        else:
            # small side is y: U_x large <=> rank sum of y small
            hit = sums <= obs
        p = float(counts[hit].sum()) / float(total)
        return TestResult(u, min(1.0, p), "exact")

    ties = _tie_sizes(pooled)
    tie_term = float((ties**3 - ties).sum()) / (N * (N - 1))
    var = n * m / 12.0 * ((N + 1) - tie_term)
    if var <= 0:
        return TestResult(u, 1.0, "normal-approx")
    sd = math.sqrt(var)
    if two_sided:
        z = max(abs(u - centre) - 0.5, 0.0) / sd
        p = math.erfc(z / math.sqrt(2.0))
    else:
        z = (u - centre - 0.5) / sd
        p = 0.5 * math.erfc(z / math.sqrt(2.0))
    return TestResult(u, min(1.0, max(0.0, p)), "normal-approx")


def quantile(sample: Sequence[float], q: float) -> float:
    """Quantile by linear interpolation between order statistics."""
    a = np.asarray(sample, dtype=float)
    if a.size == 0:
        raise ValueError("quantile of an empty sample")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return float(np.quantile(a, q, method="linear"))


def iqr(sample: Sequence[float]) -> float:
    return quantile(sample, 0.75) - quantile(sample, 0.25)


def median(sample: Sequence[float]) -> float:
    return quantile(sample, 0.5)


def scott_bandwidth(sample: Sequence[float]) -> float:
    """Scott's rule with a robust spread estimate.

    Falls back to ``1e-3 * max(|x|, 1)`` when the sample has no spread.
    """
    a = np.asarray(sample, dtype=float)
    if a.size == 0:
        raise ValueError("bandwidth of an empty sample")
    std = float(a.std(ddof=1)) if a.size > 1 else 0.0
    spread = iqr(a) / 1.349
    sigma = min(std, spread) if spread > 0 else std
    scale = max(float(np.abs(a).max()), 1.0)
    if sigma <= 1e-12 * scale:
        return 1e-3 * scale
    return a.size ** (-0.2) * sigma


def kde_evaluate(sample: Sequence[float], grid: Sequence[float], bandwidth: float) -> DensityEstimate:
    """Evaluate ``1/(n h sqrt(pi)) * sum exp(-((x - x_i)/h)^2)`` on ``grid``."""
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    xs = np.asarray(sample, dtype=float)
    g = np.asarray(grid, dtype=float)
    if xs.size == 0:
        return DensityEstimate(g, np.zeros_like(g), float(bandwidth), 0)
    dens = np.zeros_like(g)
    # chunk over the sample to bound memory on long grids
    for start in range(0, xs.size, 2048):
        chunk = xs[start : start + 2048]
        u = (g[:, None] - chunk[None, :]) / bandwidth
        dens += np.exp(-(u**2)).sum(axis=1)
    dens /= xs.size * bandwidth * math.sqrt(math.pi)
    return DensityEstimate(g, dens, float(bandwidth), int(xs.size))


def default_grid(sample: Sequence[float], bandwidth: float, min_points: int = 512, max_points: int = 20000) -> np.ndarray:
    a = np.asarray(sample, dtype=float)
    lo = float(a.min()) - 4.0 * bandwidth
    hi = float(a.max()) + 4.0 * bandwidth
    # keep several grid points per bandwidth so the trapezoid rule stays accurate
    points = int(min(max_points, max(min_points, math.ceil((hi - lo) / (bandwidth / 5.0)) + 1)))
    return np.linspace(lo, hi, points)


def kde(sample: Sequence[float], bandwidth: float | None = None, grid: Sequence[float] | None = None) -> DensityEstimate:
    """Density estimate with automatic bandwidth and grid."""
    a = np.asarray(sample, dtype=float)
    if a.size == 0:
        raise ValueError("kde of an empty sample")
    h = scott_bandwidth(a) if bandwidth is None else float(bandwidth)
    g = default_grid(a, h) if grid is None else np.asarray(grid, dtype=float)
    return kde_evaluate(a, g, h)
