"""Empirical distribution distances and slope fitting for the validation experiments.

KS is the primary acceptance metric: the histogram TV estimator carries a
positive bias of order sqrt(bins / n), so TV enters only trend and
sanity checks, never absolute assertions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr


@dataclass(frozen=True)
class DistanceReport:
    metric: str
    value: float
    n_a: int
    n_b: int
    bins: int | None = None
    notes: str = ""


def _as_sample(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"empty sample: {name}")
    return arr


def ks_two_sample(a, b) -> DistanceReport:
    """Sup distance between the empirical CDFs of two samples, by merge scan."""
    xa = np.sort(_as_sample(a, "a"))
    xb = np.sort(_as_sample(b, "b"))
    pooled = np.concatenate([xa, xb])
    cdf_a = np.searchsorted(xa, pooled, side="right") / xa.size
    cdf_b = np.searchsorted(xb, pooled, side="right") / xb.size
    value = float(np.max(np.abs(cdf_a - cdf_b)))
    return DistanceReport("ks_two_sample", value, xa.size, xb.size, notes="empirical vs empirical")


def ks_vs_cdf(a, cdf, name: str = "cdf") -> DistanceReport:
    """One-sample KS statistic sup |F_hat(x) - F(x)| against a callable CDF."""
    x = np.sort(_as_sample(a, "a"))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(0, n) / n
    value = float(max(upper.max(), lower.max(), 0.0))
    return DistanceReport("ks_vs_cdf", value, n, 0, notes=f"empirical vs {name}")


def ks_vs_std_normal(a) -> DistanceReport:
    """One-sample KS statistic against the standard normal CDF."""
    report = ks_vs_cdf(a, ndtr, name="N(0,1)")
    return DistanceReport("ks_vs_std_normal", report.value, report.n_a, 0, notes=report.notes)


def default_bins(n_a: int, n_b: int) -> int:
    """Histogram bin count: 2 n^{1/3} capped at 200, floored at 10."""
    n = min(n_a, n_b)
    return max(10, min(200, math.ceil(2.0 * n ** (1.0 / 3.0))))


def tv_histogram(a, b, bins: int | None = None) -> DistanceReport:
    """Half L1 distance between histogram estimates on shared equal-width bins.

    The bin range is the pooled 0.1%-99.9% quantile span; values beyond it are
    clipped into the edge bins so no mass is dropped.
    """
    xa = _as_sample(a, "a")
    xb = _as_sample(b, "b")
    if bins is None:
        bins = default_bins(xa.size, xb.size)
    if bins < 10:
        raise ValueError(f"bins must be >= 10, got {bins}")
    pooled = np.concatenate([xa, xb])
    lo, hi = np.quantile(pooled, [0.001, 0.999])
    if lo == hi:
        raise ValueError("degenerate range: all pooled values identical")
    edges = np.linspace(lo, hi, bins + 1)
    pa, _ = np.histogram(np.clip(xa, lo, hi), bins=edges)
    pb, _ = np.histogram(np.clip(xb, lo, hi), bins=edges)
    value = 0.5 * float(np.abs(pa / xa.size - pb / xb.size).sum())
    return DistanceReport("tv_histogram", value, xa.size, xb.size, bins=bins, notes="shared quantile-range bins")


def loglog_slope(pairs) -> tuple[float, float, float]:
    """Least-squares fit of log y on log x; returns (slope, intercept, r_squared)."""
    pts = [(float(x), float(y)) for x, y in pairs]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points, got {len(pts)}")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise ValueError("all coordinates must be positive for a log-log fit")
    lx = np.log([x for x, _ in pts])
    ly = np.log([y for _, y in pts])
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2
