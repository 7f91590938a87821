"""Small statistics helpers shared by the simulation checks.

Only the pieces the experiments actually need: a two-sample KS statistic
with the classical large-sample threshold, the Kolmogorov tail series, a
chi-square tail, and a least-squares line fit with R^2.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaincc

__all__ = [
    "ks_two_sample",
    "ks_threshold",
    "kolmogorov_sf",
    "chi2_sf",
    "linfit",
]


def ks_two_sample(a, b) -> float:
    """sup_x |F_a(x) - F_b(x)| for two 1-d samples."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_threshold(n: int, m: int, level: float = 0.99) -> float:
    """Large-sample two-sample KS rejection threshold.

    c(0.99) = 1.628; other levels via the inverse of the Kolmogorov tail.
    """
    if level == 0.99:
        c = 1.628
    else:
        # solve kolmogorov_sf(c) = 1 - level by bisection
        lo, hi = 0.2, 4.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if kolmogorov_sf(mid) > 1.0 - level:
                lo = mid
            else:
                hi = mid
        c = 0.5 * (lo + hi)
    return c * math.sqrt((n + m) / (n * m))


def kolmogorov_sf(t: float) -> float:
    """P(sup|B(x)| > t) tail: 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 t^2)."""
    if t <= 0:
        return 1.0
    total = 0.0
    for j in range(1, 101):
        term = 2.0 * (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * t * t)
        total += term
        if abs(term) < 1e-16:
            break
    return min(1.0, max(0.0, total))


def chi2_sf(x: float, df: float) -> float:
    """Upper chi-square tail P(X > x) with df degrees of freedom."""
    if x <= 0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))


def linfit(x, y):
    """Least-squares line fit; returns (slope, intercept, r_squared)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size or x.size < 2:
        raise ValueError("need two same-length samples of size >= 2")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), float(r2)
