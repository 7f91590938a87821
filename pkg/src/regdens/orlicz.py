"""Young functions, Luxembourg norms, and weighted Sobolev-Orlicz norms.

A Young function e is symmetric, convex, e(0)=0, satisfies the doubling
bound e(2s) <= lam*e(s), and s -> e(s)/s is non-decreasing.  The gauge norm
of f is inf{c>0 : int e(f/c) <= 1}; the growth index beta(R) = R/e^{-1}(R)
drives every dyadic-band estimate downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridFunction, derivative, integrate, trapezoid_weights

__all__ = [
    "YoungFunction",
    "young_p",
    "young_log",
    "young_inverse",
    "beta",
    "luxembourg_norm",
    "sobolev_orlicz_norm",
    "norm_1plus",
    "conjugate",
    "conjugate_value",
    "holder_orlicz",
    "NonConvergenceError",
    "EPS_STAR",
    "C_STAR",
]


class NonConvergenceError(RuntimeError):
    """Bracketing/bisection failed to converge within the iteration cap."""


@dataclass(frozen=True)
class YoungFunction:
    """Vectorized Young function with its doubling constant.

    growth_alpha/growth_gamma: indices (alpha, gamma) such that
    beta(R) <~ R^alpha (ln R)^gamma, used by the interpolation criteria.
    p is set for the power family only.
    """

    name: str
    fn: callable
    doubling: float
    growth_alpha: float
    growth_gamma: float
    p: float | None = None

    def __call__(self, s):
        return self.fn(np.abs(s))


def young_p(p: float) -> YoungFunction:
    if p < 1:
        raise ValueError("p >= 1 required")
    return YoungFunction(
        name=f"e_{p:g}",
        fn=lambda s: s**p,
        doubling=2.0**p,
        growth_alpha=1.0 - 1.0 / p if p > 1 else 0.0,
        growth_gamma=0.0,
        p=float(p),
    )


def young_log() -> YoungFunction:
    return YoungFunction(
        name="e_log",
        fn=lambda s: (1.0 + s) * np.log1p(s),
        doubling=2.5,
        growth_alpha=0.0,
        growth_gamma=1.0,
    )


def young_inverse(e: YoungFunction, a: float, rel_tol: float = 1e-10) -> float:
    """Generalized inverse sup{c >= 0 : e(c) <= a} by bisection."""
    if a < 0:
        raise ValueError("a >= 0 required")
    if a == 0.0:
        return 0.0
    hi = 1.0
    for _ in range(2000):
        if float(e(hi)) > a:
            break
        hi *= 2.0
    else:
        raise NonConvergenceError("upper bracket for young_inverse")
    lo = hi / 2.0 if hi > 1.0 else 0.0
    while float(e(lo)) > a:
        lo /= 2.0
        if lo < 1e-300:
            lo = 0.0
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(e(mid)) <= a:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * max(lo, 1e-300):
            break
    return lo


def beta(e: YoungFunction, R: float) -> float:
    """Growth index R / e^{-1}(R) (non-decreasing in R)."""
    if R <= 0:
        raise ValueError("R > 0 required")
    inv = young_inverse(e, R)
    if inv == 0.0:
        raise ValueError("degenerate Young inverse")
    return R / inv


def _gauge_integral(f: GridFunction, e: YoungFunction, c: float) -> float:
    return float(np.sum(trapezoid_weights(f) * e.fn(np.abs(f.values) / c)))


def luxembourg_norm(f: GridFunction, e: YoungFunction, rel_tol: float = 1e-11) -> float:
    """Gauge norm inf{c > 0 : int e(|f|/c) dx <= 1} on f's grid."""
    if float(np.max(np.abs(f.values))) == 0.0:
        return 0.0
    c = max(1e-12, float(np.sum(trapezoid_weights(f) * np.abs(f.values))))
    n_doubles = 0
    while _gauge_integral(f, e, c) > 1.0:
        c *= 2.0
        n_doubles += 1
        if n_doubles > 200:
            raise NonConvergenceError("luxembourg bracket did not close")
    hi = c
    lo = c
    while _gauge_integral(f, e, lo) <= 1.0:
        lo *= 0.5
        if lo < 1e-300:
            return 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _gauge_integral(f, e, mid) <= 1.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_tol * hi:
            break
    return hi


def _multi_indices(dim: int, total: int):
    if dim == 1:
        return [(a,) for a in range(total + 1)]
    return [(a, b) for a in range(total + 1) for b in range(total + 1 - a)]


def _monomial(f: GridFunction, gamma) -> np.ndarray:
    pts = f.meshgrid()
    out = np.ones_like(pts[0])
    for x, g in zip(pts, gamma):
        if g:
            out = out * x**g
    return out


def sobolev_orlicz_norm(f: GridFunction, k: int, l: int, e: YoungFunction) -> float:
    """sum_{|alpha|<=k} sum_{|gamma|<=l} || x^gamma d_alpha f ||_e."""
    total = 0.0
    for alpha in _multi_indices(f.dim, k):
        df = derivative(f, alpha)
        for gamma in _multi_indices(f.dim, l):
            total += luxembourg_norm(df.with_values(_monomial(f, gamma) * df.values), e)
    return total


def norm_1plus(f: GridFunction, k: int, p: float) -> float:
    """Surrogate functional sum_{|alpha|<=k} int (1+|x|)^p |d_a f| (1+ln+|x|+ln+|d_a f|).

    Not a norm (no homogeneity); cheap majorant for the e_log Sobolev norm.
    """
    pts_r = None
    total = 0.0
    for alpha in _multi_indices(f.dim, k):
        df = derivative(f, alpha)
        if pts_r is None:
            pts = f.meshgrid()
            pts_r = np.abs(pts[0]) if f.dim == 1 else np.hypot(pts[0], pts[1])
        a = np.abs(df.values)
        integrand = (1.0 + pts_r) ** p * a * (
            1.0
            + np.log(np.maximum(pts_r, 1.0))
            + np.log(np.maximum(a, 1.0))
        )
        total += float(np.sum(trapezoid_weights(f) * integrand))
    return total


def _conjugate_array(e: YoungFunction, s: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Legendre conjugate e*(s) = sup_t (|s| t - e(t)), golden-section search.

    The maximand is concave in t, so the per-lane bracket [0, hi] found by
    doubling (until the one-sided slope turns negative) contains the
    maximizer and golden-section contracts it; all lanes run in lockstep.
    """
    s = np.abs(np.asarray(s, dtype=float))
    shape = s.shape
    s = s.ravel()
    out = np.zeros_like(s)
    pos = s > 0.0
    sp = s[pos]
    if sp.size:
        hi = np.ones_like(sp)
        # lanes whose running maximand exceeds the overflow guard are frozen
        # at +inf instead of chasing a bracket past float range
        huge = np.zeros(sp.shape, dtype=bool)
        for _ in range(1100):
            slope = sp - (e.fn(hi * (1 + 1e-7)) - e.fn(hi)) / (hi * 1e-7)
            grow = (slope >= 0) & ~huge
            if not np.any(grow):
                break
            hi[grow] *= 2.0
            huge |= grow & ((sp * hi - e.fn(hi) > 1e280) | (hi > 1e280))
        else:
            raise NonConvergenceError("conjugate bracket did not close")
        lo = np.zeros_like(sp)
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        x1 = hi - invphi * (hi - lo)
        x2 = lo + invphi * (hi - lo)
        f1 = sp * x1 - e.fn(x1)
        f2 = sp * x2 - e.fn(x2)
        for _ in range(200):
            left = f1 < f2
            lo = np.where(left, x1, lo)
            hi = np.where(left, hi, x2)
            x1 = hi - invphi * (hi - lo)
            x2 = lo + invphi * (hi - lo)
            f1 = sp * x1 - e.fn(x1)
            f2 = sp * x2 - e.fn(x2)
            if np.all(hi - lo <= tol * np.maximum(1.0, hi)):
                break
        t = 0.5 * (lo + hi)
        vals = np.maximum(0.0, sp * t - e.fn(t))
        vals[huge] = np.inf
        out[pos] = vals
    return out.reshape(shape)


def conjugate_value(e: YoungFunction, s: float) -> float:
    return float(_conjugate_array(e, np.array([s]))[0])


def conjugate(e: YoungFunction) -> YoungFunction:
    """Conjugate exponent pair for the power family, numeric Legendre else."""
    if e.p is not None:
        if e.p <= 1:
            raise ValueError("p=1 has no finite conjugate")
        return young_p(e.p / (e.p - 1.0))
    return YoungFunction(
        name=e.name + "*",
        fn=lambda s: _conjugate_array(e, s),
        doubling=float("nan"),
        growth_alpha=float("nan"),
        growth_gamma=float("nan"),
    )


def holder_orlicz(f: GridFunction, g: GridFunction, e: YoungFunction):
    """(|int f g|, 2 ||f||_e ||g||_{e*}) with e* evaluated numerically."""
    if f.box != g.box or f.n_points != g.n_points:
        raise ValueError("f, g must share a grid")
    lhs = abs(float(np.sum(trapezoid_weights(f) * f.values * g.values)))
    rhs = 2.0 * luxembourg_norm(f, e) * luxembourg_norm(g, conjugate(e))
    return lhs, rhs


def _eps_star() -> float:
    # fixed point of t = 2 ln(1+t), t > 0
    lo, hi = 1.0, 4.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 2.0 * math.log1p(mid) > mid:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


EPS_STAR = _eps_star()
# L1 domination constant: int |f| <= C_STAR * ||f||_{e_log}
C_STAR = 2.0 + 1.0 / math.log1p(EPS_STAR)
