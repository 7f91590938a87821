"""Hermite functions, Gauss-Hermite quadrature, and dyadic band kernels.

The band kernel at level n mixes Hermite projectors for degrees j in
(4^{n-1}, 4^{n+1}) through a smooth window a(j/4^n); the windows telescope
to a partition of unity over degrees j >= 1, which is what makes the
reconstruction identity work (the degree-0 projector has to be added by
hand because a(0) = 0).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import BoundaryMassWarning, GridFunction, trapezoid_weights

__all__ = [
    "BumpA",
    "BandKernel",
    "DegreeRangeError",
    "BandTooLargeError",
    "hermite_fn",
    "hermite_matrix",
    "hermite_deriv_matrix",
    "gauss_hermite",
    "band_degrees",
    "band_weights",
    "band_kernel_eval",
    "band_kernel_diag_shift",
    "band_project",
    "band_project_deriv",
    "reconstruct",
    "eigen_check",
    "band_operator_report",
]

_MAX_DEGREE_PUBLIC = 1024
_MAX_BAND = 6
_RENORM = 2.0**500
_LN2 = math.log(2.0)


class DegreeRangeError(ValueError):
    pass


class BandTooLargeError(ValueError):
    pass


# -- smooth dyadic window -----------------------------------------------------


def _smooth_step(u: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1, flat at both ends."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        lo = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
        hi = np.where(u < 1.0, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
    return lo / (lo + hi)


@dataclass(frozen=True)
class BumpA:
    """Window a supported on [1/4, 4] with a(t) + a(4t) = 1 on [1/4, 1].

    The ratio t/4 is exact in binary floating point, so the telescoping
    partition holds to machine precision by construction.
    """

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        rising = (t > 0.25) & (t < 1.0)
        out[rising] = _smooth_step((t[rising] - 0.25) / 0.75)
        falling = (t >= 1.0) & (t < 4.0)
        tf = t[falling] / 4.0
        inner = np.zeros_like(tf)
        rise2 = (tf > 0.25) & (tf < 1.0)
        inner[rise2] = _smooth_step((tf[rise2] - 0.25) / 0.75)
        out[falling] = 1.0 - inner
        if out.ndim == 0:
            return float(out)
        return out

    def norm_l(self, l: int, n_grid: int = 40001) -> float:
        """sum_{i<=l} sup |a^(i)| by finite differences on a fine grid."""
        t = np.linspace(0.0, 4.5, n_grid)
        h = t[1] - t[0]
        v = self(t)
        total = float(np.max(np.abs(v)))
        for _ in range(l):
            v = np.gradient(v, h)
            total += float(np.max(np.abs(v)))
        return total


# -- Hermite functions ---------------------------------------------------------


def hermite_matrix(nmax: int, t) -> np.ndarray:
    """h_j(t) for j = 0..nmax, shape (nmax+1, len(t)).

    Three-term recurrence with per-point exponent tracking: under the
    classical turning point h_j underflows double precision, so the
    recurrence runs on mantissas with a shared power-of-two offset that is
    renormalized whenever the mantissa grows past 2^500.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty((nmax + 1, t.size))
    ln_h0 = -0.5 * t * t - 0.25 * math.log(math.pi)
    E = np.floor(ln_h0 / _LN2).astype(np.int64)
    m = np.exp(ln_h0 - E * _LN2)
    out[0] = np.ldexp(m, E)
    m_prev = np.zeros_like(m)
    for j in range(nmax):
        m_next = t * math.sqrt(2.0 / (j + 1)) * m - math.sqrt(j / (j + 1)) * m_prev
        m_prev = m
        m = m_next
        big = np.abs(m) > _RENORM
        if np.any(big):
            m[big] /= _RENORM
            m_prev[big] /= _RENORM
            E[big] += 500
        out[j + 1] = np.ldexp(m, E)
    return out


def hermite_fn(n: int, t):
    if not 0 <= n <= _MAX_DEGREE_PUBLIC:
        raise DegreeRangeError(f"degree {n} outside [0, {_MAX_DEGREE_PUBLIC}]")
    scalar = np.isscalar(t)
    vals = hermite_matrix(n, t)[n]
    return float(vals[0]) if scalar else vals


def hermite_deriv_matrix(H: np.ndarray) -> np.ndarray:
    """h_j' from h_{j-1}, h_{j+1}: rows 0..nmax-1 given H rows 0..nmax."""
    nmax = H.shape[0] - 1
    D = np.empty((nmax, H.shape[1]))
    for j in range(nmax):
        D[j] = -math.sqrt((j + 1) / 2.0) * H[j + 1]
        if j > 0:
            D[j] += math.sqrt(j / 2.0) * H[j - 1]
    return D


@lru_cache(maxsize=8)
def gauss_hermite(order: int):
    """Nodes/weights integrating products of h_a, h_b (a, b < order) exactly.

    Nodes are roots of h_order found by sign-change bracketing plus
    safeguarded Newton on the recurrence values; weights are the inverse
    Christoffel sums 1 / sum_{k<order} h_k(x_i)^2, so sum_i w_i F(x_i)
    approximates the Lebesgue integral of F.
    """
    if not 1 <= order <= 400:
        raise DegreeRangeError("quadrature order in [1, 400]")
    xmax = math.sqrt(2.0 * order + 1) + 2.0
    grid = np.linspace(0.0, xmax, max(40 * order, 400))
    v = hermite_matrix(order, grid)[order]
    sign_flip = np.nonzero(v[:-1] * v[1:] < 0.0)[0]
    lo = grid[sign_flip].copy()
    hi = grid[sign_flip + 1].copy()
    if lo.size != order // 2:
        raise RuntimeError("root bracketing lost sign changes")
    flo = v[sign_flip].copy()
    x = 0.5 * (lo + hi)
    for _ in range(80):
        H = hermite_matrix(order + 1, x)
        f = H[order]
        fp = math.sqrt(order / 2.0) * H[order - 1] - math.sqrt((order + 1) / 2.0) * H[order + 1]
        # shrink brackets by the sign of f, then Newton with bisection fallback
        went_lo = f * flo > 0
        lo = np.where(went_lo, x, lo)
        flo = np.where(went_lo, f, flo)
        hi = np.where(went_lo, hi, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - f / fp
        bad = ~np.isfinite(xn) | (xn <= lo) | (xn >= hi)
        xn[bad] = 0.5 * (lo[bad] + hi[bad])
        if np.max(np.abs(xn - x)) < 1e-16 * xmax:
            x = xn
            break
        x = xn
    mid = np.array([0.0]) if order % 2 else np.empty(0)
    nodes = np.concatenate([-x[::-1], mid, x])
    Hn = hermite_matrix(order - 1, nodes)
    weights = 1.0 / np.sum(Hn * Hn, axis=0)
    return nodes, weights


# -- band kernels ---------------------------------------------------------------


@dataclass(frozen=True)
class BandKernel:
    n: int
    bump: BumpA = BumpA()
    quad_order: int = 200

    def __post_init__(self):
        if not 0 <= self.n <= _MAX_BAND:
            raise BandTooLargeError(f"band {self.n} > {_MAX_BAND}")

    @property
    def max_degree(self) -> int:
        return 4 ** (self.n + 1) - 1


def band_degrees(n: int) -> np.ndarray:
    lo = 4 ** (n - 1) if n >= 1 else 0
    return np.arange(lo + 1, 4 ** (n + 1))


def band_weights(bk: BandKernel) -> np.ndarray:
    j = band_degrees(bk.n)
    return bk.bump(j / 4.0**bk.n)


def band_kernel_eval(bk: BandKernel, x, y) -> np.ndarray:
    """H-bar_n^a(x, y) = sum_j a(j/4^n) h_j(x) h_j(y), elementwise in (x, y)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    j = band_degrees(bk.n)
    a = band_weights(bk)
    Hx = hermite_matrix(bk.max_degree, x)[j]
    Hy = Hx if y is x or (y.shape == x.shape and np.array_equal(y, x)) else hermite_matrix(bk.max_degree, y)[j]
    out = np.einsum("j,jx,jx->x", a, Hx, Hy)
    return float(out[0]) if out.size == 1 else out


def band_kernel_diag_shift(bk: BandKernel, x: np.ndarray, shift: float, x_order: int = 0) -> np.ndarray:
    """partial_x^order H-bar_n^a(x, x + shift) along the shifted diagonal."""
    x = np.asarray(x, dtype=float)
    j = band_degrees(bk.n)
    a = band_weights(bk)
    top = bk.max_degree + x_order
    Hx = hermite_matrix(top, x)
    for _ in range(x_order):
        Hx = hermite_deriv_matrix(Hx)
    Hy = hermite_matrix(bk.max_degree, x + shift)
    return np.einsum("j,jx,jx->x", a, Hx[j], Hy[j])


def _band_matrix_on_grid(bk: BandKernel, f: GridFunction, x_order: int = 0) -> np.ndarray:
    if f.dim != 1:
        raise ValueError("band kernels are 1-d")
    x = f.axis(0)
    j = band_degrees(bk.n)
    a = band_weights(bk)
    top = bk.max_degree + x_order
    Hx = hermite_matrix(top, x)
    for _ in range(x_order):
        Hx = hermite_deriv_matrix(Hx)
    Hy = hermite_matrix(bk.max_degree, x)
    return (Hx[j].T * a) @ Hy[j]


def band_project(bk: BandKernel, f: GridFunction) -> GridFunction:
    """x -> int H-bar_n^a(x, y) f(y) dy by quadrature on f's grid."""
    vals = f.values
    m = float(np.max(np.abs(vals)))
    edge = max(abs(vals[0]), abs(vals[-1])) if f.dim == 1 else 0.0
    if m > 0 and edge > 1e-9 * m:
        warnings.warn("projected function carries boundary mass", BoundaryMassWarning)
    M = _band_matrix_on_grid(bk, f)
    return f.with_values(M @ (trapezoid_weights(f) * vals))


def band_project_deriv(bk: BandKernel, f: GridFunction, order: int) -> GridFunction:
    """partial_x^order of the band projection, via the derivative ladder."""
    M = _band_matrix_on_grid(bk, f, x_order=order)
    return f.with_values(M @ (trapezoid_weights(f) * f.values))


def reconstruct(f: GridFunction, N: int, bump: BumpA | None = None) -> GridFunction:
    """J_0 f + sum_{n=0..N} band projections (degree-0 term added explicitly)."""
    if N > 5:
        raise BandTooLargeError("N <= 5")
    bump = bump or BumpA()
    w = trapezoid_weights(f)
    h0 = hermite_matrix(0, f.axis(0))[0]
    coef0 = float(np.sum(w * h0 * f.values))
    total = coef0 * h0
    for n in range(N + 1):
        total = total + band_project(BandKernel(n, bump), f).values
    return f.with_values(total)


def eigen_check(alpha: int, box=(-6.0, 6.0), n_grid: int = 4001) -> float:
    """sup residual of (-h'' + x^2 h) - (2 alpha + 1) h on the box.

    The second derivative is a 4th-order central stencil on a padded grid,
    so the requested box is covered entirely by interior points.
    """
    if alpha > 30:
        raise DegreeRangeError("alpha <= 30")
    lo, hi = box
    h = (hi - lo) / (n_grid - 1)
    x = np.linspace(lo - 2 * h, hi + 2 * h, n_grid + 4)
    v = hermite_matrix(alpha, x)[alpha]
    d2 = (
        -(v[4:] + v[:-4]) / 12.0 + 4.0 * (v[3:-1] + v[1:-3]) / 3.0 - 2.5 * v[2:-2]
    ) / h**2
    xi = x[2:-2]
    resid = (-d2 + xi * xi * v[2:-2]) - (2 * alpha + 1) * v[2:-2]
    return float(np.max(np.abs(resid)))


def band_operator_report(f: GridFunction, alpha: int, m: int, k: int, e, n_list, dk_value=None) -> list:
    """Measured constants for the three band-operator bounds, one row per n.

    Row fields: the three left-hand norms, the scaling factors
    2^{n|alpha|}, beta_e(2^{nd}), 4^{-nm}, 2^{n(|alpha|+k)} beta, and the
    implied constants after dividing the scalings out.
    """
    from .grid import derivative
    from .orlicz import beta, conjugate, luxembourg_norm, sobolev_orlicz_norm

    norm_f_e = luxembourg_norm(f, e)
    norm_f_estar = luxembourg_norm(f, conjugate(e))
    norm_f_sobolev = sobolev_orlicz_norm(f, 2 * m + alpha, 2 * m, e)
    d_af = derivative(f, (alpha,)) if alpha else f
    rows = []
    for n in n_list:
        bk = BandKernel(n)
        proj_d = band_project_deriv(bk, f, alpha)
        proj_of_d = band_project(bk, d_af)
        lhs_e = luxembourg_norm(proj_d, e)
        lhs_sup = float(np.max(np.abs(proj_d.values)))
        lhs_inner = luxembourg_norm(proj_of_d, e)
        b = beta(e, 2.0**n)
        s_alpha = 2.0 ** (n * alpha)
        s_m = 4.0 ** (-n * m)
        rows.append(
            {
                "n": n,
                "lhs_deriv_e": lhs_e,
                "lhs_deriv_sup": lhs_sup,
                "lhs_inner_e": lhs_inner,
                "scale_2nalpha": s_alpha,
                "beta_e_2nd": b,
                "scale_4nm": s_m,
                "c_bounded": lhs_e / (s_alpha * norm_f_e) if norm_f_e else 0.0,
                "c_sup": lhs_sup / (s_alpha * b * norm_f_estar) if norm_f_estar else 0.0,
                "c_smooth": lhs_inner / (s_m * norm_f_sobolev) if norm_f_sobolev else 0.0,
            }
        )
        if dk_value is not None:
            rows[-1]["scale_dk"] = 2.0 ** (n * (alpha + k)) * b * dk_value
    return rows
