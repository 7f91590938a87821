"""Super kernels, mollifiers, smoothing, and smoothing-rate fits.

A super kernel has unit mass while its moments of order 1..8 vanish, so
convolving against a scaled copy reproduces polynomials of degree <= 8
and smoothing error decays at the order of the target's own smoothness.
The price is that the kernel is signed.  The nonnegative mollifier is
the usual compactly supported bump: positivity-preserving, but it
distorts every moment from order 2 up.  rate_kk2/rate_kk3 measure the
two competing log-log slopes (distance decay vs norm blow-up) that the
interpolation machinery trades against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distances import dk_binned
from .grid import GridDensity, GridFunction, convolve
from .orlicz import YoungFunction, sobolev_orlicz_norm

__all__ = [
    "SuperKernel",
    "ResolutionError",
    "DegenerateFitError",
    "build_superkernel",
    "build_mollifier",
    "smooth",
    "smooth_with_derivs",
    "rate_kk2",
    "rate_kk3",
]


class ResolutionError(ValueError):
    """Sampling grid too coarse to certify the kernel's defining moments."""


class DegenerateFitError(ValueError):
    """Rate fit is meaningless (too few points or values at the LP floor)."""


_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class SuperKernel:
    """Signed Gaussian mixture with vanishing moments of order 1..8.

    samples: exported tabulation of the kernel
    weights/scales: mixture parameters, sum_i w_i N(0, scales_i^2)
    spectral_radii: (r1, r2) with the Fourier transform 1 within r1 to
        flat_band_dev and decaying beyond r2
    tail_bound: max |phi| outside [-tail_radius, tail_radius]
    reach: half-width beyond which |phi| < 1e-18 (safe truncation)
    """

    samples: GridFunction
    weights: np.ndarray
    scales: np.ndarray
    spectral_radii: tuple
    flat_band_dev: float
    tail_radius: float
    tail_bound: float
    reach: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for w, s in zip(self.weights, self.scales):
            out += w * np.exp(-0.5 * (x / s) ** 2) / (s * _SQRT2PI)
        return out


def build_superkernel(base_scale: float = 0.5, n_components: int = 5,
                      box_half: float = 40.0, n_samples: int = 8001) -> SuperKernel:
    """Mixture sum_i w_i N(0, u_i) with u_i = base_scale^2 2^i.

    Mass 1 and vanishing even moments 2..2(n_components-1) pin the
    weights through a Vandermonde system in the variances u_i; odd
    moments vanish by symmetry.  With 5 components that kills orders
    1..9, which is what the degree-8 reproduction property needs.
    Moment certificates are re-derived by quadrature on the sample grid
    and must land within 1e-6, else the grid is declared too coarse.
    """
    u = (base_scale ** 2) * 2.0 ** np.arange(n_components)
    vand = np.vander(u, increasing=True).T
    rhs = np.zeros(n_components)
    rhs[0] = 1.0
    w = np.linalg.solve(vand, rhs)
    scales = np.sqrt(u)

    x = np.linspace(-box_half, box_half, n_samples)
    vals = np.zeros_like(x)
    for wi, si in zip(w, scales):
        vals += wi * np.exp(-0.5 * (x / si) ** 2) / (si * _SQRT2PI)
    gf = GridFunction(((-box_half, box_half),), vals)

    h = x[1] - x[0]
    tw = np.full(n_samples, h)
    tw[0] *= 0.5
    tw[-1] *= 0.5
    mass = float(np.sum(tw * vals))
    if abs(mass - 1.0) > 1e-8:
        raise ResolutionError(f"kernel mass {mass!r} off unity; refine sampling")
    for order in range(1, 9):
        m = float(np.sum(tw * x ** order * vals))
        if abs(m) > 1e-6:
            raise ResolutionError(f"moment {order} = {m!r} not certified <= 1e-6")

    # spectral certificate: transform is sum_i w_i exp(-u_i xi^2 / 2)
    xi = np.linspace(0.0, 1.0, 201)
    ft = np.zeros_like(xi)
    for wi, ui in zip(w, u):
        ft += wi * np.exp(-0.5 * ui * xi ** 2)
    flat_dev = float(np.max(np.abs(ft - 1.0)))

    tail_radius = box_half / 2.0
    tail = np.abs(np.where(np.abs(x) >= tail_radius, vals, 0.0))
    tail_bound = float(np.max(tail))

    env_x = np.linspace(0.0, 3.0 * box_half, 4000)
    env = np.zeros_like(env_x)
    for wi, si in zip(w, scales):
        env += abs(wi) * np.exp(-0.5 * (env_x / si) ** 2) / (si * _SQRT2PI)
    below = np.nonzero(env < 1e-18)[0]
    reach = float(env_x[below[0]]) if below.size else float(env_x[-1])

    return SuperKernel(gf, w, scales, (1.0, 2.0), flat_dev,
                       tail_radius, tail_bound, reach)


def build_mollifier(n: int = 4001) -> GridFunction:
    """Normalized exp(-1/(1-x^2)) bump on [-1, 1], unit mass.

    The exact evaluator is registered as the order-0 derivative callback
    so rescaling in smooth() never pays interpolation error.
    """
    def raw(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        inside = np.abs(x) < 1.0
        with np.errstate(divide="ignore", over="ignore"):
            out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
        return out

    x = np.linspace(-1.0, 1.0, n)
    vals = raw(x)
    h = x[1] - x[0]
    mass = float(np.sum(vals) * h - 0.5 * h * (vals[0] + vals[-1]))
    c = 1.0 / mass
    return GridFunction(((-1.0, 1.0),), c * vals,
                        analytic_derivs={(0,): lambda t: c * raw(t)})


def _kernel_eval(kernel, y: np.ndarray) -> np.ndarray:
    if isinstance(kernel, SuperKernel):
        return kernel(y)
    if isinstance(kernel, GridFunction):
        if (0,) in kernel.analytic_derivs:
            return np.asarray(kernel.analytic_derivs[(0,)](y), dtype=float)
        return np.interp(y, kernel.axis(0), kernel.values, left=0.0, right=0.0)
    raise TypeError(f"unsupported kernel type {type(kernel).__name__}")


def _kernel_reach(kernel) -> float:
    if isinstance(kernel, SuperKernel):
        return kernel.reach
    lo, hi = kernel.box[0]
    return max(abs(lo), abs(hi))


def smooth(f: GridFunction, kernel, delta: float) -> GridFunction:
    """f convolved with the delta-rescaled kernel, on f's grid.

    The kernel is resampled at f's spacing on a symmetric lattice slice
    (so convolve() sees aligned grids) and renormalized to unit discrete
    mass; a sampled mass further than 0.2 from 1 means the spacing
    cannot resolve the rescaled kernel at all.
    """
    if f.dim != 1:
        raise ValueError("smoothing implemented for dim 1")
    if not (0.0 < delta <= 1.0):
        raise ValueError(f"delta {delta!r} outside (0, 1]")
    h = f.spacing[0]
    half = max(7, int(math.ceil(_kernel_reach(kernel) * delta / h)))
    y = np.arange(-half, half + 1) * h
    vals = _kernel_eval(kernel, y / delta) / delta
    mass = float(np.sum(vals) * h - 0.5 * h * (vals[0] + vals[-1]))
    if abs(mass - 1.0) > 0.2:
        raise ResolutionError(
            f"sampled kernel mass {mass:.4f}; spacing {h:.3g} too coarse "
            f"for delta {delta:.3g}")
    kgf = GridFunction(((-half * h, half * h),), vals / mass)
    return convolve(f, kgf)


def _hermite_prob(j: int, x: np.ndarray) -> np.ndarray:
    """Probabilists' Hermite polynomial He_j (monic recurrence)."""
    hm, h = np.zeros_like(x), np.ones_like(x)
    for i in range(j):
        hm, h = h, x * h - i * hm
    return h


def _mixture_deriv(kernel: SuperKernel, j: int, x: np.ndarray) -> np.ndarray:
    # d^j/dx^j N(x; 0, s^2) = (-1)^j s^-j He_j(x/s) N(x; 0, s^2)
    out = np.zeros_like(x)
    sign = -1.0 if j % 2 else 1.0
    for w, s in zip(kernel.weights, kernel.scales):
        u = x / s
        out += (w * sign * s ** (-j) * _hermite_prob(j, u)
                * np.exp(-0.5 * u * u) / (s * _SQRT2PI))
    return out


def smooth_with_derivs(f: GridFunction, kernel: SuperKernel, delta: float,
                       max_order: int) -> GridFunction:
    """Like smooth(), plus analytic derivatives of every order <= max_order.

    d^j(f * phi_delta) = f * d^j(phi_delta) with the mixture derivative in
    closed form, so downstream norms are not capped by the finite-difference
    stencil order.  Derivative values are precomputed on f's grid and
    registered as interpolating callbacks.
    """
    if not isinstance(kernel, SuperKernel):
        raise TypeError("analytic smoothing derivatives need a SuperKernel")
    g0 = smooth(f, kernel, delta)
    h = f.spacing[0]
    half = max(7, int(math.ceil(kernel.reach * delta / h)))
    y = np.arange(-half, half + 1) * h
    base = _kernel_eval(kernel, y / delta) / delta
    mass = float(np.sum(base) * h - 0.5 * h * (base[0] + base[-1]))
    box = ((-half * h, half * h),)
    axis = f.axis(0)
    derivs = {}
    for j in range(1, max_order + 1):
        kj = _mixture_deriv(kernel, j, y / delta) / (mass * delta ** (j + 1))
        gj = convolve(f, GridFunction(box, kj))
        derivs[(j,)] = _interp_callback(axis, gj.values)
    return GridFunction(f.box, g0.values, analytic_derivs=derivs)


def _interp_callback(axis: np.ndarray, values: np.ndarray):
    return lambda t: np.interp(t, axis, values, left=0.0, right=0.0)


def _check_deltas(deltas) -> np.ndarray:
    d = np.asarray(list(deltas), dtype=float)
    if d.size < 3:
        raise DegenerateFitError("rate fit needs >= 3 deltas")
    if np.any(d <= 0) or np.any(d > 1):
        raise ValueError("deltas must lie in (0, 1]")
    return d


def rate_kk2(f: GridFunction, q: int, k: int, l: int, e: YoungFunction,
             deltas, kernel: SuperKernel | None = None,
             n_nodes: int = 361, floor: float = 1e-8) -> float:
    """Fitted slope of log d_k(mu_f, mu_{f_delta}) against log delta.

    Contract: slope >= 0.85 (q+k) whenever f has q orders of weighted
    smoothness (the norm is evaluated up front as a finiteness check).
    Distances at the LP tolerance floor poison the fit and raise.
    """
    d = _check_deltas(deltas)
    if kernel is None:
        kernel = build_superkernel()
    ref = sobolev_orlicz_norm(f, q, l, e)
    if not math.isfinite(ref):
        raise ValueError("reference norm not finite")
    mu = GridDensity(f)
    dks = []
    for delta in d:
        dks.append(dk_binned(mu, GridDensity(smooth(f, kernel, float(delta))),
                             k, n_nodes=n_nodes))
    dks = np.asarray(dks)
    if np.any(dks <= 3.0 * floor):
        bad = d[dks <= 3.0 * floor]
        raise DegenerateFitError(f"distances at LP floor for deltas {bad}")
    return float(np.polyfit(np.log(d), np.log(dks), 1)[0])


def rate_kk3(f: GridFunction, q: int, n: int, l: int, e: YoungFunction,
             deltas, kernel: SuperKernel | None = None) -> float:
    """Fitted slope of log ||f_delta||_{n,l,e} against log(1/delta).

    Contract: slope <= 1.15 (n-q) on test functions with q orders of
    smoothness; smooth f gives slope near 0 (no blow-up).
    """
    d = _check_deltas(deltas)
    if kernel is None:
        kernel = build_superkernel()
    norms = []
    for delta in d:
        norms.append(sobolev_orlicz_norm(smooth(f, kernel, float(delta)), n, l, e))
    norms = np.asarray(norms)
    if np.any(norms <= 0):
        raise DegenerateFitError("vanishing norms in rate fit")
    return float(np.polyfit(np.log(1.0 / d), np.log(norms), 1)[0])
