"""Shared family of probability densities used by the norm and rate harnesses.

Ten members spanning the behaviors the inequalities must survive: smooth
unimodal, multimodal, kinked (triangle, two-sided exponential), heavy-tailed
with a flat-top taper, compactly supported with smooth shoulders, kurtotic
scale mixtures, skewed, and a near-singular spike.  Every member is
normalized to unit mass on its box and decays to numerical zero at the box
edge: zero extension beyond the box must stay unbiased, or the weighted
norms of deeply smoothed members pick up spurious edge-jump terms.

Members built from Gaussian mixtures carry exact derivative callbacks; the
kinked ones deliberately do not, so downstream code exercises its finite
difference path on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridFunction, gauss_mixture_on_grid

__all__ = ["NamedDensity", "build_family", "family_member"]


@dataclass(frozen=True)
class NamedDensity:
    name: str
    fn: GridFunction
    rough: bool  # has a kink (finite-difference derivatives only)


def _normalize(gf: GridFunction) -> GridFunction:
    xs = gf.axis(0)
    mass = float(np.trapezoid(gf.values, xs))
    scaled = gf.with_values(gf.values / mass)
    derivs = {k: (lambda cb=cb, m=mass: (lambda pts: cb(pts) / m))()
              for k, cb in gf.analytic_derivs.items()}
    scaled.analytic_derivs.update(derivs)
    return scaled


def _mixture(centers, scales, weights, box, n, max_order=3) -> GridFunction:
    gf = gauss_mixture_on_grid(np.asarray(centers, float), np.asarray(scales, float),
                               weights=np.asarray(weights, float), box=box, n=n,
                               max_order=max_order)
    return _normalize(gf)


def _from_fn(fn, box, n) -> GridFunction:
    return _normalize(GridFunction.from_callable(box, (n,), fn))


def build_family(box=((-10.0, 10.0),), n: int = 4001) -> list[NamedDensity]:
    members = []

    members.append(NamedDensity(
        "gaussian", _mixture([0.0], [1.0], [1.0], box, n), rough=False))

    members.append(NamedDensity(
        "bimodal", _mixture([-1.3, 1.5], [0.8, 1.1], [0.6, 0.4], box, n), rough=False))

    def triangle(x):
        return np.maximum(0.0, 1.0 - np.abs(x) / 2.0) / 2.0
    members.append(NamedDensity("triangle", _from_fn(triangle, box, n), rough=True))

    # box [-1.5, 1.5] convolved with a 0.3-wide Gaussian, realized as a fine
    # equal-weight mixture so the derivative stack stays exact
    sb_centers = np.linspace(-1.5, 1.5, 61)
    members.append(NamedDensity(
        "smoothed-box", _mixture(sb_centers, np.full(61, 0.3), np.full(61, 1.0), box, n),
        rough=False))

    # the taper only bites beyond |x| ~ 5, leaving the kink at 0 and the
    # exponential flanks intact while killing box-edge mass
    def laplace(x):
        return 0.75 * np.exp(-1.5 * np.abs(x) - (x / 5.0) ** 8)
    members.append(NamedDensity("two-sided-exp", _from_fn(laplace, box, n), rough=True))

    # Cauchy core with a flat-top taper: polynomial tails over |x| <= 5,
    # vanishing at the box edge so zero extension stays unbiased
    def tapered_cauchy(x):
        return np.exp(-((x / 5.0) ** 8)) / (math.pi * (1.0 + x * x))
    members.append(NamedDensity("tapered-cauchy", _from_fn(tapered_cauchy, box, n), rough=False))

    def cosine_taper(x):
        return np.where(np.abs(x) <= 3.0, (1.0 + np.cos(math.pi * x / 3.0)) / 6.0, 0.0)
    members.append(NamedDensity("cosine-taper", _from_fn(cosine_taper, box, n), rough=True))

    members.append(NamedDensity(
        "scale-mixture", _mixture([0.0, 0.0], [0.5, 1.5], [0.5, 0.5], box, n), rough=False))

    members.append(NamedDensity(
        "skewed", _mixture([-0.3, 0.4, 1.3], [0.5, 0.9, 1.3], [0.45, 0.35, 0.2], box, n),
        rough=False))

    members.append(NamedDensity(
        "spike-mixture", _mixture([0.0, 0.8], [1.0, 0.12], [0.85, 0.15], box, n),
        rough=False))

    return members


def family_member(name: str, box=((-10.0, 10.0),), n: int = 4001) -> NamedDensity:
    for member in build_family(box, n):
        if member.name == name:
            return member
    raise KeyError("no family member named %r" % (name,))
