"""Interpolation functionals, regularity criteria, and rate verifiers.

The central object is a truncated two-part series over a smoothing
family (f_n) approximating a target measure mu: distance terms
2^{n(q+k)} beta_e(2^{nd}) d_k(mu, mu_n) against norm terms
2^{-2nm} ||f_n||_{2m+q,2m,e}.  A finite value certifies q orders of
Orlicz-Sobolev regularity for mu's density; the checkers here measure
the empirical constants, the balance products, the convergence slopes,
the K-functional analogue, and a Besov smoothness index, all at desk
scale with the LP distances and Luxembourg norms from the sibling
modules.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .distances import dk_binned
from .grid import GridDensity, GridFunction, derivative
from .orlicz import YoungFunction, beta, luxembourg_norm, sobolev_orlicz_norm, young_p
from .superkernel import (DegenerateFitError, build_mollifier, build_superkernel,
                          smooth, smooth_with_derivs)

__all__ = [
    "InterpParams",
    "ApproxFamily",
    "PiTerm",
    "PiReport",
    "CriterionVerdict",
    "ConvReport",
    "HypothesisError",
    "TailNotConvergedWarning",
    "BesovRangeWarning",
    "RhoEstimate",
    "build_smoothing_family",
    "pi_report",
    "pi_functional",
    "key_inequality_ratio",
    "rho_estimate",
    "criterion_check",
    "s_eta",
    "conv_rate_check",
    "k_functional",
    "k_profile",
    "k_discrete_vs_integral",
    "besov_estimate",
]


class TailNotConvergedWarning(UserWarning):
    """Truncated series still carries > 5% weight in its last term."""


class BesovRangeWarning(UserWarning):
    """Fitted smoothness slope outside the trustworthy (-0.5, 1.5) range."""


class HypothesisError(ValueError):
    """A convergence-theorem hypothesis fails at listed family indices."""


@dataclass(frozen=True)
class InterpParams:
    """Indices of the regularity machinery: certify q derivatives in L^e,
    testing against d_k distances and order-2m smoothing."""

    q: int
    k: int
    m: int
    e: YoungFunction
    N: int = 8
    d: int = 1

    def __post_init__(self):
        if self.q < 0:
            raise ValueError("q >= 0")
        if not 0 <= self.k <= 3:
            raise ValueError("k in {0,..,3} (LP range)")
        if self.m < 1:
            raise ValueError("m >= 1")
        if not 0 <= self.N <= 12:
            raise ValueError("N in {0,..,12}")
        if self.d != 1:
            raise ValueError("d = 1 only")

    @property
    def dp_star(self) -> float:
        """d / (conjugate exponent); 0 for the logarithmic family (p* = inf)."""
        if self.e.p is None:
            return 0.0
        if self.e.p <= 1.0:
            raise ValueError("p > 1 required")
        return self.d * (self.e.p - 1.0) / self.e.p


@dataclass(frozen=True)
class ApproxFamily:
    """Smoothing family: scales delta_n, densities f_n, and the target mu."""

    deltas: tuple
    members: tuple
    target: object

    def __post_init__(self):
        if len(self.deltas) != len(self.members):
            raise ValueError("deltas/members length mismatch")
        if not self.members:
            raise ValueError("empty family")


def build_smoothing_family(f: GridFunction, params: InterpParams, theta: float,
                           kernel=None, n_terms: int | None = None) -> ApproxFamily:
    """Super-kernel smoothings f_n = f * phi_{delta_n}, delta_n = 2^{-theta n}.

    Members carry analytic derivative callbacks up to order 2m+q so the
    norm side of the series is never stencil-capped.
    """
    if kernel is None:
        kernel = build_superkernel()
    n_max = params.N if n_terms is None else n_terms
    deltas = tuple(2.0 ** (-theta * n) for n in range(n_max + 1))
    members = tuple(smooth_with_derivs(f, kernel, d, 2 * params.m + params.q)
                    for d in deltas)
    return ApproxFamily(deltas, members, GridDensity(f))


@dataclass(frozen=True)
class PiTerm:
    n: int
    delta: float
    dk: float
    beta_weight: float
    dist_term: float
    norm: float
    norm_term: float


@dataclass(frozen=True)
class PiReport:
    total: float
    dist_sum: float
    norm_sum: float
    tail_ok: bool
    floor_truncated: bool
    terms: tuple = field(repr=False)

    def __float__(self):
        return self.total


_LP_FLOOR = 1e-9


def pi_report(mu, family: ApproxFamily, params: InterpParams,
              n_nodes: int = 241) -> PiReport:
    """Both partial sums of the series, term table, and truncation flags.

    Terms run to min(N, family size - 1).  If the LP noise floor makes
    the distance terms stop decreasing, later distance terms are frozen
    out of the sum (floor_truncated flag) rather than allowed to grow
    geometrically; the 5% tail-dominance flag reports whether the
    truncation looks converged at all.
    """
    q, k, m, e = params.q, params.k, params.m, params.e
    n_top = min(params.N, len(family.members) - 1)
    terms = []
    for n in range(n_top + 1):
        f_n = family.members[n]
        dk = dk_binned(mu, GridDensity(f_n), k, n_nodes=n_nodes)
        bw = beta(e, 2.0 ** (n * params.d))
        norm = sobolev_orlicz_norm(f_n, 2 * m + q, 2 * m, e)
        terms.append(PiTerm(
            n=n, delta=float(family.deltas[n]), dk=dk, beta_weight=bw,
            dist_term=2.0 ** (n * (q + k)) * bw * dk,
            norm=norm, norm_term=2.0 ** (-2.0 * n * m) * norm))

    report = _reduce_terms(terms)
    if not report.tail_ok:
        warnings.warn("series truncation not converged (last term > 5%)",
                      TailNotConvergedWarning)
    return report


def _reduce_terms(terms) -> PiReport:
    """Fold a term table into the two partial sums and truncation flags.

    If the LP noise floor makes the distance terms stop decreasing, later
    distance terms are frozen out of the sum (floor_truncated flag) rather
    than allowed to grow geometrically; the 5% tail-dominance flag reports
    whether the truncation looks converged at all.
    """
    cut = len(terms)
    for i, t in enumerate(terms):
        if t.dk <= _LP_FLOOR:
            cut = i
            break
    floor_truncated = cut < len(terms)
    dist_sum = float(sum(t.dist_term for t in terms[:cut]))
    norm_sum = float(sum(t.norm_term for t in terms))
    total = dist_sum + norm_sum
    last_share = (terms[-1].dist_term * (cut == len(terms)) + terms[-1].norm_term)
    tail_ok = bool(total > 0 and last_share <= 0.05 * total)
    return PiReport(total=total, dist_sum=dist_sum, norm_sum=norm_sum,
                    tail_ok=tail_ok, floor_truncated=floor_truncated,
                    terms=tuple(terms))


def pi_functional(mu, family: ApproxFamily, params: InterpParams,
                  n_nodes: int = 241) -> float:
    return pi_report(mu, family, params, n_nodes=n_nodes).total


def key_inequality_ratio(f: GridFunction, family: ApproxFamily,
                         params: InterpParams, n_nodes: int = 241) -> float:
    """||f||_{q,e} / pi.  The fitted constant of the key inequality is the
    max of this ratio over a test family; each ratio must be finite."""
    if not np.any(f.values):
        raise ValueError("zero density rejected")
    num = sobolev_orlicz_norm(f, params.q, 0, params.e)
    rep = pi_report(GridDensity(f), family, params, n_nodes=n_nodes)
    if rep.total <= 0.0:
        raise ValueError("zero series value (degenerate family)")
    return num / rep.total


@dataclass(frozen=True)
class RhoEstimate:
    value: float
    theta: float
    n_terms: int
    tail_ok: bool
    report: PiReport = field(repr=False)

    def __float__(self):
        return self.value


def rho_estimate(f: GridFunction, params: InterpParams,
                 thetas=(1.0, 1.3, 1.6), max_terms: int = 4,
                 kernel=None, n_nodes: int = 241,
                 families: dict | None = None) -> RhoEstimate:
    """Minimize the series over a grid of candidate smoothing families.

    The regularity functional is an infimum over approximating sequences,
    so any candidate family upper-bounds it and the minimum over several
    candidates is the sharper certificate.  Candidates here are
    super-kernel families delta_n = 2^{-theta n} cut at every prefix of
    length >= 3; depth is capped so the smallest delta stays above four
    grid spacings, where derivative-carrying kernels are still resolved.
    Converged truncations (tail under 5%) are preferred; if no candidate
    converges the best non-converged value is returned with tail_ok False.

    families, if given, caches prebuilt smoothing families keyed by theta
    (members must carry derivatives up to order 2m+q).
    """
    if kernel is None:
        kernel = build_superkernel()
    mu = GridDensity(f)
    spacing = float(min(f.spacing))
    candidates = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailNotConvergedWarning)
        for theta in thetas:
            depth = int(math.floor(math.log2(1.0 / (4.0 * spacing)) / theta))
            depth = min(max_terms, depth)
            if depth < 2:
                continue
            if families is not None and theta in families:
                fam = families[theta]
            else:
                fam = build_smoothing_family(f, params, theta, kernel=kernel,
                                             n_terms=depth)
                if families is not None:
                    families[theta] = fam
            depth = min(depth, len(fam.members) - 1)
            full = pi_report(mu, fam, params, n_nodes=n_nodes)
            for nt in range(2, depth + 1):
                sub = _reduce_terms(full.terms[:nt + 1])
                candidates.append((theta, nt, sub))
    if not candidates:
        raise ValueError("no resolvable smoothing family on this grid")
    pool = [c for c in candidates if c[2].tail_ok] or candidates
    theta, nt, rep = min(pool, key=lambda c: c[2].total)
    return RhoEstimate(value=rep.total, theta=theta, n_terms=nt,
                       tail_ok=rep.tail_ok, report=rep)


@dataclass(frozen=True)
class CriterionVerdict:
    passed: bool
    bounded: bool
    branch: str | None
    sup_product: float
    products: tuple

    def __bool__(self):
        return self.passed


def _as_pairs(samples):
    arr = np.asarray([(float(d), float(v)) for d, v in samples], dtype=float)
    if arr.size == 0:
        raise ValueError("empty sample list")
    order = np.argsort(-arr[:, 0], kind="stable")
    return arr[order, 0], arr[order, 1]


def criterion_check(lambda_samples, dk_samples, params: InterpParams,
                    eta: float, kappa: float) -> CriterionVerdict:
    """Balance criterion: is lambda^eta * d_k * ln(1/delta)^kappa bounded,
    under the parameter gate eta > (q+k+alpha d)/2m or kappa > 1+gamma+eta?

    lambda_samples / dk_samples are (delta, value) pairs on a common delta
    grid; lambda must be non-increasing in delta.  Boundedness is scored
    as: max product over the three smallest deltas within 2x of the
    median product.
    """
    dl, lam = _as_pairs(lambda_samples)
    dd, dk = _as_pairs(dk_samples)
    if dl.size != dd.size or np.max(np.abs(dl - dd)) > 1e-12 * np.max(dl):
        raise ValueError("lambda/dk sampled on different delta grids")
    if np.any(dl >= 1.0) or np.any(dl <= 0.0):
        raise ValueError("deltas must lie in (0, 1)")
    # descending delta order: lambda non-increasing in delta <=> non-decreasing here
    if np.any(np.diff(lam) < -1e-9 * max(1.0, float(np.max(np.abs(lam))))):
        raise ValueError("lambda samples not non-increasing in delta")
    prod = lam ** eta * dk * np.log(1.0 / dl) ** kappa
    med = float(np.median(prod))
    tail = float(np.max(prod[-3:])) if prod.size >= 3 else float(np.max(prod))
    bounded = bool(tail <= 2.0 * med) if med > 0 else bool(tail == 0.0)
    i2 = eta > (params.q + params.k + params.e.growth_alpha * params.d) / (2.0 * params.m)
    i3 = kappa > 1.0 + params.e.growth_gamma + eta
    branch = "i2" if i2 else ("i3" if i3 else None)
    return CriterionVerdict(passed=bounded and branch is not None,
                            bounded=bounded, branch=branch,
                            sup_product=float(np.max(prod)), products=tuple(prod))


def s_eta(q: int, k: int, m: int, p: float, eta: float) -> float:
    """Regularity order min((2m eta - (q+k+d/p*))/(2m eta), eta/(1+eta)), d=1."""
    if p <= 1.0:
        raise ValueError("p > 1")
    dp_star = (p - 1.0) / p
    first = (2.0 * m * eta - (q + k + dp_star)) / (2.0 * m * eta)
    if first <= 0.0:
        warnings.warn("eta below the smoothing threshold: nonpositive order",
                      UserWarning)
    return min(first, eta / (1.0 + eta))


@dataclass(frozen=True)
class ConvReport:
    theta_pred: float
    theta_meas: float
    passed: bool
    envelope_ok: bool | None
    doubling_ratio: float

    def __iter__(self):
        return iter((self.theta_pred, self.theta_meas))


def conv_rate_check(f: GridFunction, f_ns, eta_fn, alpha: float,
                    params: InterpParams, n_nodes: int = 241) -> ConvReport:
    """Fitted decay of ||f - f_n||_{q,e} against eta(n) vs the predicted
    exponent theta = 1/alpha ^ (1 - (q+k+d/p*)/(alpha m)).

    Hypotheses checked first on every n: the norm bound
    ||f_n||_{q+2m,2m,e} <= eta^{1/alpha}(n) and the distance bound
    d_k(mu, mu_n) <= 1/eta(n); violations raise with the failing list.
    For the logarithmic family the d/p* term drops out and the decay is
    additionally checked against the log2(eta) * eta^{-theta} envelope.
    """
    f_ns = list(f_ns)
    if not f_ns:
        raise ValueError("empty family")
    etas = np.asarray([float(eta_fn(n)) if callable(eta_fn) else float(eta_fn[n])
                       for n in range(len(f_ns))])
    if np.any(etas <= 0) or np.any(np.diff(etas) < 0):
        raise ValueError("eta must be positive and non-decreasing")
    ratios = etas[1:] / etas[:-1] if etas.size > 1 else np.array([1.0])
    a = float(np.max(ratios))

    q, k, m, e = params.q, params.k, params.m, params.e
    mu = GridDensity(f)
    bad = []
    errs = []
    slack = 1.0 + 1e-9
    for n, fn in enumerate(f_ns):
        norm = sobolev_orlicz_norm(fn, q + 2 * m, 2 * m, e)
        dk = dk_binned(mu, GridDensity(fn), k, n_nodes=n_nodes)
        if norm > etas[n] ** (1.0 / alpha) * slack or dk > (1.0 / etas[n]) * slack:
            bad.append(n)
        diff = f.with_values(f.values - fn.values)
        errs.append(sobolev_orlicz_norm(diff, q, 0, e))
    if bad:
        raise HypothesisError(f"norm/distance hypotheses fail at n = {bad}")

    errs = np.asarray(errs)
    if params.e.p is not None:
        theta_pred = min(1.0 / alpha,
                         1.0 - (q + k + params.dp_star) / (alpha * m))
        envelope_ok = None
    else:
        theta_pred = 1.0 - (q + k) / (alpha * m)
        env = np.log2(np.maximum(etas, 2.0)) * etas ** (-theta_pred)
        r = errs / env
        # respected = the ratio to the envelope does not grow along n
        tail = r[-3:] if r.size >= 3 else r
        envelope_ok = bool(np.max(tail) <= 2.0 * np.median(r))

    live = errs > 0
    if not np.any(live):
        return ConvReport(theta_pred, math.inf, True, envelope_ok, a)
    if np.count_nonzero(live) < 3:
        raise DegenerateFitError("fewer than 3 nonzero errors to fit")
    slope = float(np.polyfit(np.log(etas[live]), np.log(errs[live]), 1)[0])
    theta_meas = -slope
    return ConvReport(theta_pred, theta_meas,
                      bool(theta_meas >= 0.9 * theta_pred), envelope_ok, a)


def k_profile(y, family: ApproxFamily, params: InterpParams,
              n_nodes: int = 241):
    """Per-member (d_k, X-norm) pairs reused across K-functional calls."""
    if params.e.p is None:
        raise ValueError("K-functional here uses the power family")
    dks = []
    xnorms = []
    for fn in family.members:
        dks.append(dk_binned(y, GridDensity(fn), params.k, n_nodes=n_nodes))
        xnorms.append(sobolev_orlicz_norm(fn, params.q + 2 * params.m,
                                          2 * params.m, params.e))
    return np.asarray(dks), np.asarray(xnorms)


def k_functional(y, t: float, family: ApproxFamily, params: InterpParams,
                 profile=None) -> float:
    """min over the family of d_k(y, f_n) + t ||f_n||_{q+2m,2m,p}; an upper
    bound on the true infimum that can only shrink as the family grows."""
    if t < 0:
        raise ValueError("t >= 0")
    if profile is None:
        profile = k_profile(y, family, params)
    dks, xnorms = profile
    return float(np.min(dks + t * xnorms))


def k_discrete_vs_integral(y, family: ApproxFamily, params: InterpParams,
                           n_terms: int = 6, quad_points: int = 200):
    """Geometric sum 2^{2m n gamma} K(y, 2^{-2mn}) dt/t-weighted vs the
    integral of t^{-gamma} K(y, t) dt/t over the matching window, with
    gamma = (q+k+d/p*)/2m.  The two should agree within a modest factor."""
    m = params.m
    gamma = (params.q + params.k + params.dp_star) / (2.0 * m)
    prof = k_profile(y, family, params)
    step = 2.0 * m * math.log(2.0)
    lhs = 0.0
    for n in range(n_terms + 1):
        t_n = 2.0 ** (-2.0 * m * n)
        lhs += t_n ** (-gamma) * k_functional(y, t_n, family, params, prof) * step
    t_lo = 2.0 ** (-2.0 * m * (n_terms + 0.5))
    t_hi = 2.0 ** (2.0 * m * 0.5)
    ts = np.exp(np.linspace(math.log(t_lo), math.log(t_hi), quad_points))
    ks = np.array([k_functional(y, t, family, params, prof) for t in ts])
    rhs = float(np.trapezoid(ts ** (-gamma) * ks / ts, ts))
    return lhs, rhs


def besov_estimate(f: GridFunction, p: float, deltas,
                   mollifier: GridFunction | None = None) -> float:
    """Smoothness index in (0,1) from two mollifier slopes.

    s_i reads 1 - growth of ||d(f*phi_delta)||_p in 1/delta; s_ii reads
    the decay of ||d(f*phi^i_delta)||_p in delta, phi^i(x) = x phi(x)
    (zero-mass kernel).  Returns min(s_i, s_ii) clamped into (0,1); raw
    slopes outside (-0.5, 1.5) trigger a range warning.
    """
    d = np.asarray(list(deltas), dtype=float)
    if d.size < 3:
        raise DegenerateFitError("besov fit needs >= 3 deltas")
    if mollifier is None:
        mollifier = build_mollifier()
    e_p = young_p(p)
    h = f.spacing[0]
    n1 = []
    n2 = []
    for delta in d:
        g = smooth(f, mollifier, float(delta))
        n1.append(luxembourg_norm(derivative(g, (1,)), e_p))
        half = max(7, int(math.ceil(delta / h)))
        y = np.arange(-half, half + 1) * h
        kv = y * _moll_eval(mollifier, y / delta) / delta
        gi = _convolve_kernel(f, kv, half, h)
        n2.append(luxembourg_norm(derivative(gi, (1,)), e_p))
    s_i = 1.0 - float(np.polyfit(np.log(1.0 / d), np.log(n1), 1)[0])
    s_ii = float(np.polyfit(np.log(d), np.log(n2), 1)[0])
    for s in (s_i, s_ii):
        if not -0.5 < s < 1.5:
            warnings.warn(f"slope {s:.3f} outside the Besov range",
                          BesovRangeWarning)
    return float(np.clip(min(s_i, s_ii), 1e-3, 1.0 - 1e-3))


def _moll_eval(mollifier: GridFunction, y: np.ndarray) -> np.ndarray:
    if (0,) in mollifier.analytic_derivs:
        return np.asarray(mollifier.analytic_derivs[(0,)](y), dtype=float)
    return np.interp(y, mollifier.axis(0), mollifier.values, left=0.0, right=0.0)


def _convolve_kernel(f: GridFunction, kernel_values: np.ndarray, half: int,
                     h: float) -> GridFunction:
    from .grid import convolve

    return convolve(f, GridFunction(((-half * h, half * h),), kernel_values))
