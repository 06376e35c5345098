"""Hit-or-miss estimation of stable-sausage volumes ``E V_d(S_t + B)`` and
the small-time slope experiment.

Test points are drawn uniformly in the coordinate box
``prod_j [min_j - h_B(-e_j), max_j + h_B(e_j)]``, which contains the
sausage. Points inside ``B`` are hits without a search, because every path
starts at the origin. Membership for Euclidean and L_p balls is a
nearest-neighbour query in the matching norm and a facet test for
polytopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import convex_geom as cg
from .functionals import (DEFAULT_LEVEL, DEFAULT_N0, ExtrapolatedEstimate, c_alpha_closed_form,
                          dual_ball_mixed_volume, _levels)
from .mc_engine import EstimateCI, confidence_interval, extrapolate, run_replications
from .stable_sim import PathSkeleton, StableSpec, sample_path_skeleton

__all__ = [
    "DegenerateFitError",
    "SausageRequest",
    "SausageResult",
    "body_volume",
    "estimate_sausage_volume",
    "fit_small_time_slope",
    "sausage_membership",
    "sausage_volume_hit_or_miss",
    "small_time_asymptotics",
    "spitzer_exact_3d",
    "suggest_n0",
    "theoretical_slope",
]

DEFAULT_POINTS = 20_000
DEFAULT_T_GRID = (0.2, 0.1, 0.05, 0.025)


class DegenerateFitError(ValueError):
    pass


def body_volume(B: cg.ConvexBody) -> float:
    return float(B.volume)


def spitzer_exact_3d(r: float, t: float) -> float:
    """Expected Wiener-sausage volume in R^3, standard Brownian motion."""
    if r < 0 or t < 0:
        raise ValueError("r and t must be nonnegative")
    return 4.0 / 3.0 * math.pi * r**3 + 4.0 * math.sqrt(2.0 * math.pi) * r**2 * math.sqrt(t) + 2.0 * math.pi * r * t


def _kd_norm(B):
    if isinstance(B, cg.EuclideanBall):
        return 2.0, B.radius
    if isinstance(B, cg.LpBall):
        return B.p, B.radius
    return None


def _member_brute(x, pts, B, chunk=2048):
    out = np.zeros(len(x), dtype=bool)
    budget = max(1, 4_000_000 // max(len(pts), 1))
    for a in range(0, len(x), min(chunk, budget)):
        xb = x[a:a + min(chunk, budget)]
        out[a:a + len(xb)] = B.contains(xb[:, None, :] - pts[None, :, :]).any(axis=1)
    return out


def _member(x, pts, B):
    if len(x) == 0:
        return np.zeros(0, dtype=bool)
    kd = _kd_norm(B)
    if kd is None:
        return _member_brute(x, pts, B)
    p, r = kd
    dist, _ = cKDTree(pts).query(x, k=1, p=p, distance_upper_bound=r * (1 + 1e-12))
    return np.isfinite(dist)


def sausage_membership(x, path, B: cg.ConvexBody, method: str = "auto"):
    """Whether ``x`` lies in ``S + B`` for the skeleton points ``S``.

    ``x`` may be one point or a stack; ``method='brute'`` forces the
    pairwise scan.
    """
    pts = path.points if isinstance(path, PathSkeleton) else np.atleast_2d(np.asarray(path, float))
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    if xs.shape[1] != pts.shape[1] or pts.shape[1] != B.d:
        raise ValueError("dimension mismatch between points, path and body")
    if method == "brute":
        res = _member_brute(xs, pts, B)
    elif method == "auto":
        res = _member(xs, pts, B)
    else:
        raise ValueError(f"unknown method {method!r}")
    return bool(res[0]) if single else res


def _box(pts, B):
    eye = np.eye(B.d)
    lo = pts.min(axis=0) - B.support(-eye)
    hi = pts.max(axis=0) + B.support(eye)
    return lo, hi


def _nested_volumes(pts, steps, B, unit_points):
    """Volumes of ``pts[::s] + B`` for decreasing steps on shared test points."""
    lo, hi = _box(pts, B)
    box_vol = float(np.prod(hi - lo))
    q = lo + unit_points * (hi - lo)
    hit = B.contains(q)
    out = []
    for s in steps:
        miss = ~hit
        hit[miss] = _member(q[miss], pts[::s], B)
        out.append(box_vol * hit.mean())
    return out


def sausage_volume_hit_or_miss(points, B: cg.ConvexBody, M: int, stream) -> float:
    """One hit-or-miss estimate of ``V_d(points + B)`` for a fixed point set."""
    rng = stream if isinstance(stream, np.random.Generator) else np.random.default_rng(stream)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return _nested_volumes(pts, [1], B, rng.random((M, pts.shape[1])))[0]


def _sausage_task(stream, spec, B, t_grid, n, steps, M):
    rng = stream.rng()
    unit_path = sample_path_skeleton(spec, 1.0, n, rng).points
    u = rng.random((M, spec.d))
    out = []
    for t in t_grid:
        out.extend(_nested_volumes(t ** (1.0 / spec.alpha) * unit_path, steps, B, u))
    return out


def _check_body(spec, B):
    if B.d != spec.d:
        raise ValueError(f"body dimension {B.d} does not match process dimension {spec.d}")
    if isinstance(B, cg.Polytope) and not B.has_facets:
        raise ValueError("polytope bodies need facet data for membership tests")


def estimate_sausage_volume(spec: StableSpec, B: cg.ConvexBody, t: float, n0: int = DEFAULT_N0,
                            M: int = DEFAULT_POINTS, reps: int = 2000, seed: int = 0,
                            workers: int = 1, level: float = DEFAULT_LEVEL,
                            levels: int = 3) -> ExtrapolatedEstimate:
    """Estimate ``E V_d(S_t + B)`` with grid extrapolation over ``n0 * 2**k``."""
    if not t > 0:
        raise ValueError("horizon must be positive")
    if M < 1:
        raise ValueError("need at least one test point per path")
    _check_body(spec, B)
    ns, steps = _levels(n0, levels)
    task = partial(_sausage_task, spec=spec, B=B, t_grid=(float(t),), n=ns[-1], steps=steps, M=M)
    acc = run_replications(task, reps, seed, workers)
    fit, ci, raw = extrapolate(acc, ns, level)
    return ExtrapolatedEstimate(tuple(zip(ns, raw)), fit, ci)


def suggest_n0(spec: StableSpec, t_max: float, B: cg.ConvexBody, fraction: float = 0.02) -> int:
    """Smallest power of two keeping ``(t/n)**(1/alpha)`` below ``fraction`` of the inradius."""
    target = fraction * B.inradius / spec.scale
    n = 1
    while (t_max / n) ** (1.0 / spec.alpha) > target:
        n *= 2
    return n


def theoretical_slope(spec: StableSpec, B: cg.ConvexBody, c_alpha=None, m: int = 4096) -> float:
    """``d c_alpha V(B, ..., B, B_{alpha'})``."""
    if c_alpha is None:
        c = c_alpha_closed_form(spec.alpha, spec.convention)
    else:
        c = c_alpha.mean if isinstance(c_alpha, EstimateCI) else float(c_alpha)
    return float(spec.d * c * dual_ball_mixed_volume([B] * (spec.d - 1), spec.alpha, m))


@dataclass(frozen=True)
class SausageRequest:
    spec: StableSpec
    B: cg.ConvexBody
    t_grid: Sequence[float] = DEFAULT_T_GRID
    n: int = DEFAULT_N0
    reps: int = 2000
    M: int = DEFAULT_POINTS
    levels: int = 3
    seed: int = 0
    workers: int = 1
    level: float = DEFAULT_LEVEL
    fit_count: int | None = None
    fit_terms: int = 2
    c_alpha: object = None

    def __post_init__(self):
        ts = tuple(float(t) for t in self.t_grid)
        if any(t <= 0 for t in ts):
            raise ValueError("all grid times must be positive")
        if any(b >= a for a, b in zip(ts, ts[1:])):
            raise ValueError("t grid must be strictly decreasing")
        if len(ts) < 3:
            raise ValueError("need at least 3 grid times")
        object.__setattr__(self, "t_grid", ts)
        _check_body(self.spec, self.B)


@dataclass(frozen=True)
class SausageResult:
    t_grid: tuple
    estimates: tuple
    body_volume: float
    slope: EstimateCI
    t_coefficient: float
    theoretical_slope: float
    rescaled: tuple
    fit_times: tuple = field(default=())

    @property
    def fitted_slope(self) -> float:
        return self.slope.mean


def fit_small_time_slope(ts, cis: Sequence[EstimateCI], vol_B: float, alpha: float, terms: int = 2):
    """Weighted fit of ``E_t - V(B) = s t**(1/alpha) + c t``.

    The linear term in ``t`` absorbs jumps of size comparable to ``B``
    (and is the exact second term for Brownian motion in R^3).
    Returns ``(coefficients, L)`` where ``L`` maps the estimate means to
    the coefficients, so intervals can be propagated. ``terms=1`` is a
    pure ``t**(1/alpha)`` fit through the origin.
    """
    ts = np.asarray(ts, dtype=float)
    y = np.array([ci.mean for ci in cis]) - vol_B
    se = np.array([ci.std_error for ci in cis])
    if not np.all(se == 0) and np.all(y <= 3.0 * se):
        raise DegenerateFitError("every sausage excess is below the noise level")
    w = np.ones_like(ts) if np.any(se == 0) else 1.0 / se**2
    powers = [1.0 / alpha, 1.0][:terms]
    X = np.column_stack([ts**p for p in powers])
    XtW = X.T * w
    L = np.linalg.solve(XtW @ X, XtW)
    return L @ y, L


def small_time_asymptotics(req: SausageRequest) -> SausageResult:
    """Estimate ``E V_d(S_t + B)`` along the t grid and fit the small-t slope.

    One unit-horizon skeleton per replication is rescaled to every ``t``
    (self-similarity), and the test points are shared, so all grid times
    and resolutions are estimated jointly.
    """
    spec, B = req.spec, req.B
    ns, steps = _levels(req.n, req.levels)
    task = partial(_sausage_task, spec=spec, B=B, t_grid=req.t_grid, n=ns[-1], steps=steps, M=req.M)
    acc = run_replications(task, req.reps, req.seed, req.workers)
    k = len(ns)
    estimates, weights = [], []
    for i in range(len(req.t_grid)):
        comps = list(range(i * k, (i + 1) * k))
        fit, ci, raw = extrapolate(acc, ns, req.level, comps)
        estimates.append(ExtrapolatedEstimate(tuple(zip(ns, raw)), fit, ci))
        w = np.zeros(acc.dim)
        order = np.argsort(ns)
        for coef, j in zip(fit.coefficients, np.asarray(comps)[order]):
            w[j] += coef
        weights.append(w)

    vol_B = body_volume(B)
    count = req.fit_count or len(req.t_grid)
    sel = list(range(len(req.t_grid)))[-count:]
    coef, L = fit_small_time_slope([req.t_grid[i] for i in sel],
                                   [estimates[i].extrapolated for i in sel], vol_B, spec.alpha,
                                   req.fit_terms)
    g = sum(L[0, a] * weights[i] for a, i in enumerate(sel))
    raw_slope = confidence_interval(acc, req.level, g)
    slope = EstimateCI(raw_slope.count, float(coef[0]), raw_slope.variance, raw_slope.half_width,
                       req.level)
    rescaled = tuple((e.mean - vol_B) / t ** (1.0 / spec.alpha) for t, e in zip(req.t_grid, estimates))
    return SausageResult(
        t_grid=req.t_grid,
        estimates=tuple(estimates),
        body_volume=vol_B,
        slope=slope,
        t_coefficient=float(coef[1]) if len(coef) > 1 else 0.0,
        theoretical_slope=theoretical_slope(spec, B, req.c_alpha),
        rescaled=rescaled,
        fit_times=tuple(req.t_grid[i] for i in sel),
    )
