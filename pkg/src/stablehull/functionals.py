"""Monte Carlo estimators of expected hull functionals and their closed-form
counterparts.

Every path-dependent estimator simulates one skeleton on the finest grid
``n0 * 2**(levels-1)`` and evaluates the functional on the nested coarser
grids obtained by subsampling. The per-replication vector of grid values
is accumulated jointly, so the extrapolated estimate (see
:func:`stablehull.mc_engine.extrapolate`) carries an honest interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

import numpy as np
from scipy.special import gamma

from . import convex_geom as cg
from .mc_engine import EstimateCI, FitResult, confidence_interval, extrapolate, run_replications
from .stable_sim import Convention, SeedStream, StableSpec, sample_path_skeleton, sas_variates

__all__ = [
    "ExtrapolatedEstimate",
    "HullFunctionalRequest",
    "c_alpha_closed_form",
    "c_alpha_estimate",
    "dual_ball_mixed_volume",
    "estimate_V1",
    "estimate_V2_kubota",
    "estimate_mean_support",
    "kubota_constant",
    "scaling_check",
    "spitzer_pair",
    "theorem1_lhs",
    "theorem1_rhs",
    "v1_brownian",
    "v2_brownian",
]

DEFAULT_REPS = 100_000
DEFAULT_N0 = 512
DEFAULT_M = 4096
DEFAULT_LEVEL = 0.99


@dataclass(frozen=True)
class ExtrapolatedEstimate:
    """Raw per-resolution intervals plus the extrapolated one."""

    raw: tuple
    fit: FitResult
    extrapolated: EstimateCI
    notes: tuple = field(default=())

    @property
    def mean(self) -> float:
        return self.extrapolated.mean

    @property
    def finest(self) -> EstimateCI:
        return self.raw[-1][1]

    def to_dict(self) -> dict:
        return {
            "raw": [{"n": n, **ci.to_dict()} for n, ci in self.raw],
            "fit": self.fit.to_dict(),
            "extrapolated": self.extrapolated.to_dict(),
            "notes": list(self.notes),
        }


def _levels(n0: int, levels: int):
    if n0 < 1 or levels < 3:
        raise ValueError("need n0 >= 1 and at least 3 nested resolutions")
    ns = [n0 * 2**i for i in range(levels)]
    steps = [ns[-1] // n for n in ns]
    return ns, steps


def _nested(task, ns, reps, seed, workers, level, notes=()):
    acc = run_replications(task, reps, seed, workers)
    fit, ci, raw = extrapolate(acc, ns, level)
    return ExtrapolatedEstimate(tuple(zip(ns, raw)), fit, ci, tuple(notes))


# ---------------------------------------------------------------------------
# constants


def c_alpha_closed_form(alpha: float, convention=Convention.PAPER_STABLE) -> float:
    """Candidate value of ``(alpha/2) E|X_1(1)|``.

    Uses the absolute-moment formula of the symmetric stable law,
    ``E|X| = 2 Gamma(1 - 1/alpha) / pi``; checked against density
    integration, never used as an acceptance reference.
    """
    spec = StableSpec(alpha, 1, convention)
    return alpha * gamma(1.0 - 1.0 / alpha) / math.pi * spec.scale


def _c_alpha_task(stream: SeedStream, alpha: float, scale: float):
    x = sas_variates(alpha, None, stream.rng()) * scale
    return 0.5 * alpha * abs(x)


def c_alpha_estimate(spec: StableSpec, reps: int = DEFAULT_REPS, seed: int = 0,
                     workers: int = 1, level: float = DEFAULT_LEVEL) -> EstimateCI:
    """Estimate the constant from exact one-step draws (no grid bias)."""
    task = partial(_c_alpha_task, alpha=spec.alpha, scale=spec.scale)
    return confidence_interval(run_replications(task, reps, seed, workers), level)


# ---------------------------------------------------------------------------
# mean support / Spitzer / scaling


def _mean_support_task(stream, spec, u, t, n, steps):
    proj = sample_path_skeleton(spec, t, n, stream).points @ u
    return [proj[::s].max() for s in steps]


def estimate_mean_support(spec: StableSpec, u, n0: int = DEFAULT_N0, reps: int = DEFAULT_REPS,
                          seed: int = 0, workers: int = 1, level: float = DEFAULT_LEVEL,
                          levels: int = 3) -> ExtrapolatedEstimate:
    """Estimate ``E h(Z, u)`` for the hull at horizon 1."""
    u = cg.as_unit_vector(np.asarray(u, dtype=float).reshape(spec.d), 1e-9)
    ns, steps = _levels(n0, levels)
    task = partial(_mean_support_task, spec=spec, u=u, t=1.0, n=ns[-1], steps=steps)
    return _nested(task, ns, reps, seed, workers, level)


def _positive_part_task(stream, alpha, scale):
    x = sas_variates(alpha, None, stream.rng()) * scale
    return alpha * max(x, 0.0)


def spitzer_pair(spec: StableSpec, n0: int = DEFAULT_N0, reps: int = DEFAULT_REPS, seed: int = 0,
                 workers: int = 1, level: float = DEFAULT_LEVEL, levels: int = 3):
    """``(E sup_{[0,1]} X_1, alpha E X_1(1)^+)``; the second from exact draws."""
    one_d = StableSpec(spec.alpha, 1, spec.convention)
    sup = estimate_mean_support(one_d, [1.0], n0, reps, seed, workers, level, levels)
    task = partial(_positive_part_task, alpha=spec.alpha, scale=spec.scale)
    pos = confidence_interval(run_replications(task, reps, seed + 1, workers), level)
    return sup, pos


def scaling_check(spec: StableSpec, t: float, u, n: int = 4 * DEFAULT_N0, reps: int = DEFAULT_REPS,
                  seed: int = 0, workers: int = 1, level: float = DEFAULT_LEVEL):
    """``(E h(Z_t, u), t**(1/alpha) E h(Z_1, u))`` on independent streams.

    Both sides use the same grid size ``n``; grid skeletons satisfy the
    scaling law exactly, so no extrapolation is involved.
    """
    if not t > 0:
        raise ValueError("horizon must be positive")
    u = cg.as_unit_vector(np.asarray(u, dtype=float).reshape(spec.d), 1e-9)
    lhs_task = partial(_mean_support_task, spec=spec, u=u, t=float(t), n=n, steps=[1])
    rhs_task = partial(_mean_support_task, spec=spec, u=u, t=1.0, n=n, steps=[1])
    lhs = confidence_interval(run_replications(lhs_task, reps, seed, workers), level)
    one = confidence_interval(run_replications(rhs_task, reps, seed + 1, workers), level)
    f = t ** (1.0 / spec.alpha)
    rhs = EstimateCI(one.count, f * one.mean, f * f * one.variance, f * one.half_width, level)
    return lhs, rhs


# ---------------------------------------------------------------------------
# support integrals of skeleton hulls


def _hull_levels(points2, steps, functional):
    """Planar hull functional on nested subgrids, sorting only once."""
    order = np.lexsort((points2[:, 1], points2[:, 0]))
    s_all = points2[order]
    out = []
    for s in steps:
        sub = s_all[order % s == 0] if s > 1 else s_all
        keep = np.ones(len(sub), dtype=bool)
        keep[1:] = np.any(sub[1:] != sub[:-1], axis=1)
        sub = sub[keep]
        idx = cg._monotone_chain(np.ascontiguousarray(sub[:, 0]), np.ascontiguousarray(sub[:, 1]))
        out.append(functional(sub[idx]))
    return out


def _sphere_integral_levels(points, steps, quad, rng):
    """``int_{S^{d-1}} h(conv points[::s], u) du`` for each step ``s``.

    d = 1 and d = 2 are exact (range, hull perimeter); otherwise ``quad``
    is applied under a fresh random rotation.
    """
    d = points.shape[1]
    if d == 1:
        x = points[:, 0]
        return [x[::s].max() - x[::s].min() for s in steps]
    if d == 2:
        return _hull_levels(points, steps, cg.polygon_perimeter)
    q = quad.rotated(rng)
    proj = points @ q.nodes.T
    return [float(proj[::s].max(axis=0) @ q.weights) for s in steps]


def _integral_quadrature(d, m):
    return cg.default_quadrature(d, m, stream=0) if d >= 3 else None


def _ball_slot_task(stream, spec, n, steps, quad, factor):
    rng = stream.rng()
    pts = sample_path_skeleton(spec, 1.0, n, rng).points
    return [factor * v for v in _sphere_integral_levels(pts, steps, quad, rng)]


def _polytope_slot_task(stream, spec, n, steps, normals, measures):
    pts = sample_path_skeleton(spec, 1.0, n, stream).points
    proj = pts @ normals.T
    return [float(proj[::s].max(axis=0) @ measures) / spec.d for s in steps]


def _slot_kind(spec: StableSpec, slots: Sequence[cg.ConvexBody]):
    if len(slots) != spec.d - 1:
        raise ValueError(f"need d - 1 = {spec.d - 1} slot bodies, got {len(slots)}")
    if all(isinstance(b, cg.EuclideanBall) for b in slots):
        return "ball", float(np.prod([b.radius for b in slots]))
    first = slots[0]
    if isinstance(first, cg.Polytope) and all(b is first for b in slots):
        if not first.has_facets:
            raise ValueError("polytope slot needs facet data")
        if first.d != spec.d:
            raise ValueError("polytope dimension does not match the process")
        return "polytope", first
    raise ValueError("supported slot configurations: all Euclidean balls, or one polytope repeated")


def theorem1_lhs(spec: StableSpec, slots: Sequence[cg.ConvexBody], n0: int = DEFAULT_N0,
                 reps: int = DEFAULT_REPS, m: int = DEFAULT_M, seed: int = 0, workers: int = 1,
                 level: float = DEFAULT_LEVEL, levels: int = 3) -> ExtrapolatedEstimate:
    """Estimate ``E V(K_1, ..., K_{d-1}, Z)`` for supported slot bodies."""
    if spec.d < 2:
        raise ValueError("mixed volumes with slots need d >= 2")
    kind, data = _slot_kind(spec, slots)
    ns, steps = _levels(n0, levels)
    if kind == "ball":
        task = partial(_ball_slot_task, spec=spec, n=ns[-1], steps=steps,
                       quad=_integral_quadrature(spec.d, m), factor=data / spec.d)
    else:
        task = partial(_polytope_slot_task, spec=spec, n=ns[-1], steps=steps,
                       normals=data.normals, measures=data.facet_measures)
    return _nested(task, ns, reps, seed, workers, level)


def dual_ball_mixed_volume(slots: Sequence[cg.ConvexBody], alpha: float, m: int = DEFAULT_M) -> float:
    """``V(K_1, ..., K_{d-1}, B_{alpha'})``, whose last slot has support ``||u||_alpha``."""
    d = len(slots) + 1
    kind, data = _slot_kind(StableSpec(alpha, d), slots)
    dual_support = partial(cg.lp_norm, p=alpha)
    if kind == "polytope":
        return cg.mixed_volume_polytope_slots(data, dual_support)
    if alpha == 2.0:
        return data * cg.unit_ball_volume(d)
    if d == 1:
        return 2.0 * data
    q = cg.default_quadrature(d, m, stream=0)
    return data * q.integrate(dual_support) / d


def theorem1_rhs(spec: StableSpec, slots: Sequence[cg.ConvexBody], m: int = DEFAULT_M,
                 c_alpha=None) -> float:
    """``c_alpha * V(K_1, ..., K_{d-1}, B_{alpha'})``.

    ``c_alpha`` may be a number or an :class:`EstimateCI`; by default the
    closed-form candidate is used.
    """
    if c_alpha is None:
        c = c_alpha_closed_form(spec.alpha, spec.convention)
    else:
        c = c_alpha.mean if isinstance(c_alpha, EstimateCI) else float(c_alpha)
    return float(c * dual_ball_mixed_volume(slots, spec.alpha, m))


def estimate_V1(spec: StableSpec, n0: int = DEFAULT_N0, reps: int = DEFAULT_REPS,
                m: int = DEFAULT_M, seed: int = 0, workers: int = 1,
                level: float = DEFAULT_LEVEL, levels: int = 3) -> ExtrapolatedEstimate:
    """Estimate ``E V_1(Z)`` as a normalised support integral."""
    ns, steps = _levels(n0, levels)
    factor = 1.0 / cg.unit_ball_volume(spec.d - 1)
    task = partial(_ball_slot_task, spec=spec, n=ns[-1], steps=steps,
                   quad=_integral_quadrature(spec.d, m), factor=factor)
    return _nested(task, ns, reps, seed, workers, level)


def kubota_constant(d: int) -> float:
    """Factor turning the mean projected area into ``V_2`` in R^d."""
    k = cg.unit_ball_volume
    return d * (d - 1) * k(d) / (2.0 * k(2) * k(d - 2))


def _v2_task(stream, spec, n, steps, planes, fixed, const):
    rng = stream.rng()
    pts = sample_path_skeleton(spec, 1.0, n, rng).points
    totals = np.zeros(len(steps))
    for _ in range(planes):
        if spec.d == 2:
            proj = pts
        elif fixed:
            proj = pts[:, :2]
        else:
            proj = cg.project_points(pts, cg.haar_random_plane(spec.d, rng))
        totals += _hull_levels(proj, steps, cg.polygon_area)
    return const * totals / planes


def estimate_V2_kubota(spec: StableSpec, n0: int = DEFAULT_N0, reps: int = DEFAULT_REPS,
                       planes: int | None = None, fixed_plane: bool = False, seed: int = 0,
                       workers: int = 1, level: float = DEFAULT_LEVEL,
                       levels: int = 3) -> ExtrapolatedEstimate:
    """Estimate ``E V_2(Z)`` from projected hull areas (Kubota's formula).

    Each replication averages over ``planes`` Haar-random planes (default 1
    for Brownian motion, 8 otherwise). ``fixed_plane`` uses the first
    coordinate plane, which is only valid for rotation-invariant laws.
    """
    if spec.d < 2:
        raise ValueError("V_2 needs d >= 2")
    if fixed_plane and spec.alpha != 2.0:
        raise ValueError("a fixed plane is only valid for alpha = 2 (rotation invariance)")
    if planes is None:
        planes = 1 if (spec.d == 2 or spec.alpha == 2.0) else 8
    if spec.d == 2:
        planes = 1
    notes = ("fixed coordinate plane",) if fixed_plane and spec.d > 2 else ()
    ns, steps = _levels(n0, levels)
    task = partial(_v2_task, spec=spec, n=ns[-1], steps=steps, planes=planes,
                   fixed=fixed_plane, const=kubota_constant(spec.d))
    return _nested(task, ns, reps, seed, workers, level, notes)


# ---------------------------------------------------------------------------
# closed forms for Brownian motion (standard normalisation)


def v1_brownian(d: int) -> float:
    return d * math.sqrt(2.0) * gamma((d - 1) / 2.0 + 1.0) / gamma(d / 2.0 + 1.0)


def v2_brownian(d: int) -> float:
    return (d - 1) * math.pi / 2.0


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HullFunctionalRequest:
    """One estimation job: a functional name plus its parameters."""

    spec: StableSpec
    functional: str
    n: int = DEFAULT_N0
    reps: int = DEFAULT_REPS
    m: int = DEFAULT_M
    u: tuple | None = None
    slots: tuple = ()
    t: float = 1.0
    seed: int = 0
    level: float = DEFAULT_LEVEL
    workers: int = 1

    def __post_init__(self):
        if self.reps < 2:
            raise ValueError("need at least 2 replications")
        if self.n < 1:
            raise ValueError("grid resolution must be >= 1")
        if self.functional == "mixed-volume" and len(self.slots) != self.spec.d - 1:
            raise ValueError("mixed-volume needs d - 1 slot bodies")

    def direction(self) -> np.ndarray:
        if self.u is None:
            e = np.zeros(self.spec.d)
            e[0] = 1.0
            return e
        u = np.asarray(self.u, dtype=float)
        return u / np.linalg.norm(u)

    def run(self):
        common = dict(seed=self.seed, workers=self.workers, level=self.level)
        f = self.functional
        if f == "mean-support":
            return estimate_mean_support(self.spec, self.direction(), self.n, self.reps, **common)
        if f == "c-alpha":
            return c_alpha_estimate(self.spec, self.reps, **common)
        if f == "mixed-volume":
            return theorem1_lhs(self.spec, list(self.slots), self.n, self.reps, self.m, **common)
        if f == "V1":
            return estimate_V1(self.spec, self.n, self.reps, self.m, **common)
        if f == "V2":
            return estimate_V2_kubota(self.spec, self.n, self.reps, **common)
        if f == "spitzer":
            return spitzer_pair(self.spec, self.n, self.reps, **common)
        if f == "scaling-check":
            return scaling_check(self.spec, self.t, self.direction(), 4 * self.n, self.reps, **common)
        raise ValueError(f"unknown functional {f!r}")
