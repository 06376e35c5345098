"""Statistical backbone: accumulators, confidence intervals, the replication
driver and discretization extrapolation.

Replications are keyed by stream index. The driver groups indices into
fixed-size chunks, so the merge tree never depends on how many worker
processes were used; results are byte-identical for any ``workers``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from .stable_sim import SeedStream

__all__ = [
    "Accumulator",
    "EstimateCI",
    "FitResult",
    "ReplicationError",
    "accumulate",
    "confidence_interval",
    "discretization_fit",
    "extrapolate",
    "merge",
    "run_replications",
    "z_value",
]

_Z = {0.9: 1.6448536269514722, 0.95: 1.959963984540054, 0.99: 2.5758293035489004}


def z_value(level: float) -> float:
    """Two-sided standard normal quantile for confidence ``level``."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"confidence level must be in (0, 1), got {level}")
    z = _Z.get(round(level, 12))
    if z is None:
        z = NormalDist().inv_cdf(0.5 + level / 2.0)
    return z


@dataclass(frozen=True)
class EstimateCI:
    """Monte Carlo estimate of a mean with a normal-theory interval."""

    count: int
    mean: float
    variance: float
    half_width: float
    level: float

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count else math.inf

    @property
    def lower(self) -> float:
        return self.mean - self.half_width

    @property
    def upper(self) -> float:
        return self.mean + self.half_width

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def overlaps(self, other: "EstimateCI") -> bool:
        return self.lower <= other.upper and other.lower <= self.upper

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "mean": self.mean,
            "variance": self.variance,
            "half_width": self.half_width,
            "level": self.level,
        }


class Accumulator:
    """Streaming mean and covariance of fixed-length observation vectors.

    Scalar observations are vectors of length one. Updates use Welford's
    recurrence, merges use the pairwise formula of Chan, Golub and LeVeque.
    """

    __slots__ = ("count", "mean", "m2")

    def __init__(self, dim: int = 1):
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros((dim, dim))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def add(self, x) -> "Accumulator":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + np.outer(delta, x - self.mean)
        return self

    def add_batch(self, xs) -> "Accumulator":
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs.reshape(-1, self.dim) if self.dim > 1 else xs[:, None]
        if xs.shape[0] == 0:
            return self
        other = Accumulator(xs.shape[1])
        other.count = xs.shape[0]
        other.mean = xs.mean(axis=0)
        centered = xs - other.mean
        other.m2 = centered.T @ centered
        merged = self.merge(other)
        self.count, self.mean, self.m2 = merged.count, merged.mean, merged.m2
        return self

    def merge(self, other: "Accumulator") -> "Accumulator":
        out = Accumulator(self.dim)
        if other.count == 0:
            out.count, out.mean, out.m2 = self.count, self.mean.copy(), self.m2.copy()
            return out
        if self.count == 0:
            out.count, out.mean, out.m2 = other.count, other.mean.copy(), other.m2.copy()
            return out
        n = self.count + other.count
        delta = other.mean - self.mean
        out.count = n
        out.mean = self.mean + delta * (other.count / n)
        out.m2 = self.m2 + other.m2 + np.outer(delta, delta) * (self.count * other.count / n)
        return out

    @property
    def covariance(self) -> np.ndarray:
        if self.count < 2:
            return np.full_like(self.m2, np.nan)
        return self.m2 / (self.count - 1)

    @property
    def variance(self) -> np.ndarray:
        return np.maximum(np.diag(self.covariance), 0.0)

    def __repr__(self) -> str:
        return f"Accumulator(count={self.count}, mean={self.mean!r})"


def accumulate(acc: Accumulator, x) -> Accumulator:
    return acc.add(x)


def merge(a: Accumulator, b: Accumulator) -> Accumulator:
    return a.merge(b)


def confidence_interval(acc: Accumulator, level: float = 0.99, weights=None) -> EstimateCI:
    """Interval for one component of ``acc`` or for a linear combination.

    ``weights`` is either a component index or a coefficient vector; the
    variance of a combination uses the full sample covariance.
    """
    if acc.count < 2:
        raise ValueError(f"need at least 2 observations for an interval, got {acc.count}")
    if weights is None:
        weights = 0
    if isinstance(weights, (int, np.integer)):
        c = np.zeros(acc.dim)
        c[weights] = 1.0
    else:
        c = np.asarray(weights, dtype=float)
    mean = float(c @ acc.mean)
    var = max(float(c @ acc.covariance @ c), 0.0)
    hw = z_value(level) * math.sqrt(var / acc.count)
    return EstimateCI(acc.count, mean, var, hw, level)


class ReplicationError(RuntimeError):
    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"replication with stream index {index} failed: {cause!r}")
        self.index = index


def _run_chunk(task, seed: int, start: int, stop: int) -> Accumulator:
    rows = []
    for i in range(start, stop):
        try:
            rows.append(np.atleast_1d(np.asarray(task(SeedStream(seed, i)), dtype=float)))
        except Exception as exc:
            raise ReplicationError(i, exc) from exc
    block = np.vstack(rows)
    return Accumulator(block.shape[1]).add_batch(block)


def run_replications(
    task: Callable[[SeedStream], object],
    reps: int,
    seed: int = 0,
    workers: int = 1,
    chunk_size: int = 256,
) -> Accumulator:
    """Evaluate ``task`` on stream indices ``0..reps-1`` and accumulate.

    ``task`` must be a picklable pure function of its :class:`SeedStream`
    returning a scalar or a fixed-length vector.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    bounds = [(s, min(s + chunk_size, reps)) for s in range(0, reps, chunk_size)]
    if workers <= 1 or len(bounds) == 1:
        parts = [_run_chunk(task, seed, a, b) for a, b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, task, seed, a, b) for a, b in bounds]
            parts = [f.result() for f in futures]
    total = parts[0]
    for part in parts[1:]:
        total = total.merge(part)
    return total


@dataclass(frozen=True)
class FitResult:
    """Fit of ``mean(n) = value - bias * n**(-rate)``.

    ``coefficients`` express ``value`` as a linear combination of the input
    means at the fitted rate, which is how its interval is propagated.
    """

    value: float
    bias: float
    rate: float
    residual: float
    monotone: bool = True
    coefficients: tuple = field(default=())

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "bias": self.bias,
            "rate": self.rate,
            "residual": self.residual,
            "monotone": self.monotone,
        }


_RATE_BOUNDS = (0.3, 1.0)


def _wls(ns, means, w, rate):
    X = np.column_stack([np.ones_like(ns), -(ns ** -rate)])
    XtW = X.T * w
    L = np.linalg.solve(XtW @ X, XtW)
    beta = L @ means
    resid = float(np.sum(w * (means - X @ beta) ** 2))
    return beta, resid, L[0]


def _golden(f, lo, hi, tol=1e-12):
    g = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = hi - g * (hi - lo), lo + g * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - g * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + g * (hi - lo)
            fd = f(d)
    return (lo + hi) / 2.0


def discretization_fit(pairs: Sequence[tuple[int, EstimateCI]], noise_sigmas: float = 3.0) -> FitResult:
    """Extrapolate grid-resolution estimates to ``n -> infinity``.

    Weighted least squares in ``(value, bias)`` for fixed rate, golden
    section over the rate in ``[0.3, 1]``. Means that fall by more than
    ``noise_sigmas`` combined standard errors between consecutive
    resolutions mark the fit non-monotone; the largest-n value is returned.
    """
    pairs = sorted(pairs, key=lambda p: p[0])
    ns = np.array([float(n) for n, _ in pairs])
    if len(set(ns)) < 3:
        raise ValueError("discretization fit needs at least 3 distinct resolutions")
    means = np.array([ci.mean for _, ci in pairs])
    se = np.array([ci.std_error for _, ci in pairs])
    last = np.zeros(len(ns))
    last[-1] = 1.0

    for i in range(len(ns) - 1):
        drop = means[i] - means[i + 1]
        if drop > noise_sigmas * math.hypot(se[i], se[i + 1]) and drop > 1e-14 * abs(means[i]):
            return FitResult(float(means[-1]), 0.0, float("nan"), float("nan"), False, tuple(last))

    w = np.ones_like(ns) if np.any(se <= 0) else 1.0 / se**2
    w = w / w.max()
    scale = ns[0]
    nsc = ns / scale

    def resid(rate):
        return _wls(nsc, means, w, rate)[1]

    grid = np.linspace(*_RATE_BOUNDS, 71)
    k = int(np.argmin([resid(r) for r in grid]))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    rate = _golden(resid, lo, hi)
    beta, res, coef = _wls(nsc, means, w, rate)
    bias = float(beta[1] * scale**rate)
    return FitResult(float(beta[0]), bias, float(rate), res, True, tuple(coef))


def extrapolate(acc: Accumulator, ns: Sequence[int], level: float = 0.99, components=None):
    """Fit accumulated per-resolution means and return ``(fit, interval)``.

    ``components`` selects the accumulator entries holding the resolutions
    ``ns`` (default: the first ``len(ns)``). The returned interval is for
    the fitted linear combination at the fitted rate, using the full
    covariance of the nested-grid observations.
    """
    if components is None:
        components = list(range(len(ns)))
    cis = [confidence_interval(acc, level, int(j)) for j in components]
    fit = discretization_fit(list(zip(ns, cis)))
    order = np.argsort(ns)
    weights = np.zeros(acc.dim)
    for coef, j in zip(fit.coefficients, np.asarray(components)[order]):
        weights[j] += coef
    return fit, confidence_interval(acc, level, weights), cis
