"""Symmetric alpha-stable variates and exact-increment path skeletons.

The unit variate has characteristic function ``exp(-|s|**alpha)``; at
``alpha = 2`` this is the centred Gaussian with variance 2. Paths use the
same convention unless the ``StableSpec`` selects ``Convention.STANDARD_BM``, which
rescales the ``alpha = 2`` process by ``1/sqrt(2)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Convention",
    "PathSkeleton",
    "SeedStream",
    "StableSpec",
    "coordinate_extremes",
    "sample_path_skeleton",
    "sample_sas",
    "sas_variates",
]


class Convention(enum.Enum):
    PAPER_STABLE = "paper"
    STANDARD_BM = "std-bm"

    @classmethod
    def parse(cls, value) -> "Convention":
        if isinstance(value, cls):
            return value
        key = str(value).lower().replace("_", "-")
        aliases = {"paper": cls.PAPER_STABLE, "paperstable": cls.PAPER_STABLE,
                   "paper-stable": cls.PAPER_STABLE, "std-bm": cls.STANDARD_BM,
                   "standardbm": cls.STANDARD_BM, "standard-bm": cls.STANDARD_BM}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown convention {value!r}") from None


def _check_alpha(alpha: float) -> None:
    if not 1.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (1, 2], got {alpha}")


@dataclass(frozen=True)
class StableSpec:
    alpha: float
    d: int = 1
    convention: Convention = Convention.PAPER_STABLE

    def __post_init__(self):
        _check_alpha(self.alpha)
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        object.__setattr__(self, "convention", Convention.parse(self.convention))
        if self.convention is Convention.STANDARD_BM and self.alpha != 2.0:
            raise ValueError("the standard Brownian convention requires alpha = 2")

    @property
    def scale(self) -> float:
        """Factor applied to paper-convention paths."""
        return 1.0 / math.sqrt(2.0) if self.convention is Convention.STANDARD_BM else 1.0


@dataclass(frozen=True)
class SeedStream:
    """Independent random stream ``index`` derived from ``seed``.

    Streams come from ``SeedSequence`` spawn keys feeding the counter-based
    Philox generator, so distinct indices never overlap.
    """

    seed: int
    index: int = 0

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("stream index must be nonnegative")

    def rng(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed) & (2**64 - 1), spawn_key=(int(self.index),))
        return np.random.Generator(np.random.Philox(ss))


def _as_rng(stream) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    if isinstance(stream, SeedStream):
        return stream.rng()
    return np.random.default_rng(stream)


def sas_variates(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    """Draw symmetric stable variates by Chambers-Mallows-Stuck.

    One uniform angle on ``(-pi/2, pi/2)`` and one unit exponential per
    draw. ``alpha == 2`` takes the exact Gaussian branch.
    """
    _check_alpha(alpha)
    if alpha == 2.0:
        return math.sqrt(2.0) * rng.standard_normal(size)
    v = rng.uniform(-math.pi / 2, math.pi / 2, size)
    w = rng.standard_exponential(size)
    cv = np.cos(v)
    return (np.sin(alpha * v) / cv ** (1.0 / alpha)) * (np.cos((1.0 - alpha) * v) / w) ** (
        (1.0 - alpha) / alpha
    )


def sample_sas(alpha: float, stream) -> float:
    """One unit symmetric stable draw from ``stream``."""
    return float(sas_variates(alpha, None, _as_rng(stream)))


@dataclass(frozen=True)
class PathSkeleton:
    """Path positions at times ``k * t / n`` for ``k = 0..n``."""

    spec: StableSpec
    t: float
    points: np.ndarray

    @property
    def n(self) -> int:
        return self.points.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t, self.n + 1)

    def subsample(self, step: int) -> "PathSkeleton":
        """Skeleton on the coarser grid keeping every ``step``-th point."""
        if self.n % step:
            raise ValueError(f"step {step} does not divide n = {self.n}")
        return PathSkeleton(self.spec, self.t, self.points[::step])


def sample_path_skeleton(spec: StableSpec, t: float, n: int, stream) -> PathSkeleton:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not t >= 0.0:
        raise ValueError(f"horizon must be nonnegative, got {t}")
    rng = _as_rng(stream)
    steps = sas_variates(spec.alpha, (n, spec.d), rng)
    steps *= (t / n) ** (1.0 / spec.alpha) * spec.scale
    points = np.zeros((n + 1, spec.d))
    np.cumsum(steps, axis=0, out=points[1:])
    return PathSkeleton(spec, float(t), points)


def coordinate_extremes(path) -> list[tuple[float, float]]:
    """Per-coordinate ``(min, max)`` over all skeleton points."""
    pts = path.points if isinstance(path, PathSkeleton) else np.asarray(path, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise ValueError("empty skeleton")
    return [(float(lo), float(hi)) for lo, hi in zip(pts.min(axis=0), pts.max(axis=0))]
