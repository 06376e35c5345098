"""Deterministic convex-geometry kernel.

Everything here works from support functions. Full hulls are built only in
the plane (Andrew's monotone chain); in higher dimension the path functionals
are support-function integrals, and polytope facet data is only kept for
d <= 3 and for axis-aligned boxes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy.special import gammaln

from .stable_sim import SeedStream, _as_rng

__all__ = [
    "ConvexBody",
    "EuclideanBall",
    "LpBall",
    "Polytope",
    "QuadratureScheme",
    "SphereQuadrature",
    "as_unit_vector",
    "conjugate_exponent",
    "dual_exponent",
    "haar_random_plane",
    "haar_rotation",
    "hull_2d",
    "hull_2d_vertices",
    "intrinsic_volume_1",
    "lp_norm",
    "mixed_volume_ball_slots",
    "mixed_volume_polytope_slots",
    "polygon_area",
    "polygon_perimeter",
    "project_points",
    "sphere_area",
    "sphere_quadrature",
    "support_body",
    "support_point_cloud",
    "unit_ball_volume",
]

UNIT_TOL = 1e-12


def unit_ball_volume(j: int) -> float:
    """Volume of the j-dimensional Euclidean unit ball."""
    if j < 0:
        raise ValueError("dimension must be nonnegative")
    return math.exp(0.5 * j * math.log(math.pi) - gammaln(0.5 * j + 1.0))


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d, ``d * kappa_d``."""
    return d * unit_ball_volume(d)


def as_unit_vector(u, tol: float = UNIT_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    norms = np.linalg.norm(u, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValueError("not a unit vector")
    return u


def conjugate_exponent(p: float) -> float:
    """Hoelder conjugate ``p/(p-1)``, with ``1 <-> inf``."""
    if p < 1.0:
        raise ValueError(f"exponent must be >= 1, got {p}")
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def dual_exponent(alpha: float) -> float:
    if not 1.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (1, 2], got {alpha}")
    return alpha / (alpha - 1.0)


def lp_norm(u, p: float) -> np.ndarray:
    u = np.abs(np.asarray(u, dtype=float))
    if math.isinf(p):
        return u.max(axis=-1)
    if p == 2.0:
        return np.sqrt((u * u).sum(axis=-1))
    if p == 1.0:
        return u.sum(axis=-1)
    # scale by the max entry to keep u**p away from underflow
    m = u.max(axis=-1, keepdims=True)
    m = np.where(m > 0, m, 1.0)
    return m[..., 0] * ((u / m) ** p).sum(axis=-1) ** (1.0 / p)


# ---------------------------------------------------------------------------
# bodies


class ConvexBody:
    """Base for bodies with exact support functions."""

    d: int

    def support(self, u) -> np.ndarray:
        raise NotImplementedError

    def contains(self, y, tol: float = 1e-12) -> np.ndarray:
        raise NotImplementedError

    @property
    def volume(self) -> float:
        raise NotImplementedError

    @property
    def inradius(self) -> float:
        """Radius of the largest origin-centred Euclidean ball inside the body."""
        raise NotImplementedError


@dataclass(frozen=True)
class EuclideanBall(ConvexBody):
    radius: float = 1.0
    d: int = 2

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    def support(self, u):
        u = np.asarray(u, dtype=float)
        return self.radius * np.linalg.norm(u, axis=-1)

    def contains(self, y, tol=1e-12):
        y = np.asarray(y, dtype=float)
        return np.einsum("...i,...i->...", y, y) <= (self.radius * (1 + tol)) ** 2

    @property
    def volume(self):
        return unit_ball_volume(self.d) * self.radius**self.d

    @property
    def inradius(self):
        return self.radius


@dataclass(frozen=True)
class LpBall(ConvexBody):
    """``{x : ||x||_p <= radius}``; support function ``radius * ||u||_{p'}``."""

    p: float = 2.0
    radius: float = 1.0
    d: int = 2

    def __post_init__(self):
        if not self.p >= 1.0:
            raise ValueError("p must be >= 1")
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    def support(self, u):
        return self.radius * lp_norm(u, conjugate_exponent(self.p))

    def contains(self, y, tol=1e-12):
        return lp_norm(y, self.p) <= self.radius * (1 + tol)

    @property
    def volume(self):
        if math.isinf(self.p):
            return (2.0 * self.radius) ** self.d
        log_v = self.d * (math.log(2.0) + gammaln(1.0 + 1.0 / self.p)) - gammaln(1.0 + self.d / self.p)
        return math.exp(log_v) * self.radius**self.d

    @property
    def inradius(self):
        if self.p >= 2.0:
            return self.radius
        return self.radius * self.d ** (0.5 - 1.0 / self.p)


@dataclass(frozen=True, eq=False)
class Polytope(ConvexBody):
    """Convex polytope given by vertices, optionally with facet data.

    ``normals`` are outer unit facet normals and ``facet_measures`` the
    (d-1)-dimensional facet areas; facets may be triangulated pieces.
    """

    vertices: np.ndarray
    normals: np.ndarray | None = None
    facet_measures: np.ndarray | None = None
    d: int = field(init=False)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[0] == 0:
            raise ValueError("polytope needs at least one vertex")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "d", v.shape[1])
        if (self.normals is None) != (self.facet_measures is None):
            raise ValueError("normals and facet_measures go together")
        if self.normals is not None:
            nrm = np.atleast_2d(np.asarray(self.normals, dtype=float)).reshape(-1, self.d)
            meas = np.asarray(self.facet_measures, dtype=float).reshape(-1)
            if nrm.shape[0] != meas.shape[0]:
                raise ValueError("one measure per facet normal")
            if nrm.shape[0]:
                as_unit_vector(nrm, 1e-9)
            if np.any(meas < 0):
                raise ValueError("facet measures must be nonnegative")
            object.__setattr__(self, "normals", nrm)
            object.__setattr__(self, "facet_measures", meas)

    @property
    def has_facets(self) -> bool:
        return self.normals is not None

    @classmethod
    def box(cls, lengths, lower=None) -> "Polytope":
        """Axis-aligned box with side ``lengths``; centred unless ``lower`` is given."""
        a = np.asarray(lengths, dtype=float).reshape(-1)
        if np.any(a <= 0):
            raise ValueError("box side lengths must be positive")
        d = a.size
        lo = -a / 2 if lower is None else np.asarray(lower, dtype=float)
        corners = np.array(np.meshgrid(*[[0.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
        verts = lo + corners * a
        normals, meas = [], []
        for j in range(d):
            face = float(np.prod(np.delete(a, j)))
            for sgn in (1.0, -1.0):
                e = np.zeros(d)
                e[j] = sgn
                normals.append(e)
                meas.append(face)
        return cls(verts, np.array(normals), np.array(meas))

    @classmethod
    def cube(cls, a: float = 1.0, d: int = 3, lower=None) -> "Polytope":
        return cls.box(np.full(d, float(a)), lower=lower)

    @classmethod
    def from_vertices(cls, points) -> "Polytope":
        """Hull of ``points`` with facet data (d <= 3 only)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = pts.shape[1]
        if d == 1:
            lo, hi = pts.min(), pts.max()
            return cls(np.array([[lo], [hi]]), np.array([[1.0], [-1.0]]), np.ones(2))
        if d == 2:
            return hull_2d(pts)
        if d == 3:
            from scipy.spatial import ConvexHull

            hull = ConvexHull(pts)
            verts = pts[hull.vertices]
            tri = pts[hull.simplices]
            areas = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
            return cls(verts, hull.equations[:, :3], areas)
        raise ValueError("facet enumeration only for d <= 3; use Polytope.box in higher dimension")

    def support(self, u):
        return support_point_cloud(self.vertices, u)

    @property
    def offsets(self) -> np.ndarray:
        self._need_facets()
        return self.support(self.normals)

    def contains(self, y, tol=1e-12):
        self._need_facets()
        y = np.asarray(y, dtype=float)
        return np.all(y @ self.normals.T <= self.offsets + tol, axis=-1)

    @property
    def volume(self):
        self._need_facets()
        return float(self.facet_measures @ self.offsets) / self.d

    @property
    def inradius(self):
        return float(np.min(self.offsets))

    def _need_facets(self):
        if self.normals is None:
            raise ValueError("polytope has no facet data")

    def __repr__(self):
        return f"Polytope(d={self.d}, vertices={len(self.vertices)})"


def support_point_cloud(points, u):
    """``max_k <points[k], u>``; ``u`` may be one direction or a stack."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    u = np.asarray(u, dtype=float)
    if pts.shape[0] == 0:
        raise ValueError("empty point cloud")
    vals = pts @ u.T if u.ndim > 1 else pts @ u
    return vals.max(axis=0)


def support_body(body: ConvexBody, u):
    return body.support(u)


# ---------------------------------------------------------------------------
# planar hulls


@numba.njit(cache=True)
def _monotone_chain(xs, ys):
    # xs, ys sorted lexicographically, duplicates removed
    n = xs.shape[0]
    out = np.empty(2 * n, dtype=np.int64)
    if n <= 2:
        for i in range(n):
            out[i] = i
        return out[:n]
    k = 0
    for i in range(n):
        while k >= 2:
            a, b = out[k - 2], out[k - 1]
            cr = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cr <= 0.0:
                k -= 1
            else:
                break
        out[k] = i
        k += 1
    lower = k + 1
    for i in range(n - 2, -1, -1):
        while k >= lower:
            a, b = out[k - 2], out[k - 1]
            cr = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cr <= 0.0:
                k -= 1
            else:
                break
        out[k] = i
        k += 1
    return out[: k - 1]


def _sorted_unique(pts):
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    s = pts[order]
    keep = np.ones(len(s), dtype=bool)
    keep[1:] = np.any(s[1:] != s[:-1], axis=1)
    return s[keep]


def hull_2d_vertices(points) -> np.ndarray:
    """Vertices of the planar hull, counter-clockwise, as an array."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("empty point set")
    s = _sorted_unique(pts)
    idx = _monotone_chain(np.ascontiguousarray(s[:, 0]), np.ascontiguousarray(s[:, 1]))
    return s[idx]


def _polygon_facets(v):
    if len(v) < 2:
        return np.zeros((0, 2)), np.zeros(0)
    edges = np.roll(v, -1, axis=0) - v
    lengths = np.linalg.norm(edges, axis=1)
    normals = np.column_stack([edges[:, 1], -edges[:, 0]]) / lengths[:, None]
    return normals, lengths


def hull_2d(points) -> Polytope:
    """Convex hull of planar points as a polygon with edge data.

    Collinear input gives a two-vertex segment whose edge list holds both
    sides, so its perimeter is twice its length.
    """
    v = hull_2d_vertices(points)
    normals, lengths = _polygon_facets(v)
    return Polytope(v, normals, lengths)


def _vertices2(P):
    return P.vertices if isinstance(P, Polytope) else np.asarray(P, dtype=float).reshape(-1, 2)


def polygon_area(P) -> float:
    v = _vertices2(P)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(x @ np.roll(y, -1) - y @ np.roll(x, -1)))


def polygon_perimeter(P) -> float:
    v = _vertices2(P)
    if len(v) < 2:
        return 0.0
    return float(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1).sum())


# ---------------------------------------------------------------------------
# random frames and projections


def haar_random_plane(d: int, stream) -> np.ndarray:
    """Uniformly random orthonormal 2-frame in R^d, shape ``(2, d)``.

    Gram-Schmidt on two standard Gaussian vectors; unlike a library QR this
    keeps the first vector exactly uniform on the sphere.
    """
    if d < 2:
        raise ValueError("need d >= 2 for a plane")
    rng = _as_rng(stream)
    g = rng.standard_normal((2, d))
    e1 = g[0] / np.linalg.norm(g[0])
    v = g[1] - (g[1] @ e1) * e1
    e2 = v / np.linalg.norm(v)
    e2 = e2 - (e2 @ e1) * e1
    e2 /= np.linalg.norm(e2)
    return np.vstack([e1, e2])


def haar_rotation(d: int, stream) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR with sign correction)."""
    rng = _as_rng(stream)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def project_points(points, frame) -> np.ndarray:
    return np.asarray(points, dtype=float) @ np.asarray(frame, dtype=float).T


# ---------------------------------------------------------------------------
# spherical quadrature


class QuadratureScheme(enum.Enum):
    MONTE_CARLO = "montecarlo"
    FIBONACCI_3D = "fibonacci"
    EQUIANGULAR_2D = "equiangular"


@dataclass(frozen=True, eq=False)
class SphereQuadrature:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def d(self) -> int:
        return self.nodes.shape[1]

    @property
    def m(self) -> int:
        return self.nodes.shape[0]

    def integrate(self, f) -> float:
        values = f(self.nodes) if callable(f) else np.asarray(f, dtype=float)
        return float(self.weights @ values)

    def rotated(self, stream) -> "SphereQuadrature":
        """Same rule under a Haar-random rotation.

        Each rotated node is uniform on the sphere, so rotated rules give
        unbiased integrals when redrawn per replication.
        """
        rot = haar_rotation(self.d, stream)
        return SphereQuadrature(self.nodes @ rot.T, self.weights)


def fibonacci_nodes(m: int) -> np.ndarray:
    i = np.arange(m) + 0.5
    z = 1.0 - 2.0 * i / m
    phi = math.pi * (1.0 + math.sqrt(5.0)) * i
    rho = np.sqrt(1.0 - z * z)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def sphere_quadrature(d: int, m: int, scheme="montecarlo", stream=None) -> SphereQuadrature:
    """Equal-weight node set on the unit sphere of R^d.

    Weights sum to ``d * kappa_d``. ``montecarlo`` draws normalised
    Gaussians and needs ``stream``; ``fibonacci`` (d = 3) and
    ``equiangular`` (d = 2) are deterministic.
    """
    if m < 1:
        raise ValueError("need at least one node")
    scheme = QuadratureScheme(scheme.value if isinstance(scheme, QuadratureScheme) else scheme)
    if scheme is QuadratureScheme.MONTE_CARLO:
        if stream is None:
            raise ValueError("Monte Carlo nodes need a random stream")
        g = _as_rng(stream).standard_normal((m, d))
        nodes = g / np.linalg.norm(g, axis=1, keepdims=True)
    elif scheme is QuadratureScheme.FIBONACCI_3D:
        if d != 3:
            raise ValueError("the Fibonacci lattice is defined for d = 3 only")
        nodes = fibonacci_nodes(m)
    else:
        if d != 2:
            raise ValueError("equiangular nodes are defined for d = 2 only")
        th = 2.0 * math.pi * (np.arange(m) + 0.5) / m
        nodes = np.column_stack([np.cos(th), np.sin(th)])
    return SphereQuadrature(nodes, np.full(m, sphere_area(d) / m))


def default_quadrature(d: int, m: int, stream=None) -> SphereQuadrature:
    if d == 2:
        return sphere_quadrature(2, m, QuadratureScheme.EQUIANGULAR_2D)
    if d == 3:
        return sphere_quadrature(3, m, QuadratureScheme.FIBONACCI_3D)
    return sphere_quadrature(d, m, QuadratureScheme.MONTE_CARLO, stream if stream is not None else 0)


# ---------------------------------------------------------------------------
# mixed and intrinsic volumes

SupportFn = Callable[[np.ndarray], np.ndarray]


def _support_fn(K) -> SupportFn:
    if isinstance(K, ConvexBody):
        return K.support
    if callable(K):
        return K
    pts = np.atleast_2d(np.asarray(K, dtype=float))
    return lambda U: support_point_cloud(pts, U)


def mixed_volume_ball_slots(K_support, d: int, r: float, q: SphereQuadrature) -> float:
    """``V(rB, ..., rB, K)`` by quadrature of the support function of K.

    ``K_support`` is a body, a point cloud, or a vectorised support function.
    """
    if q.d != d:
        raise ValueError(f"quadrature is for d = {q.d}, not {d}")
    return r ** (d - 1) / d * q.integrate(_support_fn(K_support))


def mixed_volume_polytope_slots(P: Polytope, K_support) -> float:
    """``V(P, ..., P, K) = (1/d) sum_F |F| h(K, n_F)``, exact."""
    if not isinstance(P, Polytope) or not P.has_facets:
        raise ValueError("polytope slots need facet normals and measures")
    if len(P.facet_measures) == 0:
        return 0.0
    h = np.asarray(_support_fn(K_support)(P.normals), dtype=float)
    return float(P.facet_measures @ h) / P.d


def intrinsic_volume_1(K_support, d: int, q: SphereQuadrature) -> float:
    if q.d != d:
        raise ValueError(f"quadrature is for d = {q.d}, not {d}")
    return q.integrate(_support_fn(K_support)) / unit_ball_volume(d - 1)
