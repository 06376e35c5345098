"""Monte Carlo and convex-geometry tools for hulls and sausages of
symmetric alpha-stable processes."""

from .convex_geom import EuclideanBall, LpBall, Polytope, SphereQuadrature, sphere_quadrature
from .mc_engine import Accumulator, EstimateCI, FitResult, run_replications
from .stable_sim import Convention, PathSkeleton, SeedStream, StableSpec, sample_path_skeleton

__version__ = "0.1.0"

__all__ = [
    "Accumulator",
    "Convention",
    "EstimateCI",
    "EuclideanBall",
    "FitResult",
    "LpBall",
    "PathSkeleton",
    "Polytope",
    "SeedStream",
    "SphereQuadrature",
    "StableSpec",
    "run_replications",
    "sample_path_skeleton",
    "sphere_quadrature",
]
