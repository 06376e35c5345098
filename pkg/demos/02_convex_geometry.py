"""Support functions, polarity, quadrature and mixed volumes."""

# %%
import math

import numpy as np

from stablehull import convex_geom as cg

# %% [markdown]
# The support function of the L_p ball is the dual norm, so the polar of
# B_alpha is B_alpha' with 1/alpha + 1/alpha' = 1.

# %%
u = np.array([0.6, -0.8, 0.0])
for alpha in (2.0, 1.5, 1.25):
    ap = cg.dual_exponent(alpha)
    h = cg.LpBall(ap, 1.0, 3).support(u)
    print(f"alpha={alpha}: alpha'={ap:g}  h(B_alpha', u)={h:.12f}  ||u||_alpha={cg.lp_norm(u, alpha):.12f}")

# %% [markdown]
# Planar hulls (monotone chain) give areas and perimeters directly.

# %%
pts = np.random.default_rng(0).random((10_000, 2))
P = cg.hull_2d(pts)
print(f"\nhull of 10^4 uniform points: {len(P.vertices)} vertices, area {cg.polygon_area(P):.5f}, "
      f"perimeter {cg.polygon_perimeter(P):.5f}")

# %% [markdown]
# Sphere quadratures: weights sum to the sphere area d kappa_d.

# %%
fib = cg.sphere_quadrature(3, 10_000, "fibonacci")
print(f"\nsum of weights = {fib.weights.sum():.10f}, 3 kappa_3 = {cg.sphere_area(3):.10f}")
print(f"int max(0, u_1) dsigma = {fib.integrate(lambda U: np.maximum(0, U[:, 0])):.6f}  (pi = {math.pi:.6f})")

# %% [markdown]
# Mixed volumes with ball slots integrate the support function of the
# last body; with polytope slots they are finite facet sums.

# %%
square = cg.Polytope.box([1.0, 1.0], lower=[0.0, 0.0])
disk = cg.EuclideanBall(1.0, 2)
q2 = cg.sphere_quadrature(2, 4096, "equiangular")
print(f"\nV(disk, square) by quadrature = {cg.mixed_volume_ball_slots(square, 2, 1.0, q2):.8f}")
print(f"V(square, disk) by facet sum  = {cg.mixed_volume_polytope_slots(square, disk):.8f}")
cube = cg.Polytope.cube(1.0, 3)
print(f"V(cube, cube, B^3)            = {cg.mixed_volume_polytope_slots(cube, cg.EuclideanBall(1.0, 3)):.8f}")
print(f"V_1(square)                   = {cg.intrinsic_volume_1(square, 2, q2):.8f}  (half perimeter)")
