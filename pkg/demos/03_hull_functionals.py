"""Expected hull functionals of stable processes at small replication counts.

Each estimate is run at n0, 2 n0 and 4 n0 grid points and extrapolated
to n = infinity. The full-size runs are in ``stablehull verify``.
"""

# %%
import math

from stablehull import EuclideanBall, Polytope, StableSpec
from stablehull import functionals as F


def show(label, est, target):
    raw = ", ".join(f"n={n}: {ci.mean:.4f}" for n, ci in est.raw)
    e = est.extrapolated
    print(f"{label:34s} {raw}  ->  {e.mean:.4f} +- {e.half_width:.4f}   target {target:.4f}")


# %% [markdown]
# Mean support in a fixed direction equals c_alpha ||u||_alpha.

# %%
bm1 = StableSpec(2.0, 1, "std-bm")
show("E h(Z, e1), standard BM", F.estimate_mean_support(bm1, [1.0], n0=128, reps=20_000), math.sqrt(2 / math.pi))
c15 = F.c_alpha_estimate(StableSpec(1.5), reps=100_000)
print(f"c_1.5 from exact draws: {c15.mean:.4f} +- {c15.half_width:.4f}, "
      f"closed-form candidate {F.c_alpha_closed_form(1.5):.4f}")

# %% [markdown]
# Mixed volumes of the hull: E V(K_1, ..., K_{d-1}, Z) = c_alpha V(K_1, ..., K_{d-1}, B_alpha').

# %%
spec = StableSpec(1.5, 2)
disk = [EuclideanBall(1.0, 2)]
show("E V(B^2, Z), alpha = 1.5", F.theorem1_lhs(spec, disk, n0=128, reps=4000), F.theorem1_rhs(spec, disk))
cube = Polytope.cube(1.0, 3)
spec3 = StableSpec(2.0, 3)
show("E V(C, C, Z), alpha = 2", F.theorem1_lhs(spec3, [cube, cube], n0=128, reps=4000),
     F.theorem1_rhs(spec3, [cube, cube]))

# %% [markdown]
# Intrinsic volumes of the Brownian hull.

# %%
for d in (2, 3):
    bm = StableSpec(2.0, d, "std-bm")
    show(f"E V_1(Z), d = {d}", F.estimate_V1(bm, n0=128, reps=3000, m=256), F.v1_brownian(d))
    show(f"E V_2(Z), d = {d}", F.estimate_V2_kubota(bm, n0=128, reps=3000), F.v2_brownian(d))

# %% [markdown]
# Spitzer's identity E sup X_1 = alpha E X_1(1)^+ and the scaling law.

# %%
sup, pos = F.spitzer_pair(StableSpec(1.5), n0=128, reps=20_000)
print(f"\nE sup X = {sup.mean:.4f} +- {sup.extrapolated.half_width:.4f}, "
      f"alpha E X^+ = {pos.mean:.4f} +- {pos.half_width:.4f}")
lhs, rhs = F.scaling_check(StableSpec(1.5, 2), 4.0, [1.0, 0.0], n=256, reps=5000)
print(f"E h(Z_4, e1) = {lhs.mean:.4f} +- {lhs.half_width:.4f},  4^(2/3) E h(Z_1, e1) = {rhs.mean:.4f} +- {rhs.half_width:.4f}")
