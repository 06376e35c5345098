"""Stable sausages: hit-or-miss volumes and the small-time slope."""

# %%
from stablehull import EuclideanBall, StableSpec
from stablehull import sausage as S

# %% [markdown]
# For Brownian motion in R^3 the expected Wiener-sausage volume is known in
# closed form, which checks the hit-or-miss estimator.

# %%
bm3 = StableSpec(2.0, 3, "std-bm")
ball = EuclideanBall(1.0, 3)
req = S.SausageRequest(bm3, ball, t_grid=(0.2, 0.1, 0.05, 0.025), n=128, reps=200, M=4000, seed=1)
res = S.small_time_asymptotics(req)
print(" t       estimate            exact     rescaled (E - V(B)) / sqrt(t)")
for t, est, r in zip(res.t_grid, res.estimates, res.rescaled):
    e = est.extrapolated
    print(f"{t:6.3f}  {e.mean:7.4f} +- {e.half_width:.4f}  {S.spitzer_exact_3d(1.0, t):7.4f}   {r:7.3f}")
print(f"fitted slope {res.fitted_slope:.3f} +- {res.slope.half_width:.3f}, theory {res.theoretical_slope:.3f}; "
      f"coefficient of t {res.t_coefficient:.2f} (exact 2 pi = 6.28)")

# %% [markdown]
# For alpha < 2 the slope is d c_alpha V(B, ..., B, B_alpha'). The small
# times have to be smaller because the correction is of relative order
# t^(1 - 1/alpha).

# %%
spec = StableSpec(1.5, 2)
disk = EuclideanBall(1.0, 2)
req = S.SausageRequest(spec, disk, t_grid=(0.02, 0.01, 0.005, 0.0025), n=128, reps=600, M=3000, seed=2)
res = S.small_time_asymptotics(req)
print(f"\nalpha = 1.5, d = 2: fitted slope {res.fitted_slope:.3f} +- {res.slope.half_width:.3f}, "
      f"theory {res.theoretical_slope:.3f}")
