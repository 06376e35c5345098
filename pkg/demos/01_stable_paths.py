"""Symmetric stable variates and path skeletons.

Run with ``python3 demos/01_stable_paths.py``.
"""

# %%
import math

import numpy as np

from stablehull import SeedStream, StableSpec, sample_path_skeleton
from stablehull.stable_sim import coordinate_extremes, sas_variates

# %% [markdown]
# Unit variates have characteristic function exp(-|s|^alpha). At alpha = 2
# this is N(0, 2); below 2 the law has power tails with index alpha.

# %%
rng = SeedStream(2024).rng()
for alpha in (2.0, 1.7, 1.5, 1.2):
    x = sas_variates(alpha, 200_000, rng)
    q = np.quantile(np.abs(x), [0.5, 0.99, 0.9999])
    print(f"alpha={alpha:3.1f}  median|X|={q[0]:6.3f}  q99={q[1]:8.2f}  q9999={q[2]:10.1f}  "
          f"mean|X|={np.mean(np.abs(x)):6.3f}  (2 Gamma(1-1/a)/pi = {2 * math.gamma(1 - 1 / alpha) / math.pi:6.3f})")

# %% [markdown]
# A skeleton is the path on a uniform time grid; increments over a step of
# length t/n are exact: (t/n)^(1/alpha) times unit variates.

# %%
spec = StableSpec(1.2, d=2)
path = sample_path_skeleton(spec, t=1.0, n=1000, stream=SeedStream(7))
steps = np.linalg.norm(np.diff(path.points, axis=0), axis=1)
print("\nd=2, alpha=1.2 skeleton with n=1000")
print(f"  largest step / median step = {steps.max() / np.median(steps):.0f}")
print(f"  coordinate extremes: {coordinate_extremes(path)}")

# %% [markdown]
# Self-similarity: X(t) has the law of t^(1/alpha) X(1). Compare sup X_1
# over [0, 4] with 4^(1/alpha) sup X_1 over [0, 1].

# %%
spec1 = StableSpec(1.5)
a = [sample_path_skeleton(spec1, 4.0, 256, SeedStream(1, i)).points.max() for i in range(10_000)]
b = [sample_path_skeleton(spec1, 1.0, 256, SeedStream(2, i)).points.max() for i in range(10_000)]
print("\nmedian sup over [0,4]          :", round(float(np.median(a)), 4))
print("4^(2/3) * median sup over [0,1] :", round(float(4 ** (2 / 3) * np.median(b)), 4))

# %% [markdown]
# The two conventions differ by a factor sqrt(2) at alpha = 2.

# %%
for conv in ("paper", "std-bm"):
    s = StableSpec(2.0, 1, conv)
    ends = [sample_path_skeleton(s, 1.0, 1, SeedStream(3, i)).points[1, 0] for i in range(20_000)]
    print(f"{conv:7s} Var X(1) = {np.var(ends):.3f}")
