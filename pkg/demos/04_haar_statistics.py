# %% [markdown]
# # Haar-random gates
#
# Random gates are drawn from the circular unitary ensemble. Their
# eigenphases are uniform on the circle and the unfolded level spacings
# follow the Wigner surmise. The plateaus of random gates cluster around
# 1 - 1/d, more tightly as d grows.

# %%
import numpy as np

from qudit_agi import NoiseSpec
from qudit_agi.asymptotics import log_grid
from qudit_agi.haar_stats import (
    Histogram,
    kl_divergence,
    level_density_chi2,
    plateau_distribution,
    sample_cue_spectrum,
    unfold_spacings,
    wigner_surmise,
)

sample = sample_cue_spectrum(100, 100, seed=0)
chi2, p = level_density_chi2(sample)
hist = Histogram.from_values(unfold_spacings(sample), 50, (0.0, 4.0))
print(f"level density chi2 {chi2:.1f}, p = {p:.3f}")
print(f"KL(spacings || Wigner) = {kl_divergence(hist, wigner_surmise):.4f}")

# %% [markdown]
# A coarse grid keeps this quick; the full analysis uses 25 points per
# decade from 1e-2 to 1e12.

# %%
grid = log_grid(1e-2, 1e12, 10)
for d in (2, 4):
    dist = plateau_distribution(d, 200, NoiseSpec("jz", d), seed=3, grid=grid)
    print(f"d={d}: mean plateau {dist.mean:.4f}, std {dist.std:.4f}, "
          f"monotonic fraction {dist.monotonic_fraction:.3f}")
