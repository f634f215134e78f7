# %% [markdown]
# # Exact infidelity and strong-coupling plateaus
#
# The noisy gate is exp(S + gamma_t L), and its average gate infidelity is
# a trace formula. As the coupling grows the infidelity settles on a
# plateau that depends on the gate, but always lies between
# 1 - 2/(d+1) (identity) and 1 - 1/(d+1) (shift gate X).

# %%
import numpy as np

from qudit_agi import GateSpec, NoiseSpec, plateau_bounds, strong_coupling_limit, sweep_agi
from qudit_agi.channel import agf_exact, agf_montecarlo, propagate

d = 4
noise = NoiseSpec("jz", d)
for name in ("identity", "x", "qft", "xpow:0.5"):
    curve = sweep_agi(GateSpec.parse(name, d), noise)
    print(f"{name:>9}: plateau {curve.plateau:.6f}  shape {curve.classification.value:<10}"
          f" saturation {curve.saturation:.4g}")
print("bounds (min, mean, max):", np.round(plateau_bounds(d), 6))

# %% [markdown]
# The plateau is also available directly, without a sweep, from the
# projection onto the kernel of the dissipator.

# %%
print("QFT limit:", strong_coupling_limit(GateSpec("qft", d), noise))

# %% [markdown]
# The trace formula agrees with a brute-force average over random pure
# states.

# %%
ch = propagate(GateSpec("haar", d, seed=1), NoiseSpec("jm", d), 0.7)
mean, err = agf_montecarlo(ch, 50_000, seed=2)
print(f"exact {agf_exact(ch):.6f}  Monte Carlo {mean:.6f} +- {err:.6f}")
