# %% [markdown]
# # Saturation points and power laws
#
# The saturation point is where the infidelity curve comes within
# epsilon of its plateau for good. For the interpolated gates X^eta it
# grows with d following alpha (d - beta)^delta.

# %%
import warnings

import numpy as np

from qudit_agi import GateSpec, Model, NoiseSpec, fit_model, sweep_agi

warnings.simplefilter("ignore", RuntimeWarning)
dims = np.arange(2, 9)
for eta in (0.5, 1.0):
    sat = np.array([sweep_agi(GateSpec("xpow", int(d), eta=eta), NoiseSpec("jz", int(d))).saturation for d in dims])
    fit = fit_model(dims.astype(float), sat, Model.POWER_LAW)
    a, b, c = fit.params
    print(f"eta={eta}: alpha={a:.4g} beta={b:.4g} delta={c:.4g}  R^2={fit.r_squared:.6f}")

# %% [markdown]
# The identity gate approaches its plateau as exp(-gamma_t / 2), so its
# saturation point only drifts logarithmically with d.

# %%
ident = [sweep_agi(GateSpec("identity", int(d)), NoiseSpec("jz", int(d))).saturation for d in dims]
print("identity saturation:", np.round(ident, 3))
