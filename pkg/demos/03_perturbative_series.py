# %% [markdown]
# # Perturbative series in the coupling
#
# For weak noise the infidelity is a power series in gamma_t. The first
# order does not depend on the gate at all; for dephasing it is
# d(d-1) gamma_t / 12. Gate dependence enters at second order through
# traces of iterated commutators [(S)^s, L].

# %%
import numpy as np

from qudit_agi import GateSpec, NoiseSpec, agi_exact, agi_first_order, agi_series
from qudit_agi.perturbation import agi_second_order, agi_second_order_operator_form, gate_independent_agi

gate, noise = GateSpec("qft", 4), NoiseSpec("jz", 4)
gt = 0.1
exact = agi_exact(gate, noise, gt)
series = agi_series(gate, noise, gt, 4, cutoff=None)
print("first order:", agi_first_order(noise, gt))
for m, ps in enumerate(series.partial_sums, start=1):
    print(f"through order {m}: {ps:.10f}   residual {abs(exact - ps):.3e}")

# %% [markdown]
# The second-order term can be computed two ways: from superoperator
# commutator traces cut off at s_epsilon, or from d x d operator traces.

# %%
value, report = agi_second_order(gate, noise, gt)
print("second order (superoperator):", value, " s_epsilon =", report.s_epsilon)
print("second order (operator form):", agi_second_order_operator_form(gate, noise, gt))

# %% [markdown]
# Keeping every gate-independent term resums the series exactly for
# the identity gate.

# %%
ident = GateSpec("identity", 4)
print("identity exact vs resummed:", agi_exact(ident, noise, gt), gate_independent_agi(noise, gt))
