# %% [markdown]
# # Cost of the two second-order routes
#
# The superoperator route diagonalises a d^2 x d^2 matrix, while the
# operator form only needs d x d traces. This script times both and
# checks they agree.

# %%
import time

from qudit_agi import GateSpec, NoiseSpec
from qudit_agi.perturbation import agi_second_order_operator_form, agi_series

for d in (2, 4, 8, 16):
    g, n = GateSpec("haar", d, seed=d), NoiseSpec("jz", d)
    t0 = time.perf_counter()
    sup = agi_series(g, n, 0.1, 2, cutoff=None).terms[1]
    t1 = time.perf_counter()
    op = agi_second_order_operator_form(g, n, 0.1, s_max=40)
    t2 = time.perf_counter()
    print(f"d={d:>2}: superoperator {sup:+.6e} ({t1 - t0:.3f}s)  operator {op:+.6e} ({t2 - t1:.3f}s)")

# %% [markdown]
# The same numbers come out of the command line, for example
#
#     python3 -m qudit_agi perturb --dim 2,4 --gate identity,qft --gamma-t 0:0.1
