# %% [markdown]
# # Gates, jump operators and superoperators
#
# A qudit gate is a d x d unitary. Noise enters through a Lindblad jump
# operator, and both act on vectorised density matrices as d^2 x d^2
# superoperators. This script builds the standard gate set and checks the
# algebra that everything else relies on.

# %%
import numpy as np

from qudit_agi import GateSpec, NoiseSpec
from qudit_agi.qudit import build_collapse, build_gate, control_hamiltonian
from qudit_agi.densemath import unvec, vec
from qudit_agi.qudit import super_hamiltonian, super_lindblad, super_unitary

d = 3
x, z, f = (build_gate(GateSpec(name, d)) for name in ("x", "z", "qft"))
w = np.exp(2j * np.pi / d)
print("Z X = w X Z:", np.allclose(z @ x, w * x @ z))
print("X = F^dagger Z F:", np.allclose(x, f.conj().T @ z @ f))

# %% [markdown]
# Gates are generated by a Hamiltonian taken from the principal matrix
# logarithm, so that U = exp(-i H) with eigenvalues of H in [-pi, pi).

# %%
h = control_hamiltonian(x)
print("spectrum of H for X at d=3:", np.round(np.linalg.eigvalsh(h), 6))

# %% [markdown]
# The spin operators Jz, Jx and J- model dephasing, bit-flip and
# relaxation noise. The Lindblad superoperator is trace preserving,
# which shows up as vec(1)^dagger L = 0.

# %%
for noise in ("jz", "jx", "jm"):
    j = build_collapse(NoiseSpec(noise, d))
    lsup = super_lindblad(j)
    print(noise, "trace preserving:", np.allclose(vec(np.eye(d)).conj() @ lsup, 0))

# %%
rng = np.random.default_rng(0)
a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
rho = a @ a.conj().T
rho /= np.trace(rho)
print("U rho U^dagger via superoperator:",
      np.allclose(unvec(super_unitary(f) @ vec(rho)), f @ rho @ f.conj().T))
print("-i[H, rho] via superoperator:",
      np.allclose(unvec(super_hamiltonian(h) @ vec(rho)), -1j * (h @ rho - rho @ h)))
