"""Exact noisy channels and their average gate fidelity.

The gate is driven by the constant control Hamiltonian ``H_c = i log U``
for unit time while the collapse operator acts with coupling ``gamma_t``::

    E(gamma_t) = expm(S + gamma_t * L),   S = super_hamiltonian(H_c),
                                          L = super_lindblad(J)

The average gate fidelity against the target ``U`` is::

    F = (Tr M + Tr M[1]) / (d (d + 1)),   M = super_unitary(U)^dagger E

where ``M[1]`` is ``M`` applied to the identity matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densemath import expm, is_normal, spectral_decompose_normal, unvec, vec
from .qudit import (
    GateSpec,
    NoiseSpec,
    build_collapse,
    build_gate,
    control_hamiltonian,
    super_hamiltonian,
    super_lindblad,
    super_unitary,
)

__all__ = [
    "QuantumChannel",
    "liouvillian_parts",
    "propagate",
    "propagate_many",
    "agf_from_superop",
    "agf_exact",
    "agi_exact",
    "agi_curve_values",
    "random_pure_states",
    "agf_montecarlo",
    "evolve_diagnostics",
]


@dataclass(frozen=True)
class QuantumChannel:
    """A noisy gate as a ``d^2 x d^2`` superoperator, plus its target."""

    superop: np.ndarray
    target: np.ndarray
    gamma_t: float
    gate: GateSpec | None = None
    noise: NoiseSpec | None = None

    @property
    def dim(self) -> int:
        return self.target.shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Apply the channel to one density matrix or a stack of them."""
        rho = np.asarray(rho)
        return unvec(vec(rho) @ self.superop.T, self.dim)


def _check_gamma_t(gamma_t) -> None:
    g = np.asarray(gamma_t, dtype=float)
    if not np.all(np.isfinite(g)) or np.any(g < 0):
        raise ValueError("gamma_t must be finite and >= 0")


def liouvillian_parts(gate: GateSpec, noise: NoiseSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(U, S, L)``: target unitary, control superoperator and dissipator."""
    if gate.dim != noise.dim:
        raise ValueError(f"gate dimension {gate.dim} != noise dimension {noise.dim}")
    u = build_gate(gate)
    s = super_hamiltonian(control_hamiltonian(u))
    l = super_lindblad(build_collapse(noise))
    return u, s, l


def _jump_frame(gate: GateSpec, noise: NoiseSpec):
    """``(R, U', S', L')`` in the eigenbasis ``R`` of a normal jump operator.

    In this frame the dissipator is diagonal with exact zeros on its
    kernel. Without that, rounding ``gamma_t * L`` perturbs the conserved
    modes by ``~ eps * gamma_t``, which swamps the ``1/gamma_t`` tail at
    large coupling. Non-normal jump operators are left in the
    computational basis.
    """
    if gate.dim != noise.dim:
        raise ValueError(f"gate dimension {gate.dim} != noise dimension {noise.dim}")
    u = build_gate(gate)
    h = control_hamiltonian(u)
    j = build_collapse(noise)
    d = gate.dim
    if np.count_nonzero(j - np.diag(np.diag(j))) == 0 or not is_normal(j, 1e-12):
        return np.eye(d), u, super_hamiltonian(h), super_lindblad(j)
    dec = spectral_decompose_normal(j)
    r = dec.eigenvectors
    uw = r.conj().T @ u @ r
    hw = r.conj().T @ h @ r
    hw = 0.5 * (hw + hw.conj().T)
    return r, uw, super_hamiltonian(hw), super_lindblad(np.diag(dec.eigenvalues))


def propagate(gate: GateSpec, noise: NoiseSpec, gamma_t: float) -> QuantumChannel:
    """Exact channel ``expm(S + gamma_t L)``.

    Examples
    --------
    >>> from qudit_agi.qudit import GateKind, NoiseKind
    >>> ch = propagate(GateSpec(GateKind.IDENTITY, 2), NoiseSpec(NoiseKind.DEPHASING_JZ, 2), 0.0)
    >>> bool(np.allclose(ch.superop, np.eye(4)))
    True
    """
    _check_gamma_t(gamma_t)
    r, _, s, l = _jump_frame(gate, noise)
    q = np.kron(r.conj(), r)
    e = q @ expm(s + gamma_t * l) @ q.conj().T
    return QuantumChannel(e, build_gate(gate), float(gamma_t), gate, noise)


def propagate_many(gate: GateSpec, noise: NoiseSpec, gamma_ts) -> tuple[np.ndarray, np.ndarray]:
    """Superoperators for a whole grid of couplings in one batched call.

    Returns
    -------
    superops : ndarray, shape (n, d^2, d^2)
    target : ndarray, shape (d, d)
    """
    g = np.atleast_1d(np.asarray(gamma_ts, dtype=float))
    _check_gamma_t(g)
    r, _, s, l = _jump_frame(gate, noise)
    q = np.kron(r.conj(), r)
    e = expm(s[None] + g[:, None, None] * l[None])
    return q @ e @ q.conj().T, build_gate(gate)


def agf_from_superop(superop: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Average gate fidelity of ``superop`` (or a stack) against ``target``."""
    target = np.asarray(target)
    d = target.shape[0]
    m = super_unitary(target).conj().T @ superop
    tr_m = np.einsum("...ii->...", m)
    diag_idx = np.arange(d) * (d + 1)
    # Tr M[1] picks the diagonal rows and diagonal columns of M
    tr_m1 = m[..., diag_idx[:, None], diag_idx[None, :]].sum(axis=(-1, -2))
    return ((tr_m + tr_m1) / (d * (d + 1))).real


def agf_exact(channel: QuantumChannel) -> float:
    """Average gate fidelity of a channel against its target, in ``[0, 1]``."""
    return float(agf_from_superop(channel.superop, channel.target))


def agi_exact(gate: GateSpec, noise: NoiseSpec, gamma_t: float) -> float:
    """Average gate infidelity ``1 - F`` of the exact channel."""
    return 1.0 - agf_exact(propagate(gate, noise, gamma_t))


def agi_curve_values(gate: GateSpec, noise: NoiseSpec, gamma_ts, chunk: int = 64) -> np.ndarray:
    """Exact infidelity on a grid of couplings, evaluated in batches."""
    g = np.atleast_1d(np.asarray(gamma_ts, dtype=float))
    _check_gamma_t(g)
    _, u, s, l = _jump_frame(gate, noise)
    out = np.empty(g.size)
    for start in range(0, g.size, chunk):
        gg = g[start : start + chunk]
        e = expm(s[None] + gg[:, None, None] * l[None])
        out[start : start + chunk] = 1.0 - agf_from_superop(e, u)
    return out


def random_pure_states(d: int, n: int, seed=None) -> np.ndarray:
    """``n`` Haar-random state vectors of length ``d``, as rows."""
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    return psi / np.linalg.norm(psi, axis=1, keepdims=True)


def _evolve_states(channel: QuantumChannel, psi: np.ndarray, chunk: int = 20000):
    d = channel.dim
    for start in range(0, psi.shape[0], chunk):
        p = psi[start : start + chunk]
        rho = p[:, :, None] * p[:, None, :].conj()
        out = unvec(vec(rho) @ channel.superop.T, d)
        yield p, out


def agf_montecarlo(channel: QuantumChannel, n_states: int, seed=None) -> tuple[float, float]:
    """Monte Carlo estimate of the average gate fidelity.

    Averages ``<psi| U† E(|psi><psi|) U |psi>`` over Haar-random pure
    states.

    Returns
    -------
    mean, stderr : float
    """
    if n_states < 2:
        raise ValueError("n_states must be >= 2")
    psi = random_pure_states(channel.dim, n_states, seed)
    u = channel.target
    vals = []
    for p, rho in _evolve_states(channel, psi):
        phi = p @ u.T  # rows are U|psi>
        vals.append(np.einsum("ni,nij,nj->n", phi.conj(), rho, phi).real)
    f = np.concatenate(vals)
    return float(f.mean()), float(f.std(ddof=1) / np.sqrt(n_states))


def evolve_diagnostics(channel: QuantumChannel, n_states: int, seed=None) -> tuple[float, float]:
    """Mean purity and mean off-diagonal magnitude of evolved random pure states.

    The coherence of one state is the mean of ``|rho_ij|`` over ``i != j``.
    """
    if n_states < 1:
        raise ValueError("n_states must be >= 1")
    d = channel.dim
    psi = random_pure_states(d, n_states, seed)
    off = ~np.eye(d, dtype=bool)
    pur, coh = [], []
    for _, rho in _evolve_states(channel, psi):
        pur.append(np.einsum("nij,nji->n", rho, rho).real)
        coh.append(np.abs(rho[:, off]).mean(axis=1))
    return float(np.concatenate(pur).mean()), float(np.concatenate(coh).mean())
