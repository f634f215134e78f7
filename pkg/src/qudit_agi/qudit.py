"""Qudit gates, collapse operators and their Liouville-space superoperators.

Superoperators act on column-stacked density matrices (see
:mod:`qudit_agi.densemath`)::

    super_unitary(U)     = conj(U) ⊗ U                         rho -> U rho U†
    super_hamiltonian(H) = -i (1 ⊗ H - H^T ⊗ 1)                rho -> -i[H, rho]
    super_lindblad(L)    = conj(L) ⊗ L - (1 ⊗ L†L + (L†L)^T ⊗ 1) / 2

The dissipator is written for a general (complex) jump operator. For the
three built-in collapse operators, which are real matrices, it coincides
with the form ``L ⊗ L - ...`` that one often sees quoted.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .densemath import as_matrix, is_unitary, matrix_power_unitary, unitary_log

__all__ = [
    "GateKind",
    "NoiseKind",
    "GateSpec",
    "NoiseSpec",
    "build_gate",
    "haar_random_unitary",
    "build_collapse",
    "control_hamiltonian",
    "super_unitary",
    "super_hamiltonian",
    "super_lindblad",
]


class GateKind(enum.Enum):
    IDENTITY = "identity"
    SHIFT_X = "x"
    CLOCK_Z = "z"
    QFT = "qft"
    PHASE = "phase"
    T_GATE = "t"
    X_POWER = "xpow"
    Z_POWER = "zpow"
    HAAR = "haar"


class NoiseKind(enum.Enum):
    DEPHASING_JZ = "jz"
    BITFLIP_JX = "jx"
    RELAXATION_JM = "jm"


_NEEDS_PHI = {GateKind.PHASE}
_NEEDS_ETA = {GateKind.X_POWER, GateKind.Z_POWER}


@dataclass(frozen=True)
class GateSpec:
    """Description of a target gate on a ``dim``-level system.

    Parameters
    ----------
    kind : GateKind
    dim : int
        Qudit dimension, at least 2 (1 is allowed for Haar sampling).
    phi : float, optional
        Phase step for ``PHASE``, giving ``diag(exp(1j*j*phi))``.
    eta : float, optional
        Exponent in ``[0, 1]`` for ``X_POWER`` and ``Z_POWER``.
    seed : int or sequence of int, optional
        Seed for ``HAAR``. A sequence such as ``(base_seed, index)`` gives
        independent members of an ensemble.
    """

    kind: GateKind
    dim: int
    phi: float | None = None
    eta: float | None = None
    seed: int | tuple[int, ...] | None = None

    def __post_init__(self):
        if not isinstance(self.kind, GateKind):
            object.__setattr__(self, "kind", GateKind(self.kind))
        min_dim = 1 if self.kind is GateKind.HAAR else 2
        if int(self.dim) != self.dim or self.dim < min_dim:
            raise ValueError(f"dimension must be an integer >= {min_dim}, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if self.kind in _NEEDS_PHI and self.phi is None:
            raise ValueError(f"{self.kind.value} gate needs phi")
        if self.kind in _NEEDS_ETA:
            if self.eta is None:
                raise ValueError(f"{self.kind.value} gate needs eta")
            if not 0.0 <= self.eta <= 1.0:
                raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.kind is GateKind.HAAR:
            if self.seed is None:
                raise ValueError("haar gate needs a seed")
            if not isinstance(self.seed, int):
                object.__setattr__(self, "seed", tuple(int(s) for s in self.seed))

    @property
    def label(self) -> str:
        """Short text form, also accepted by :meth:`parse`."""
        k = self.kind
        if k in _NEEDS_PHI:
            return f"{k.value}:{self.phi:.17g}"
        if k in _NEEDS_ETA:
            return f"{k.value}:{self.eta:.17g}"
        if k is GateKind.HAAR:
            seed = self.seed if isinstance(self.seed, int) else "-".join(map(str, self.seed))
            return f"haar:{seed}"
        return k.value

    @classmethod
    def parse(cls, text: str, dim: int) -> "GateSpec":
        """Build a spec from ``name[:param]``.

        Names are ``identity``, ``x``, ``z``, ``qft``, ``t``, ``phase:PHI``,
        ``xpow:ETA``, ``zpow:ETA`` and ``haar:SEED`` (or ``haar:SEED-INDEX``).
        """
        name, _, arg = text.strip().lower().partition(":")
        try:
            kind = GateKind(name)
        except ValueError:
            raise ValueError(f"unknown gate '{text}'") from None
        if kind in _NEEDS_PHI or kind in _NEEDS_ETA:
            if not arg:
                raise ValueError(f"gate '{name}' needs a parameter, e.g. {name}:0.5")
            value = float(arg)
            return cls(kind, dim, phi=value) if kind in _NEEDS_PHI else cls(kind, dim, eta=value)
        if kind is GateKind.HAAR:
            if not arg:
                raise ValueError("haar gate needs a seed, e.g. haar:7")
            parts = tuple(int(p) for p in arg.split("-"))
            return cls(kind, dim, seed=parts[0] if len(parts) == 1 else parts)
        if arg:
            raise ValueError(f"gate '{name}' takes no parameter")
        return cls(kind, dim)


@dataclass(frozen=True)
class NoiseSpec:
    """Collapse operator choice for a ``dim``-level system.

    ``gamma`` is the rate. Routines that take an explicit ``gamma_t``
    (the dimensionless coupling) ignore it.
    """

    kind: NoiseKind
    dim: int
    gamma: float = field(default=1.0)

    def __post_init__(self):
        if not isinstance(self.kind, NoiseKind):
            object.__setattr__(self, "kind", NoiseKind(self.kind))
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma}")

    @property
    def label(self) -> str:
        return self.kind.value


def haar_random_unitary(d: int, seed: int | Sequence[int] | None = None) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Ginibre matrix.

    The phases of ``diag(R)`` are divided out of ``Q``; without this step
    the result is not Haar distributed (Mezzadri 2007).
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def build_gate(spec: GateSpec) -> np.ndarray:
    """Unitary matrix for ``spec``.

    ``SHIFT_X`` maps ``|j>`` to ``|j+1 mod d>``; ``CLOCK_Z`` is
    ``diag(omega**j)`` with ``omega = exp(2 pi i / d)``; ``QFT`` has entries
    ``omega**(j k) / sqrt(d)``; ``T_GATE`` is ``diag(exp(i pi j / 8))``,
    which is ``PHASE`` with ``phi = pi / 8``.
    """
    d = spec.dim
    j = np.arange(d)
    omega = np.exp(2j * np.pi / d)
    k = spec.kind
    if k is GateKind.IDENTITY:
        return np.eye(d, dtype=complex)
    if k is GateKind.SHIFT_X:
        return np.roll(np.eye(d, dtype=complex), 1, axis=0)
    if k is GateKind.CLOCK_Z:
        return np.diag(omega**j)
    if k is GateKind.QFT:
        return omega ** np.outer(j, j) / np.sqrt(d)
    if k is GateKind.PHASE:
        return np.diag(np.exp(1j * j * spec.phi))
    if k is GateKind.T_GATE:
        return np.diag(np.exp(1j * np.pi * j / 8.0))
    if k is GateKind.X_POWER:
        return matrix_power_unitary(build_gate(GateSpec(GateKind.SHIFT_X, d)), spec.eta)
    if k is GateKind.Z_POWER:
        return matrix_power_unitary(build_gate(GateSpec(GateKind.CLOCK_Z, d)), spec.eta)
    if k is GateKind.HAAR:
        return haar_random_unitary(d, spec.seed)
    raise ValueError(f"unsupported gate kind {k}")  # pragma: no cover


def _jz(d: int) -> np.ndarray:
    j = np.arange(1, d + 1)
    return np.diag((d + 1 - 2 * j) / 2.0).astype(complex)


def _jminus(d: int) -> np.ndarray:
    j = np.arange(1, d)
    return np.diag(np.sqrt(j * (d - j)), -1).astype(complex)


def build_collapse(spec: NoiseSpec) -> np.ndarray:
    """Spin-``(d-1)/2`` collapse operator for ``spec`` (without the rate).

    ``Jz`` is diagonal with entries ``(d+1-2j)/2``, ``J-`` lowers
    ``|j> -> |j+1>`` with amplitude ``sqrt(j (d-j))`` and ``Jx`` is
    ``(J+ + J-)/2``.
    """
    d = spec.dim
    if spec.kind is NoiseKind.DEPHASING_JZ:
        return _jz(d)
    jm = _jminus(d)
    if spec.kind is NoiseKind.RELAXATION_JM:
        return jm
    return 0.5 * (jm + jm.conj().T)


def control_hamiltonian(u: np.ndarray) -> np.ndarray:
    """Generator ``H`` with ``expm(-1j * H) == u`` on the principal branch.

    The spectrum of ``H`` lies in ``[-pi, pi)``.
    """
    return unitary_log(u)


def super_unitary(u: np.ndarray) -> np.ndarray:
    """Liouville representation ``conj(U) ⊗ U`` of ``rho -> U rho U†``."""
    u = as_matrix(u, "u")
    if not is_unitary(u, 1e-8):
        raise ValueError("matrix is not unitary within tolerance")
    return np.kron(u.conj(), u)


def super_hamiltonian(h: np.ndarray) -> np.ndarray:
    """Liouville representation of ``rho -> -i [H, rho]``."""
    h = as_matrix(h, "h")
    if np.linalg.norm(h - h.conj().T) > 1e-10 * max(1.0, np.linalg.norm(h)):
        raise ValueError("matrix is not Hermitian")
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def super_lindblad(l: np.ndarray) -> np.ndarray:
    """Liouville representation of the dissipator of jump operator ``L``."""
    l = as_matrix(l, "l")
    eye = np.eye(l.shape[0])
    ll = l.conj().T @ l
    return np.kron(l.conj(), l) - 0.5 * (np.kron(eye, ll) + np.kron(ll.T, eye))
