"""Perturbative expansion of the infidelity in the coupling ``gamma_t``.

Writing the noisy channel in the interaction picture of the control,
``E = U_sup (1 + sum_m gamma_t^m M^(m))`` with ``U_sup = expm(S t)``, the
infidelity splits order by order::

    I = sum_m I^(m),   I^(m) = -gamma_t^m Tr M^(m) / (d (d + 1))

(the ``M[1]`` part of the fidelity does not contribute because every
``M^(m)`` is trace annihilating). ``M^(m)`` is an ``m``-fold nested integral
of interaction-picture dissipators. Expanding each exponential gives
nested sums over iterated commutators ``[(S)^n, L]`` weighted by
``(-t)^n / n!`` and by the reciprocal of the partial sums of
``(n_j + 1)``.

All commutator work is done in the eigenbasis of ``S``. If
``H = W diag(w) W^dagger`` then ``S`` is diagonal in the basis
``Q = conj(W) ⊗ W`` with eigenvalues ``-i (w_a - w_b)``, and an iterated
commutator is a Hadamard product::

    [(S)^n, L] = Q ((lam_p - lam_q)^n * Lq) Q^dagger,   Lq = Q^dagger L Q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import factorial

from .densemath import spectral_decompose_normal
from .errors import ConvergenceError, TruncationError
from .qudit import (
    GateSpec,
    NoiseSpec,
    build_collapse,
    build_gate,
    control_hamiltonian,
    super_lindblad,
)

__all__ = [
    "ConvergenceReport",
    "PerturbationSeries",
    "iterated_commutator",
    "trace_lindblad_power",
    "gate_independent_agi",
    "agi_first_order",
    "commutator_traces",
    "convergence_cutoff",
    "agi_second_order",
    "agi_second_order_operator_form",
    "m_order_superop",
    "series_traces",
    "agi_series",
]

DEFAULT_CUTOFF = 40
DEFAULT_TAIL_TOL = 1e-8


@dataclass(frozen=True)
class ConvergenceReport:
    """Where the gate-dependent second-order series was cut.

    Attributes
    ----------
    s_epsilon : int
        Smallest even ``s >= 2`` with ``|f(s) - f(s - 2)| < epsilon``. The
        gate-dependent series starts at ``s = 2``; its ``s = 0`` entry is
        taken as zero, since the ``s = 0`` trace is the gate-independent
        ``Tr(L^2)/2`` and is handled separately.
    epsilon : float
    orders : ndarray
        Even orders ``2, 4, ..., s_epsilon``.
    term_values : ndarray
        ``f(s)`` for each order, already weighted by ``(-t)^s / (s+2)!``.
    gate : GateSpec
    t : float
    """

    s_epsilon: int
    epsilon: float
    orders: np.ndarray
    term_values: np.ndarray
    gate: GateSpec
    t: float


@dataclass(frozen=True)
class PerturbationSeries:
    """Order-by-order infidelity at one coupling.

    ``terms[m-1]`` is ``I^(m)`` and ``partial_sums[m-1]`` is
    ``I^(1) + ... + I^(m)``. ``cutoff`` is the cap on every expansion index
    and ``tail_bound`` the bound on the neglected part of each exponential
    series at that cap.
    """

    order: int
    gamma_t: float
    terms: np.ndarray
    partial_sums: np.ndarray
    cutoff: int
    tail_bound: float
    converged: np.ndarray = field(repr=False)


# ---------------------------------------------------------------------------
# Small helpers
# ---------------------------------------------------------------------------


def _check_finite_nonneg(name: str, x: float) -> None:
    if not (np.isfinite(x) and x >= 0):
        raise ValueError(f"{name} must be finite and >= 0, got {x}")


def _hamiltonian(gate: GateSpec, t: float, rescale_control: bool) -> np.ndarray:
    h = control_hamiltonian(build_gate(gate))
    return h / t if rescale_control else h


def _liouville_eigenbasis(h: np.ndarray, l_sup: np.ndarray):
    """Eigenvalues of ``super_hamiltonian(h)``, the basis ``Q`` and ``Q^dagger L Q``."""
    dec = spectral_decompose_normal(h)
    w = dec.eigenvalues.real
    d = h.shape[0]
    a = np.tile(np.arange(d), d)  # inner index of the kron product
    b = np.repeat(np.arange(d), d)  # outer index
    lam = -1j * (w[a] - w[b])
    q = np.kron(dec.eigenvectors.conj(), dec.eigenvectors)
    lq = q.conj().T @ l_sup @ q
    return lam, q, lq


def iterated_commutator(x: np.ndarray, y: np.ndarray, n: int, method: str = "recursive") -> np.ndarray:
    """``[(X)^n, Y]``, the ``n``-fold commutator ``[X, [X, ... [X, Y]]]``.

    ``method="recursive"`` iterates ``C_k = X C_{k-1} - C_{k-1} X`` from
    ``C_0 = Y``. ``method="binomial"`` evaluates
    ``sum_k (-1)^k C(n, k) X^(n-k) Y X^k``.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.ndim != 2 or x.shape[0] != x.shape[1] or x.shape != y.shape:
        raise ValueError(f"need square matrices of equal shape, got {x.shape} and {y.shape}")
    if n < 0:
        raise ValueError("n must be >= 0")
    if method == "recursive":
        c = y
        for _ in range(n):
            c = x @ c - c @ x
        return c
    if method != "binomial":
        raise ValueError(f"unknown method '{method}'")
    powers = [np.eye(x.shape[0], dtype=complex)]
    for _ in range(n):
        powers.append(powers[-1] @ x)
    out = np.zeros_like(y)
    for k in range(n + 1):
        out += (-1) ** k * math.comb(n, k) * powers[n - k] @ y @ powers[k]
    return out


def _check_dim(noise: NoiseSpec, d: int | None) -> int:
    if d is not None and d != noise.dim:
        raise ValueError(f"d={d} does not match noise dimension {noise.dim}")
    return noise.dim


# ---------------------------------------------------------------------------
# Gate-independent parts
# ---------------------------------------------------------------------------


def trace_lindblad_power(noise: NoiseSpec, m: int, route: str = "superop") -> float:
    """``Tr(L^m)`` for the dissipator ``L`` of ``noise``.

    Parameters
    ----------
    route : {"superop", "multinomial"}
        ``"superop"`` forms the ``d^2 x d^2`` matrix power directly.
        ``"multinomial"`` expands ``(A - B/2 - C/2)^m`` for the commuting
        pieces ``A = L ⊗ L``, ``B = 1 ⊗ L^2``, ``C = L^2 ⊗ 1`` and only needs
        traces of powers of the ``d x d`` jump operator; it is valid for real
        symmetric jump operators.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    j = build_collapse(noise)
    if route == "superop":
        return float(np.trace(np.linalg.matrix_power(super_lindblad(j), m)).real)
    if route != "multinomial":
        raise ValueError(f"unknown route '{route}'")
    if not np.allclose(j, j.conj().T) or not np.allclose(j.imag, 0):
        raise ValueError("multinomial route needs a real symmetric jump operator")
    j = j.real
    tr = [np.trace(np.linalg.matrix_power(j, k)) for k in range(2 * m + 1)]
    total = 0.0
    for k1 in range(m + 1):
        for k2 in range(m - k1 + 1):
            k3 = m - k1 - k2
            coef = math.factorial(m) / (math.factorial(k1) * math.factorial(k2) * math.factorial(k3))
            total += coef * tr[k1 + 2 * k2] * tr[k1 + 2 * k3] / (-2.0) ** (k2 + k3)
    return float(total)


def gate_independent_agi(noise: NoiseSpec, gamma_t: float, d: int | None = None) -> float:
    """``Tr(1 - expm(gamma_t L)) / (d (d + 1))``, the gate-independent infidelity."""
    from .densemath import expm

    _check_finite_nonneg("gamma_t", gamma_t)
    d = _check_dim(noise, d)
    l = super_lindblad(build_collapse(noise))
    return float((d * d - np.trace(expm(gamma_t * l)).real) / (d * (d + 1)))


def agi_first_order(noise: NoiseSpec, gamma_t: float, d: int | None = None) -> float:
    """First-order infidelity ``-gamma_t (|Tr J|^2 - d Tr J†J) / (d (d + 1))``.

    It does not depend on the gate. For ``Jz`` it is ``d (d - 1) gamma_t / 12``.
    """
    _check_finite_nonneg("gamma_t", gamma_t)
    d = _check_dim(noise, d)
    j = build_collapse(noise)
    val = abs(np.trace(j)) ** 2 - d * np.trace(j.conj().T @ j).real
    return float(-gamma_t * val / (d * (d + 1)))


# ---------------------------------------------------------------------------
# Second order
# ---------------------------------------------------------------------------


def commutator_traces(gate: GateSpec, noise: NoiseSpec, orders, t: float = 1.0,
                      rescale_control: bool = True) -> np.ndarray:
    """``Tr(L [(S)^s, L])`` for each ``s`` in ``orders`` (not yet weighted)."""
    h = _hamiltonian(gate, t, rescale_control)
    lam, _, lq = _liouville_eigenbasis(h, super_lindblad(build_collapse(noise)))
    diff = lam[:, None] - lam[None, :]
    prod = (lq * lq.T).ravel()  # Lq[q,p] Lq[p,q] laid out over (p, q)
    diff = diff.ravel()
    return np.array([np.sum(prod * diff**s) for s in orders]).real


def _weighted_terms(lam, lq, t, orders):
    diff = (lam[:, None] - lam[None, :]).ravel()
    prod = (lq * lq.T).ravel()
    out = []
    for s in orders:
        tr = np.sum(prod * diff**s).real
        out.append(tr * (-t) ** s / factorial(s + 2, exact=False))
    return np.array(out)


def convergence_cutoff(gate: GateSpec, noise: NoiseSpec, t: float = 1.0, epsilon: float = 1e-8,
                       max_iter: int = 200, rescale_control: bool = True) -> ConvergenceReport:
    """Order at which the gate-dependent second-order series has settled.

    The term of even order ``s`` is
    ``f(s) = Tr(L [(S)^s, L]) (-t)^s / (s + 2)!``; odd orders vanish.
    ``s_epsilon`` is the first even ``s >= 2`` with
    ``|f(s) - f(s - 2)| < epsilon``, counting ``f(0)`` as zero.

    Parameters
    ----------
    rescale_control : bool
        If true the control is ``H_c / t`` so that the gate is reached at
        time ``t``; the terms then do not depend on ``t`` at all. If false,
        ``H_c`` is held fixed and a longer ``t`` means a larger rotation.
    max_iter : int
        Cap on the number of even orders examined.

    Raises
    ------
    ConvergenceError
        If the criterion is not met within ``max_iter`` even orders.
    """
    if not (np.isfinite(t) and t > 0):
        raise ValueError(f"t must be finite and > 0, got {t}")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    h = _hamiltonian(gate, t, rescale_control)
    lam, _, lq = _liouville_eigenbasis(h, super_lindblad(build_collapse(noise)))
    orders, terms = [], []
    prev = 0.0
    for i in range(max_iter):
        s = 2 * (i + 1)
        f = _weighted_terms(lam, lq, t, [s])[0]
        orders.append(s)
        terms.append(f)
        if abs(f - prev) < epsilon:
            return ConvergenceReport(s, epsilon, np.array(orders), np.array(terms), gate, float(t))
        prev = f
    raise ConvergenceError(f"second-order series not settled to {epsilon} after {max_iter} terms")


def agi_second_order(gate: GateSpec, noise: NoiseSpec, gamma_t: float, t: float = 1.0,
                     epsilon: float = 1e-8, max_iter: int = 200,
                     rescale_control: bool = True) -> tuple[float, ConvergenceReport]:
    """Second-order infidelity ``I^(2)`` and the convergence report.

    ``I^(2) = -gamma_t^2 / (d (d + 1)) [Tr(L^2) / 2 + sum_{s even >= 2} f(s)]``
    with the sum cut at ``s_epsilon`` (see :func:`convergence_cutoff`).
    """
    _check_finite_nonneg("gamma_t", gamma_t)
    d = noise.dim
    rep = convergence_cutoff(gate, noise, t, epsilon, max_iter, rescale_control)
    l = super_lindblad(build_collapse(noise))
    tr_l2 = np.trace(l @ l).real
    gate_part = rep.term_values.sum()
    value = -(gamma_t**2) / (d * (d + 1)) * (0.5 * tr_l2 + gate_part)
    return float(value), rep


def agi_second_order_operator_form(gate: GateSpec, noise: NoiseSpec, gamma_t: float,
                                   t: float = 1.0, s_max: int = 50,
                                   rescale_control: bool = True) -> float:
    """Second-order infidelity from ``d x d`` traces only.

    The Liouville trace ``Tr(L [(S)^s, L])`` is expanded with the binomial
    theorem into products of two ``d x d`` traces of words in ``H``, ``J``
    and ``P = J^T conj(J)``. With ``c = C(s,k) C(k,j) C(s-k,l) (-1)^(s+k-j-l)``
    and ``i^s`` from the powers of ``-i`` in ``S``::

        Tr(L [(S)^s, L]) = i^s sum_{k,j,l} c * [  tr(J H^(k-j) J H^(s-k-l))* tr(J H^j J H^l)
                                                 + tr(P H^(s-j-l))* tr(P H^(j+l)) / 2
                                                 + tr(P H^(k-j) P H^(s-k-l))* tr(H^(j+l)) / 2
                                                 - tr(J H^(k-j) P H^(s-k-l))* tr(J H^(j+l))
                                                 - tr(P H^(k-j) J H^(s-k-l))* tr(J H^(j+l)) ]

    Only the real part survives for the real jump operators used here.
    Every trace is formed in the eigenbasis of ``H`` so that a word costs
    ``O(d^2)``.
    """
    _check_finite_nonneg("gamma_t", gamma_t)
    if s_max < 2:
        raise ValueError("s_max must be >= 2")
    d = noise.dim
    h = _hamiltonian(gate, t, rescale_control)
    j = build_collapse(noise)
    if not np.allclose(j.imag, 0):
        raise ValueError("operator form needs a real jump operator")
    dec = spectral_decompose_normal(h)
    w = dec.eigenvalues.real
    v = dec.eigenvectors
    jt = v.conj().T @ j @ v
    pt = v.conj().T @ (j.T @ j.conj()) @ v
    n = s_max + 1
    wp = w[None, :] ** np.arange(n)[:, None]  # wp[a, i] = w_i^a

    def word2(x, y):
        # T[a, b] = tr(X H^a Y H^b) = sum_{i,k} X_ik w_k^a Y_ki w_i^b
        return np.einsum("ik,ki,ak,bi->ab", x, y, wp, wp)

    def word1(x):
        return wp @ np.diag(x)  # tr(X H^a)

    t_jj = word2(jt, jt)
    t_pp = word2(pt, pt)
    t_jp = word2(jt, pt)
    t_pj = word2(pt, jt)
    t_p = word1(pt)
    t_j = word1(jt)
    t_1 = wp.sum(axis=1)

    l_sup = super_lindblad(j)
    total = 0.5 * np.trace(l_sup @ l_sup).real
    for s in range(2, s_max + 1, 2):
        acc = 0.0
        for k in range(s + 1):
            jj = np.arange(k + 1)[:, None]
            ll = np.arange(s - k + 1)[None, :]
            # float, not int64: the binomial products overflow 64 bits for s > 30
            c = (float(math.comb(s, k))
                 * np.array([math.comb(k, x) for x in range(k + 1)], dtype=float)[:, None]
                 * np.array([math.comb(s - k, y) for y in range(s - k + 1)], dtype=float)[None, :]
                 * (-1.0) ** (s + k - jj - ll))
            a1, b1 = k - jj, s - k - ll  # exponents inside the conjugated trace
            jl = jj + ll
            term = (np.conj(t_jj[a1, b1]) * t_jj[jj, ll]
                    + 0.5 * np.conj(t_p[s - jl]) * t_p[jl]
                    + 0.5 * np.conj(t_pp[a1, b1]) * t_1[jl]
                    - np.conj(t_jp[a1, b1]) * t_j[jl]
                    - np.conj(t_pj[a1, b1]) * t_j[jl])
            acc += np.sum(c * term.real)
        tr_s = (-1.0) ** (s // 2) * acc
        total += tr_s * (-t) ** s / factorial(s + 2, exact=False)
    return float(-(gamma_t**2) / (d * (d + 1)) * total)


# ---------------------------------------------------------------------------
# Arbitrary order
# ---------------------------------------------------------------------------


def _tail_bound(x: float, n: int) -> float:
    """Bound on ``sum_{k > n} x^k / k!`` relative to ``exp(x)``-free scale."""
    if x == 0:
        return 0.0
    log_term = (n + 1) * math.log(x) - math.lgamma(n + 2)
    ratio = x / (n + 2)
    if ratio >= 1:
        return math.inf
    return math.exp(log_term) / (1.0 - ratio)


def _auto_cutoff(x: float, tol: float) -> int:
    n = DEFAULT_CUTOFF
    while _tail_bound(x, n) > tol:
        n += 5
        if n > 2000:
            raise TruncationError("no cutoff below 2000 meets the tail tolerance")
    return n


def _m_order_eigenbasis(lam, lq, t: float, m: int, cutoff: int) -> np.ndarray:
    """``M^(m) / t^m`` expressed in the eigenbasis of ``S``."""
    diff = lam[:, None] - lam[None, :]
    c = [lq.astype(complex)]
    for n in range(1, cutoff + 1):
        c.append(c[-1] * (-t * diff) / n)
    # level[K] for the innermost factor: c_{K-1} / K
    level = {k: c[k - 1] / k for k in range(1, cutoff + 2)}
    for depth in range(m - 1, 0, -1):
        # this level holds (m - depth + 1) factors, so K >= m - depth + 1
        n_factors = m - depth + 1
        new = {}
        for k in range(n_factors, n_factors * (cutoff + 1) + 1):
            acc = None
            for n in range(0, min(cutoff, k - n_factors) + 1):
                inner = level.get(k - n - 1)
                if inner is None:
                    continue
                term = c[n] @ inner
                acc = term if acc is None else acc + term
            if acc is not None:
                new[k] = acc / k
        level = new
    return sum(level.values())


def m_order_superop(gate: GateSpec, noise: NoiseSpec, t: float, m: int,
                    cutoff: int | None = DEFAULT_CUTOFF, tail_tol: float = DEFAULT_TAIL_TOL,
                    rescale_control: bool = True) -> np.ndarray:
    """The ``m``-th order superoperator ``M^(m)`` (without ``gamma^m``).

    Each expansion index is capped at ``cutoff``. ``cutoff=None`` picks the
    smallest cap that meets ``tail_tol``.

    Raises
    ------
    TruncationError
        If the a-posteriori tail bound at the chosen cutoff exceeds ``tail_tol``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not (np.isfinite(t) and t > 0):
        raise ValueError(f"t must be finite and > 0, got {t}")
    h = _hamiltonian(gate, t, rescale_control)
    lam, q, lq = _liouville_eigenbasis(h, super_lindblad(build_collapse(noise)))
    x = t * float(np.abs(lam[:, None] - lam[None, :]).max())
    if cutoff is None:
        cutoff = _auto_cutoff(x, tail_tol)
    elif _tail_bound(x, cutoff) > tail_tol:
        raise TruncationError(
            f"cutoff {cutoff} too small: tail bound {_tail_bound(x, cutoff):.2e} > {tail_tol:.1e}"
        )
    mq = _m_order_eigenbasis(lam, lq, t, m, cutoff) * t**m
    return q @ mq @ q.conj().T


def series_traces(gate: GateSpec, noise: NoiseSpec, m_max: int, t: float = 1.0,
                  cutoff: int | None = DEFAULT_CUTOFF, tail_tol: float = DEFAULT_TAIL_TOL,
                  rescale_control: bool = True) -> tuple[np.ndarray, int, float]:
    """``Tr M^(m) / t^m`` for ``m = 1..m_max``, with the cutoff and tail bound used.

    These traces do not depend on the coupling, so a whole ``gamma_t`` grid
    costs one call: ``I^(m) = -gamma_t^m * traces[m-1] / (d (d + 1))``.
    """
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    if not (np.isfinite(t) and t > 0):
        raise ValueError(f"t must be finite and > 0, got {t}")
    h = _hamiltonian(gate, t, rescale_control)
    lam, _, lq = _liouville_eigenbasis(h, super_lindblad(build_collapse(noise)))
    x = t * float(np.abs(lam[:, None] - lam[None, :]).max())
    n_cut = _auto_cutoff(x, tail_tol) if cutoff is None else int(cutoff)
    if n_cut < 0:
        raise ValueError("cutoff must be >= 0")
    bound = _tail_bound(x, n_cut)
    if bound > tail_tol:
        raise TruncationError(f"cutoff {n_cut} too small: tail bound {bound:.2e} > {tail_tol:.1e}")
    traces = np.array([np.trace(_m_order_eigenbasis(lam, lq, t, m, n_cut)).real
                       for m in range(1, m_max + 1)])
    return traces, n_cut, bound


def agi_series(gate: GateSpec, noise: NoiseSpec, gamma_t: float, m_max: int, t: float = 1.0,
               cutoff: int | None = DEFAULT_CUTOFF, tail_tol: float = DEFAULT_TAIL_TOL,
               rescale_control: bool = True) -> PerturbationSeries:
    """Terms ``I^(m)`` and partial sums of the infidelity series up to ``m_max``.

    ``gamma_t`` is the rate times the gate time, the quantity that
    multiplies ``L`` in :func:`qudit_agi.channel.propagate` when ``t = 1``.
    ``cutoff=None`` chooses the smallest index cap meeting ``tail_tol``.

    Raises
    ------
    TruncationError
        If a fixed ``cutoff`` leaves a tail bound above ``tail_tol``.
    """
    _check_finite_nonneg("gamma_t", gamma_t)
    d = noise.dim
    traces, n_cut, bound = series_traces(gate, noise, m_max, t, cutoff, tail_tol, rescale_control)
    terms = -np.array([gamma_t**m * traces[m - 1] for m in range(1, m_max + 1)]) / (d * (d + 1))
    return PerturbationSeries(m_max, float(gamma_t), terms, np.cumsum(terms), n_cut, bound,
                              np.full(m_max, bound <= tail_tol))
