"""Dense complex linear algebra used by every other module.

Conventions
-----------
Density matrices are vectorised by stacking columns, so that
``vec(A @ rho @ B) == kron(B.T, A) @ vec(rho)``. With numpy's row-major
storage this is ``rho.reshape(-1, order="F")``.

Logarithms and fractional powers of unitaries use the principal branch
for eigenphases, ``theta`` in ``(-pi, pi]``. An eigenphase that lands on
``-pi`` up to rounding is moved to ``+pi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, NumericRangeError

__all__ = [
    "SpectralDecomposition",
    "as_matrix",
    "dagger",
    "kron",
    "vec",
    "unvec",
    "expm",
    "is_unitary",
    "is_normal",
    "spectral_decompose_normal",
    "unitary_phases",
    "unitary_log",
    "matrix_power_unitary",
]

# Padé [13/13] coefficients and the 1-norm threshold below which no
# scaling is needed (Higham, SIAM J. Matrix Anal. Appl. 26, 2005).
_PADE13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
_THETA13 = 5.371920351148152
_MAX_SQUARINGS = 1000
_BRANCH_TIE_TOL = 1e-10


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigen-decomposition ``A = V diag(w) V^dagger`` of a normal matrix.

    Attributes
    ----------
    eigenvalues : ndarray, shape (n,)
    eigenvectors : ndarray, shape (n, n)
        Unitary matrix whose columns are the eigenvectors.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self, values: np.ndarray | None = None) -> np.ndarray:
        """Return ``V diag(values) V^dagger`` (the original matrix by default)."""
        w = self.eigenvalues if values is None else np.asarray(values)
        v = self.eigenvectors
        return (v * w) @ v.conj().T


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and convert ``a`` to a finite complex square matrix."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square 2-d array, got shape {m.shape}")
    if m.shape[0] == 0:
        raise ValueError(f"{name} must have dimension >= 1")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the last two axes."""
    return np.swapaxes(np.conj(a), -1, -2)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, shape ``(ma*mb, na*nb)``."""
    return np.kron(np.asarray(a), np.asarray(b))


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stacking vectorisation of a matrix (or a batch of matrices)."""
    rho = np.asarray(rho)
    if rho.ndim == 2:
        return rho.reshape(-1, order="F")
    # batch: (..., n, m) -> (..., n*m) with columns stacked
    return np.swapaxes(rho, -1, -2).reshape(*rho.shape[:-2], -1)


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec` for square matrices."""
    v = np.asarray(v)
    n = v.shape[-1]
    if d is None:
        d = int(round(np.sqrt(n)))
    if d * d != n:
        raise ValueError(f"length {n} is not a perfect square")
    if v.ndim == 1:
        return v.reshape(d, d, order="F")
    return np.swapaxes(v.reshape(*v.shape[:-1], d, d), -1, -2)


def _one_norm(a: np.ndarray) -> np.ndarray:
    return np.abs(a).sum(axis=-2).max(axis=-1)


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a [13/13] Padé approximant.

    Parameters
    ----------
    a : array_like, shape (..., n, n)
        One matrix or a stack of matrices. Each matrix in a stack gets its
        own scaling exponent, so a batch over very different norms (a sweep
        over coupling strength, say) is handled in a single call.

    Returns
    -------
    ndarray
        ``exp(a)`` with the same shape as ``a``.

    Notes
    -----
    Errors are small relative to ``max(1, ||exp(a)||)``, not to each
    entry. That is the right measure for propagators of norm about one,
    and it keeps conserved modes exact at very large scale. A result
    much smaller than one in norm (``exp(-20)`` say) only gets absolute
    accuracy near ``1e-16``.

    Raises
    ------
    ValueError
        If the trailing axes are not square or the input is not finite.
    NumericRangeError
        If the norm is too large to scale or the result overflows.
    """
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expm needs square trailing axes, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("expm input has non-finite entries")
    dtype = np.result_type(a.dtype, np.float64)
    a = a.astype(dtype, copy=False)
    n = a.shape[-1]
    single = a.ndim == 2
    batch = a.reshape(-1, n, n)

    norms = _one_norm(batch)
    with np.errstate(divide="ignore"):
        s = np.where(norms > _THETA13, np.ceil(np.log2(norms / _THETA13)), 0.0)
    s = s.astype(int)
    if s.size and s.max() > _MAX_SQUARINGS:
        raise NumericRangeError(f"matrix norm {norms.max():.3e} too large for expm")
    x = batch / np.ldexp(1.0, s)[:, None, None]

    b = _PADE13
    eye = np.broadcast_to(np.eye(n, dtype=dtype), x.shape)
    x2 = x @ x
    x4 = x2 @ x2
    x6 = x4 @ x2
    u = x @ (x6 @ (b[13] * x6 + b[11] * x4 + b[9] * x2) + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * eye)
    v = x6 @ (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * eye
    # Square X = R - I rather than R. exp(A/2^s) sits within ~2^-s of the
    # identity on slow modes, and squaring R directly would amplify its
    # rounding error by 2^s. X_0 = (V - U)^-1 (2U) carries full relative
    # accuracy, and (I + X)^2 - I = 2X + X^2 keeps it.
    xr = np.linalg.solve(v - u, 2.0 * u)
    for k in range(int(s.max()) if s.size else 0):
        active = s > k
        if active.all():
            xr = 2.0 * xr + xr @ xr
        else:
            xa = xr[active]
            xr[active] = 2.0 * xa + xa @ xa
    r = xr + np.eye(n, dtype=dtype)

    if not np.all(np.isfinite(r)):
        raise NumericRangeError("expm overflowed")
    return r[0] if single else r.reshape(a.shape)


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    """True if ``u^dagger u`` equals the identity within ``tol`` (Frobenius)."""
    u = np.asarray(u)
    n = u.shape[0]
    return bool(np.linalg.norm(u.conj().T @ u - np.eye(n)) <= tol * max(1.0, np.sqrt(n)))


def is_normal(a: np.ndarray, tol: float = 1e-8) -> bool:
    """True if ``a`` commutes with its adjoint up to a relative tolerance."""
    a = np.asarray(a)
    scale = max(np.linalg.norm(a) ** 2, 1.0)
    return bool(np.linalg.norm(a.conj().T @ a - a @ a.conj().T) <= tol * scale)


def spectral_decompose_normal(a: np.ndarray, tol: float = 1e-8) -> SpectralDecomposition:
    """Unitary eigen-decomposition of a normal matrix.

    The complex Schur form of a normal matrix is diagonal, so the Schur
    vectors are an orthonormal eigenbasis even when eigenvalues are
    degenerate. That is the property a general eigensolver does not
    guarantee.

    Raises
    ------
    ValueError
        If ``a`` is not square, not finite or not normal within ``tol``.
    ConvergenceError
        If the Schur factor is not diagonal to working accuracy.
    """
    a = as_matrix(a)
    if not is_normal(a, tol):
        raise ValueError("matrix is not normal")
    t, z = scipy.linalg.schur(a, output="complex")
    off = np.linalg.norm(t - np.diag(np.diag(t)))
    if off > 1e3 * tol * max(np.linalg.norm(a), 1.0):
        raise ConvergenceError(f"Schur factor not diagonal (off-diagonal norm {off:.2e})")
    return SpectralDecomposition(np.diag(t).copy(), z)


def unitary_phases(u: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigenphases in ``(-pi, pi]`` and the unitary eigenbasis of ``u``."""
    u = as_matrix(u, "u")
    if not is_unitary(u, tol):
        raise ValueError("matrix is not unitary within tolerance")
    dec = spectral_decompose_normal(u)
    theta = np.angle(dec.eigenvalues)
    theta = np.where(theta <= -np.pi + _BRANCH_TIE_TOL, theta + 2.0 * np.pi, theta)
    return theta, dec.eigenvectors


def unitary_log(u: np.ndarray) -> np.ndarray:
    """Hermitian ``H`` with ``expm(-1j * H) == u`` (principal branch).

    ``H = V diag(-theta) V^dagger`` where ``theta`` are the eigenphases of
    ``u`` in ``(-pi, pi]``.

    Examples
    --------
    >>> import numpy as np
    >>> np.round(unitary_log(np.diag([1, -1])).real, 12)
    array([[ 0.        ,  0.        ],
           [ 0.        , -3.14159265]])
    """
    theta, v = unitary_phases(u)
    h = (v * (-theta)) @ v.conj().T
    return 0.5 * (h + h.conj().T)


def matrix_power_unitary(u: np.ndarray, eta: float) -> np.ndarray:
    """Fractional power ``u**eta`` for ``eta`` in ``[0, 1]`` on the principal branch."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    u = as_matrix(u, "u")
    if eta == 0.0:
        if not is_unitary(u):
            raise ValueError("matrix is not unitary within tolerance")
        return np.eye(u.shape[0], dtype=complex)
    if eta == 1.0:
        if not is_unitary(u):
            raise ValueError("matrix is not unitary within tolerance")
        return u.copy()
    theta, v = unitary_phases(u)
    return (v * np.exp(1j * eta * theta)) @ v.conj().T
