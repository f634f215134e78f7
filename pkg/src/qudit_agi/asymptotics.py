"""Large-coupling behaviour of infidelity curves.

A sweep evaluates the exact infidelity on a log grid of ``gamma_t``. From
the curve we extract:

* the plateau ``I*``, the value the curve settles to;
* its shape, monotonic or with an overshoot above the plateau;
* the saturation point ``(gamma_t)*``, the largest coupling at which the
  curve is still ``epsilon`` away from ``I*``.

Under strong coupling the dissipator projects the dynamics onto its
kernel (quantum Zeno effect). The approach to the plateau is then
algebraic, ``I(gamma_t) - I* ~ C / gamma_t``, rather than exponential, so
grids must reach far past the point where the curve looks flat on a plot.
:func:`strong_coupling_limit` computes ``I*`` directly from the kernel of
the dissipator and is used to cross-check sweeps.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.optimize
from scipy.interpolate import CubicSpline

from .channel import _jump_frame, agf_from_superop, agi_curve_values
from .densemath import expm
from .errors import BracketError, ConvergenceError, FitError
from .qudit import GateSpec, NoiseSpec

__all__ = [
    "CurveShape",
    "Model",
    "AgiCurve",
    "FitResult",
    "log_grid",
    "default_grid",
    "plateau_bounds",
    "sweep_agi",
    "curve_from_values",
    "estimate_plateau",
    "classify_curve",
    "saturation_point",
    "strong_coupling_limit",
    "model_function",
    "fit_model",
]

DEFAULT_EPSILON = 1e-8
PLATEAU_TOL = 1e-9
OVERSHOOT_DELTA = 1e-6
TURN_TOL = 1e-12


class CurveShape(enum.Enum):
    MONOTONIC = "monotonic"
    OVERSHOOT = "overshoot"


class Model(enum.Enum):
    POWER_LAW = "powerlaw"
    SIGMOID = "sigmoid"
    EXPONENTIAL = "exponential"
    LINEAR = "linear"
    CONSTANT = "constant"


@dataclass(frozen=True)
class AgiCurve:
    """An exact infidelity curve and the quantities derived from it.

    ``plateau`` is ``None`` and ``converged`` false when the tail of the
    grid has not flattened. ``saturation`` is ``None`` when no root could
    be bracketed; ``classification`` is ``None`` when there is no plateau.
    ``ambiguous`` marks curves with more than one turning point.
    """

    grid: np.ndarray
    agi: np.ndarray
    plateau: float | None
    converged: bool
    classification: CurveShape | None
    overshoot_height: float
    saturation: float | None
    ambiguous: bool
    gate: GateSpec | None = None
    noise: NoiseSpec | None = None


@dataclass(frozen=True)
class FitResult:
    """Parameters and goodness of fit of a one-dimensional model."""

    model: Model
    params: np.ndarray
    r_squared: float
    residuals: np.ndarray
    n_iter: int
    message: str = ""

    def predict(self, x) -> np.ndarray:
        return model_function(self.model)(np.asarray(x, dtype=float), *self.params)

    def as_dict(self) -> dict:
        r = self.residuals
        return {
            "model": self.model.value,
            "params": [float(p) for p in self.params],
            "r_squared": float(self.r_squared),
            "residuals": {
                "n": int(r.size),
                "rms": float(np.sqrt(np.mean(r**2))) if r.size else 0.0,
                "max_abs": float(np.max(np.abs(r))) if r.size else 0.0,
            },
            "n_iter": int(self.n_iter),
            "message": self.message,
        }


# ---------------------------------------------------------------------------
# Grids and sweeps
# ---------------------------------------------------------------------------


def log_grid(lo: float, hi: float, points_per_decade: int = 25) -> np.ndarray:
    """Log-spaced grid from ``lo`` to ``hi`` inclusive."""
    if not (lo > 0 and hi > lo and np.isfinite(hi)):
        raise ValueError(f"need 0 < lo < hi, got {lo}, {hi}")
    if points_per_decade < 1:
        raise ValueError("points_per_decade must be >= 1")
    n = int(round(np.log10(hi / lo) * points_per_decade)) + 1
    return np.logspace(np.log10(lo), np.log10(hi), max(n, 2))


def default_grid() -> np.ndarray:
    """``1e-2`` to ``1e12`` at 25 points per decade.

    The upper end is far beyond where the curves look flat. It is needed
    because the tail decays only like ``1 / gamma_t``.
    """
    return log_grid(1e-2, 1e12, 25)


def plateau_bounds(d: int) -> tuple[float, float, float]:
    """Lowest, Haar-average and highest plateau under ``Jz`` dephasing.

    Strong dephasing leaves ``I* = 1 - (sum_k |U_kk|^2 + d) / (d (d + 1))``.
    Diagonal gates give the minimum ``1 - 2/(d + 1)``, gates with an empty
    diagonal the maximum ``1 - 1/(d + 1)``, and the Haar average of
    ``sum_k |U_kk|^2`` is 1, giving ``1 - 1/d``.

    Examples
    --------
    >>> plateau_bounds(4)
    (0.6, 0.75, 0.8)
    """
    if int(d) != d or d < 2:
        raise ValueError("d must be an integer >= 2")
    return 1.0 - 2.0 / (d + 1), 1.0 - 1.0 / d, 1.0 - 1.0 / (d + 1)


def estimate_plateau(agi: np.ndarray, tol: float = PLATEAU_TOL) -> tuple[float, bool]:
    """Last grid value, and whether the last three points agree within ``tol``."""
    agi = np.asarray(agi, dtype=float)
    if agi.size < 3:
        return float(agi[-1]), False
    tail = agi[-3:]
    return float(agi[-1]), bool(np.ptp(tail) <= tol)


def sweep_agi(gate: GateSpec, noise: NoiseSpec, grid=None, epsilon: float = DEFAULT_EPSILON,
              plateau_tol: float = PLATEAU_TOL, delta: float = OVERSHOOT_DELTA) -> AgiCurve:
    """Exact infidelity over ``grid`` with plateau, shape and saturation point.

    Parameters
    ----------
    grid : array_like, optional
        Strictly increasing positive couplings, at least 3 points. Defaults
        to :func:`default_grid`.
    epsilon : float
        Absolute distance from the plateau that defines saturation.
    plateau_tol : float
        The last three grid values must agree to this for the plateau to count.
    delta : float
        Relative overshoot threshold, see :func:`classify_curve`.

    Notes
    -----
    An unconverged tail is reported through ``converged=False`` (with a
    warning) and leaves the plateau, shape and saturation unset.
    """
    g = default_grid() if grid is None else np.asarray(grid, dtype=float)
    _check_grid(g)
    agi = agi_curve_values(gate, noise, g)
    return curve_from_values(g, agi, gate, noise, epsilon, plateau_tol, delta)


def _check_grid(g: np.ndarray) -> None:
    if g.ndim != 1 or g.size < 3:
        raise ValueError("grid needs at least 3 points")
    if not np.all(np.isfinite(g)) or np.any(g <= 0) or np.any(np.diff(g) <= 0):
        raise ValueError("grid must be positive, finite and strictly increasing")


def curve_from_values(grid, agi, gate: GateSpec | None = None, noise: NoiseSpec | None = None,
                      epsilon: float = DEFAULT_EPSILON, plateau_tol: float = PLATEAU_TOL,
                      delta: float = OVERSHOOT_DELTA) -> AgiCurve:
    """Build an :class:`AgiCurve` (plateau, shape, saturation) from sampled values."""
    g = np.asarray(grid, dtype=float)
    _check_grid(g)
    agi = np.asarray(agi, dtype=float)
    if agi.shape != g.shape:
        raise ValueError("grid and agi lengths differ")
    plateau, converged = estimate_plateau(agi, plateau_tol)
    if not converged:
        name = f" for {gate.label} (d={gate.dim})" if gate is not None else ""
        warnings.warn(f"infidelity not flat at the end of the grid{name}; extend the grid",
                      RuntimeWarning, stacklevel=3)
        return AgiCurve(g, agi, None, False, None, 0.0, None, False, gate, noise)
    shape, height, ambiguous = _classify(agi, plateau, delta)
    if ambiguous:
        warnings.warn("curve has extra turning points; flagged for review", RuntimeWarning, stacklevel=3)
    try:
        sat = _saturation(g, agi, plateau, epsilon)
    except BracketError:
        sat = None
    return AgiCurve(g, agi, plateau, True, shape, height, sat, ambiguous, gate, noise)


def _turning_points(agi: np.ndarray, tol: float = TURN_TOL) -> int:
    steps = np.diff(agi)
    signs = np.sign(steps[np.abs(steps) > tol])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def _classify(agi: np.ndarray, plateau: float, delta: float):
    peak = float(agi.max())
    turns = _turning_points(agi)
    if peak > plateau * (1.0 + delta):
        return CurveShape.OVERSHOOT, peak - plateau, turns > 1
    return CurveShape.MONOTONIC, 0.0, turns > 0 and peak > plateau + TURN_TOL


def classify_curve(curve: AgiCurve, delta: float = OVERSHOOT_DELTA) -> CurveShape:
    """Monotonic, or overshoot when ``max(agi) > plateau * (1 + delta)``.

    Curves with more turning points than their shape allows (none for
    monotonic, one peak for an overshoot) are still classified, but a
    warning is raised and ``curve.ambiguous`` is set by the constructors.

    Raises
    ------
    ValueError
        If the curve has no converged plateau.
    """
    if not curve.converged or curve.plateau is None:
        raise ValueError("curve has no converged plateau")
    shape, _, ambiguous = _classify(curve.agi, curve.plateau, delta)
    if ambiguous:
        warnings.warn("curve has extra turning points; flagged for review", RuntimeWarning, stacklevel=2)
    return shape


def saturation_point(curve: AgiCurve, epsilon: float = DEFAULT_EPSILON) -> float:
    """Largest coupling where ``|I - I*| = epsilon``.

    The curve is interpolated with a cubic spline in ``log10(gamma_t)`` and
    the root is refined by bisection inside the last grid interval where
    the distance to the plateau drops below ``epsilon``. Beyond the
    returned point the curve stays within ``epsilon`` of the plateau.

    Raises
    ------
    ValueError
        If the curve has no converged plateau.
    BracketError
        If the curve never leaves the ``epsilon`` band, or has not entered
        it by the end of the grid.
    """
    if not curve.converged or curve.plateau is None:
        raise ValueError("curve has no converged plateau")
    return _saturation(curve.grid, curve.agi, curve.plateau, epsilon)


def _saturation(grid, agi, plateau: float, epsilon: float, xtol: float = 1e-12) -> float:
    g = np.asarray(grid, dtype=float)
    y = np.asarray(agi, dtype=float) - plateau
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    outside = np.abs(y) >= epsilon
    if not outside.any():
        raise BracketError("curve stays within epsilon of the plateau on the whole grid")
    i = int(np.nonzero(outside)[0][-1])
    if i == g.size - 1:
        raise BracketError("curve is still more than epsilon from the plateau at the grid end")
    x = np.log10(g)
    spline = CubicSpline(x, y)
    f = lambda u: abs(float(spline(u))) - epsilon  # noqa: E731
    a, b = x[i], x[i + 1]
    if f(a) * f(b) > 0:
        raise BracketError("spline does not change sign in the bracketing interval")
    root = scipy.optimize.bisect(f, a, b, xtol=xtol)
    return float(10.0**root)


# ---------------------------------------------------------------------------
# Strong-coupling limit
# ---------------------------------------------------------------------------


def _kernel_projector(l: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Spectral projector onto the kernel of a dissipator, ``lim exp(tau L)``."""
    ev = np.linalg.eigvals(l)
    nonzero = ev[np.abs(ev) > 1e-9]
    if nonzero.size and np.any(nonzero.real > 1e-9):
        raise ValueError("dissipator has growing modes")
    if nonzero.size and np.any(np.abs(nonzero.real) < 1e-9):
        raise ConvergenceError("dissipator has undamped oscillating modes; no Zeno limit")
    gap = np.abs(nonzero.real).min() if nonzero.size else 1.0
    p = expm((60.0 / gap) * l)
    for _ in range(200):
        p2 = p @ p
        if np.abs(p2 - p).max() < tol:
            return p2
        p = p2
    raise ConvergenceError("kernel projector did not converge")


def strong_coupling_limit(gate: GateSpec, noise: NoiseSpec) -> float:
    """Plateau ``lim_{gamma_t -> inf} I(gamma_t)`` from the Zeno projection.

    With ``P0`` the projector onto the kernel of the dissipator, the
    channel tends to ``P0 expm(P0 S P0) P0``.
    """
    _, u, s, l = _jump_frame(gate, noise)
    p0 = _kernel_projector(l)
    e_inf = p0 @ expm(p0 @ s @ p0) @ p0
    return float(1.0 - agf_from_superop(e_inf, u))


# ---------------------------------------------------------------------------
# Curve fitting
# ---------------------------------------------------------------------------


def _power_law(x, alpha, beta, delta):
    base = np.maximum(x - beta, 1e-300)
    return alpha * base**delta


def _sigmoid(x, a, b, c):
    return a / (1.0 + np.exp(-b * (x - c)))


def _exponential(x, a, b):
    return a * np.exp(b * x)


def _linear(x, a, b):
    return a * x + b


def _constant(x, c):
    return np.full_like(np.asarray(x, dtype=float), c)


_MODELS = {
    Model.POWER_LAW: (_power_law, 3),
    Model.SIGMOID: (_sigmoid, 3),
    Model.EXPONENTIAL: (_exponential, 2),
    Model.LINEAR: (_linear, 2),
    Model.CONSTANT: (_constant, 1),
}


def model_function(model: Model):
    """The callable ``f(x, *params)`` for ``model``.

    ``POWER_LAW`` is ``alpha (x - beta)^delta``, ``SIGMOID`` is
    ``a / (1 + exp(-b (x - c)))``, ``EXPONENTIAL`` is ``a exp(b x)`` and
    ``LINEAR`` is ``a x + b``.
    """
    return _MODELS[Model(model)][0]


def _default_init(model: Model, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if model is Model.POWER_LAW:
        # (1, 0, -1) with alpha replaced by its least-squares value for delta=-1;
        # beta moves below the data when some x <= 0
        beta = 0.0 if x.min() > 0 else float(x.min()) - 1.0
        basis = 1.0 / (x - beta)
        alpha = float(basis @ y / (basis @ basis))
        return np.array([alpha, beta, -1.0])
    if model is Model.SIGMOID:
        span = float(x.max() - x.min()) or 1.0
        return np.array([float(y.max()), 4.0 / span, float(np.median(x))])
    if model is Model.EXPONENTIAL:
        pos = y > 0
        if pos.sum() >= 2:
            b, ln_a = np.polyfit(x[pos], np.log(y[pos]), 1)
            return np.array([np.exp(ln_a), b])
        return np.array([float(y[0]) or 1.0, 0.0])
    if model is Model.LINEAR:
        return np.polyfit(x, y, 1)
    return np.array([float(y.mean())])


def fit_model(xs, ys, model: Model | str, init=None, max_nfev: int = 20000) -> FitResult:
    """Least-squares fit by Levenberg-Marquardt.

    A data set whose relative variance is below ``1e-12`` is reported as
    ``Model.CONSTANT`` instead of being fitted, whatever ``model`` was asked.

    Raises
    ------
    ValueError
        For mismatched, too short or non-finite data.
    FitError
        If the optimiser does not converge or the Jacobian is singular.
    """
    model = Model(model)
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-d arrays of equal length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("data has non-finite values")
    scale = max(float(np.mean(y) ** 2), 1e-300)
    if model is Model.CONSTANT or np.var(y) / scale < 1e-12:
        c = float(np.mean(y))
        return FitResult(Model.CONSTANT, np.array([c]), 1.0, y - c, 0, "constant dataset")
    func, n_par = _MODELS[model]
    if x.size < n_par + 1:
        raise ValueError(f"{model.value} needs at least {n_par + 1} points")
    p0 = _default_init(model, x, y) if init is None else np.asarray(init, dtype=float)
    if p0.size != n_par:
        raise ValueError(f"{model.value} takes {n_par} parameters, got {p0.size}")

    def resid(p):
        with np.errstate(over="ignore", invalid="ignore"):
            r = func(x, *p) - y
        return np.where(np.isfinite(r), r, 1e300)

    try:
        sol = scipy.optimize.least_squares(resid, p0, method="lm", max_nfev=max_nfev,
                                           xtol=1e-15, ftol=1e-15, gtol=1e-15)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise FitError(f"least squares failed: {exc}") from exc
    if sol.status <= 0:
        raise FitError(f"no convergence: {sol.message}")
    jac = sol.jac
    if np.linalg.matrix_rank(jac) < n_par:
        raise FitError("singular Jacobian at the solution")
    if model is Model.POWER_LAW and np.any(x <= sol.x[1]):
        raise FitError(f"power-law shift beta={sol.x[1]:.4g} is not below every x")
    r = resid(sol.x)
    ss_res = float(r @ r)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return FitResult(model, sol.x, r2, r, int(sol.nfev), str(sol.message))
