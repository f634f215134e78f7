"""Spectral checks of the Haar sampler and plateau statistics of gate ensembles.

Eigenphases of Haar (CUE) unitaries are uniform on the circle, and the
nearest-neighbour spacings, once unfolded to unit mean, follow the
Wigner surmise ``p(s) = (32 s^2 / pi^2) exp(-4 s^2 / pi)`` closely.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.stats

from .asymptotics import CurveShape, default_grid, plateau_bounds, sweep_agi
from .densemath import is_unitary
from .qudit import GateKind, GateSpec, NoiseSpec, haar_random_unitary

__all__ = [
    "SpectralSample",
    "Histogram",
    "PlateauDistribution",
    "eigenphases",
    "sample_cue_spectrum",
    "unfold_spacings",
    "wigner_surmise",
    "kl_divergence",
    "level_density_chi2",
    "sturges_bins",
    "plateau_distribution",
]


@dataclass(frozen=True)
class SpectralSample:
    """Eigenphases of ``n_matrices`` unitaries, shape ``(n_matrices, dim)``."""

    phases: np.ndarray
    dim: int
    n_matrices: int

    def __post_init__(self):
        if self.phases.shape != (self.n_matrices, self.dim):
            raise ValueError("phases must have shape (n_matrices, dim)")
        if np.any(self.phases < -np.pi) or np.any(self.phases >= np.pi):
            raise ValueError("phases must lie in [-pi, pi)")


@dataclass(frozen=True)
class Histogram:
    """Binned counts with a density normalised to unit area."""

    edges: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_values(cls, values, bins, value_range=None) -> "Histogram":
        counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins, range=value_range)
        return cls(edges, counts)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def normalized_density(self) -> np.ndarray:
        total = self.counts.sum()
        if total == 0:
            return np.zeros(self.counts.shape)
        return self.counts / (total * self.widths)

    def merge(self, other: "Histogram") -> "Histogram":
        """Sum of two histograms over identical bins."""
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different edges")
        return Histogram(self.edges, self.counts + other.counts)


@dataclass(frozen=True)
class PlateauDistribution:
    """Plateau statistics of a Haar gate ensemble.

    ``plateaus`` and ``shapes`` cover accepted gates only; ``rejected``
    lists the indices of gates whose sweep did not converge.
    """

    hist: Histogram
    mean: float
    std: float
    monotonic_fraction: float
    plateaus: np.ndarray
    shapes: tuple
    saturations: np.ndarray
    rejected: tuple
    dim: int


def eigenphases(u: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Eigenvalue arguments of a unitary in ``[-pi, pi)``, unsorted.

    An argument that rounds to ``+pi`` is reported as ``-pi``.
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("need a square matrix")
    if not is_unitary(u, tol):
        raise ValueError("matrix is not unitary within tolerance")
    theta = np.angle(np.linalg.eigvals(u))
    theta = np.where(theta >= np.pi - 1e-12, theta - 2.0 * np.pi, theta)
    return np.maximum(theta, -np.pi)


def sample_cue_spectrum(d: int, n_matrices: int, seed: int = 0) -> SpectralSample:
    """Eigenphases of ``n_matrices`` Haar unitaries; matrix ``i`` uses seed ``(seed, i)``."""
    if d < 1 or n_matrices < 1:
        raise ValueError("d and n_matrices must be >= 1")
    phases = np.array([eigenphases(haar_random_unitary(d, (seed, i))) for i in range(n_matrices)])
    return SpectralSample(phases, d, n_matrices)


def unfold_spacings(sample: SpectralSample) -> np.ndarray:
    """Nearest-neighbour spacings ``(d / 2 pi) (theta_{j+1} - theta_j)``, pooled.

    Each matrix contributes ``d - 1`` spacings of its sorted phases.
    """
    sorted_phases = np.sort(sample.phases, axis=1)
    return (sample.dim / (2.0 * np.pi) * np.diff(sorted_phases, axis=1)).ravel()


def wigner_surmise(s) -> np.ndarray:
    """Unitary-ensemble Wigner surmise ``(32 s^2 / pi^2) exp(-4 s^2 / pi)``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("s must be >= 0")
    return 32.0 * s**2 / np.pi**2 * np.exp(-4.0 * s**2 / np.pi)


def kl_divergence(p: Histogram, q_density: Callable[[np.ndarray], np.ndarray]) -> float:
    """``sum_i p_i ln(p_i / q_i) w_i`` over non-empty bins, ``q`` taken at bin centres.

    Returns ``inf`` if ``q`` vanishes on a bin where ``p`` does not.
    """
    dens = p.normalized_density
    q = np.asarray(q_density(p.centers), dtype=float)
    mask = dens > 0
    if np.any(q[mask] <= 0):
        return math.inf
    return float(np.sum(dens[mask] * np.log(dens[mask] / q[mask]) * p.widths[mask]))


def level_density_chi2(sample: SpectralSample, bins: int = 50) -> tuple[float, float]:
    """Pearson chi-square test of the pooled phases against the uniform density.

    Returns
    -------
    statistic, p_value : float
    """
    counts, _ = np.histogram(sample.phases.ravel(), bins=bins, range=(-np.pi, np.pi))
    res = scipy.stats.chisquare(counts)
    return float(res.statistic), float(res.pvalue)


def sturges_bins(n: int) -> int:
    """Sturges' rule, ``ceil(log2(n + 1))`` bins for ``n`` samples."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return int(math.ceil(math.log2(n + 1)))


def plateau_distribution(d: int, n_gates: int, noise: NoiseSpec, seed: int = 0, grid=None,
                         threads: int = 1, epsilon: float = 1e-8) -> PlateauDistribution:
    """Sweep ``n_gates`` Haar gates and collect plateaus and curve shapes.

    Gate ``i`` is ``HAAR`` with seed ``(seed, i)``, so the ensemble does
    not depend on ``threads``. The histogram spans the ``Jz`` plateau bounds
    with Sturges' rule for ``d = 2`` and 100 bins otherwise.
    """
    if n_gates < 100:
        raise ValueError("n_gates must be >= 100")
    if noise.dim != d:
        raise ValueError("noise dimension does not match d")
    g = default_grid() if grid is None else np.asarray(grid, dtype=float)

    def one(i: int):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return sweep_agi(GateSpec(GateKind.HAAR, d, seed=(seed, i)), noise, g, epsilon=epsilon)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            curves = list(pool.map(one, range(n_gates)))
    else:
        curves = [one(i) for i in range(n_gates)]

    ok = [c for c in curves if c.converged]
    rejected = tuple(i for i, c in enumerate(curves) if not c.converged)
    plateaus = np.array([c.plateau for c in ok])
    shapes = tuple(c.classification for c in ok)
    sats = np.array([np.nan if c.saturation is None else c.saturation for c in ok])
    lo, _, hi = plateau_bounds(d)
    bins = sturges_bins(len(ok)) if d == 2 else 100
    # rounding can put a plateau a few ulps outside the bounds; keep it in the edge bins
    hist = Histogram.from_values(np.clip(plateaus, lo, hi), bins, (lo, hi))
    mono = sum(s is CurveShape.MONOTONIC for s in shapes) / max(len(ok), 1)
    return PlateauDistribution(hist, float(plateaus.mean()), float(plateaus.std(ddof=1)),
                               float(mono), plateaus, shapes, sats, rejected, d)
