"""Gaussian mutation acting on a Gaussian fitness peak.

Closed forms for the equilibrium width and dominant eigenvalue of the
continuum operator ``(A phi)(x) = int q(x|y) f(y) phi(y) dy``, plus a grid
discretization used as an independent numerical check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NoConvergence
from .finite import FiniteModel, power_iteration

AGREEMENT_TOL = 1e-12
TIE_TOL = 1e-12


@dataclass(frozen=True)
class GaussianPeak:
    peak_height: float = 1.0
    landscape_variance: float = 1.0
    mutation_variance: float = 1.0
    dimension: int = 1
    center: tuple = field(default=())

    def __post_init__(self):
        if self.peak_height <= 0:
            raise ValueError("peak_height must be positive")
        if self.landscape_variance <= 0 or self.mutation_variance <= 0:
            raise ValueError("variances must be positive")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        center = tuple(float(c) for c in self.center) or (0.0,) * int(self.dimension)
        if len(center) != self.dimension:
            raise ValueError("center must have one coordinate per dimension")
        object.__setattr__(self, "center", center)

    @property
    def nu(self) -> float:
        """Mutation variance relative to landscape variance."""
        return self.mutation_variance / self.landscape_variance

    def fitness(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float).T).T if self.dimension > 1 else np.asarray(y, dtype=float)
        if self.dimension == 1:
            d2 = (y - self.center[0]) ** 2
        else:
            d2 = np.sum((y - np.asarray(self.center)) ** 2, axis=-1)
        return self.peak_height * np.exp(-d2 / (2 * self.landscape_variance))


class GaussianEquilibrium(NamedTuple):
    width: float
    eigenvalue: float


def equilibrium_width(peak: GaussianPeak) -> float:
    """Positive root ``c`` of ``c**2 - sigma2*c - sigma2*s2 = 0``."""
    sigma2, s2 = peak.mutation_variance, peak.landscape_variance
    return (sigma2 + math.sqrt(sigma2 * sigma2 + 4 * sigma2 * s2)) / 2


def _eigenvalue_from_width(peak: GaussianPeak, c: float) -> float:
    s2 = peak.landscape_variance
    return peak.peak_height * (s2 / (s2 + c)) ** (peak.dimension / 2)


def _eigenvalue_from_ratio(peak: GaussianPeak) -> float:
    nu = peak.nu
    return peak.peak_height * (2 / (2 + nu + math.sqrt(nu * nu + 4 * nu))) ** (peak.dimension / 2)


def peak_eigenvalue(peak: GaussianPeak) -> float:
    """Dominant eigenvalue ``f0 * (s2 / (s2 + c)) ** (d/2)``.

    Also evaluates the equivalent form written in terms of ``nu`` and fails
    loudly if the two disagree beyond 1e-12 relative.
    """
    lam = _eigenvalue_from_width(peak, equilibrium_width(peak))
    alt = _eigenvalue_from_ratio(peak)
    if abs(lam - alt) > AGREEMENT_TOL * max(abs(lam), abs(alt)):
        raise ArithmeticError(f"eigenvalue forms disagree: {float(lam)!r} vs {float(alt)!r}")
    return lam


def equilibrium(peak: GaussianPeak) -> GaussianEquilibrium:
    return GaussianEquilibrium(equilibrium_width(peak), peak_eigenvalue(peak))


def both_eigenvalue_forms(peak: GaussianPeak) -> tuple[float, float]:
    """``(width form, ratio form)`` without the agreement check."""
    return _eigenvalue_from_width(peak, equilibrium_width(peak)), _eigenvalue_from_ratio(peak)


def minimum_half_width(peak: GaussianPeak) -> float:
    """Smallest half-width accepted by :func:`discretized_dominant_eigenvalue`."""
    c = equilibrium_width(peak)
    return 6 * max(math.sqrt(peak.landscape_variance), math.sqrt(peak.mutation_variance), math.sqrt(c))


def midpoint_grid(center: float, half_width: float, points: int) -> tuple[np.ndarray, float]:
    step = 2 * half_width / points
    return center - half_width + (np.arange(points) + 0.5) * step, step


def kernel_matrix(peak: GaussianPeak, half_width: float, grid_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint-rule discretization ``K[i, j] = q(x_i | y_j) f(y_j) dy`` of the 1-D operator."""
    x, dy = midpoint_grid(peak.center[0], half_width, grid_points)
    sigma2 = peak.mutation_variance
    diff = x[:, None] - x[None, :]
    q = np.exp(-diff * diff / (2 * sigma2)) / math.sqrt(2 * math.pi * sigma2)
    return q * (peak.fitness(x) * dy)[None, :], x


def discretized_dominant_eigenvalue(peak: GaussianPeak, half_width: float | None = None,
                                    grid_points: int = 2001, tolerance: float = 1e-12,
                                    max_iterations: int = 100_000) -> float:
    """Dominant eigenvalue of the grid-discretized operator (1-D peaks only).

    ``half_width`` defaults to :func:`minimum_half_width`; anything narrower is
    rejected because boundary truncation would dominate the error.
    """
    if peak.dimension != 1:
        raise ValueError("only one-dimensional peaks are discretized")
    if grid_points < 3 or grid_points % 2 == 0:
        raise ValueError("grid_points must be odd and >= 3")
    floor = minimum_half_width(peak)
    if half_width is None:
        half_width = floor
    elif half_width < floor * (1 - 1e-12):
        raise ValueError(f"half_width {half_width} below the required {floor:.6g}")
    kernel, _ = kernel_matrix(peak, half_width, grid_points)
    result = power_iteration(kernel, tolerance, max_iterations)
    if not result.converged:
        raise NoConvergence("discretized operator did not converge", result)
    return result.eigenvalue


class FlattestComparison(NamedTuple):
    eigenvalue_a: float
    eigenvalue_b: float
    winner: str


def flattest_compare(peak_a: GaussianPeak, peak_b: GaussianPeak) -> FlattestComparison:
    """Which peak sustains the larger growth rate under the shared mutation variance."""
    if peak_a.mutation_variance != peak_b.mutation_variance:
        raise ValueError("peaks must share the mutation variance")
    la, lb = peak_eigenvalue(peak_a), peak_eigenvalue(peak_b)
    if abs(la - lb) <= TIE_TOL * max(la, lb):
        winner = "tie"
    else:
        winner = "a" if la > lb else "b"
    return FlattestComparison(la, lb, winner)


def landscape_model(peaks: Sequence[GaussianPeak], mutation_variance: float, lower: float,
                    upper: float, grid_points: int) -> tuple[FiniteModel, np.ndarray]:
    """Finite selection-mutation model on a 1-D grid over a sum of Gaussian peaks.

    Mutation is a Gaussian kernel restricted to the grid, each column
    renormalized so the matrix is column-stochastic.  Returns the model and
    the grid points.
    """
    x = np.linspace(lower, upper, grid_points)
    fitness = np.zeros_like(x)
    for peak in peaks:
        if peak.dimension != 1:
            raise ValueError("landscape peaks must be one-dimensional")
        fitness += peak.fitness(x)
    diff = x[:, None] - x[None, :]
    q = np.exp(-diff * diff / (2 * mutation_variance))
    q /= q.sum(axis=0, keepdims=True)
    return FiniteModel(fitness, q), x
