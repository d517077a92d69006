"""Finite selection-mutation model.

A population over genotypes ``0..N-1`` with fitness ``f`` and a
column-stochastic mutation matrix ``Q`` (``Q[n, m]`` is the probability that
offspring of a type-``m`` parent is of type ``n``).  Unnormalized abundance
evolves as ``y <- Q @ diag(f) @ y``; everything here works with the
normalized frequencies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import (
    NotMutationFree,
    NotSymmetric,
    ValidationError,
    ZeroMeanFitness,
)

STOCHASTIC_TOL = 1e-12
STATE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteModel:
    """Fitness vector plus column-stochastic mutation matrix.

    ``mutation`` is indexed ``[offspring, parent]``.  Use :meth:`from_dict`
    or :meth:`from_json` for documents that list the matrix column by column.
    """

    fitness: np.ndarray
    mutation: np.ndarray

    def __post_init__(self):
        f = np.array(self.fitness, dtype=float)
        q = np.array(self.mutation, dtype=float)
        if f.ndim != 1 or f.size == 0:
            raise ValidationError("fitness must be a non-empty 1-D sequence")
        n = f.size
        if q.shape != (n, n):
            raise ValidationError(f"mutation must be {n}x{n}, got shape {q.shape}")
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            bad = int(np.flatnonzero(~(np.isfinite(f) & (f >= 0)))[0])
            raise ValidationError(f"fitness[{bad}] must be finite and >= 0")
        for m in range(n):
            col = q[:, m]
            if not np.all(np.isfinite(col)) or np.any(col < 0):
                raise ValidationError(f"mutation column {m} has a negative or non-finite entry")
            total = col.sum()
            if abs(total - 1.0) > STOCHASTIC_TOL:
                raise ValidationError(
                    f"mutation column {m} sums to {float(total)!r}, expected 1 (column-stochastic)"
                )
        f.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "fitness", f)
        object.__setattr__(self, "mutation", q)

    @property
    def size(self) -> int:
        return self.fitness.size

    @property
    def evolution_matrix(self) -> np.ndarray:
        """``A = Q F``."""
        return self.mutation * self.fitness[None, :]

    @classmethod
    def from_dict(cls, doc: dict) -> "FiniteModel":
        """Build from ``{"fitness": [...], "mutation": [[column 0], [column 1], ...]}``."""
        try:
            fitness = doc["fitness"]
            columns = doc["mutation"]
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"finite model document needs 'fitness' and 'mutation' keys: {exc}")
        cols = np.array(columns, dtype=float)
        if cols.ndim != 2:
            raise ValidationError("mutation must be an array of column arrays")
        return cls(np.asarray(fitness, dtype=float), cols.T)

    @classmethod
    def from_json(cls, source) -> "FiniteModel":
        """Load from a JSON string, or from a path to a JSON file."""
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            text = Path(source).read_text()
        else:
            text = source
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {"fitness": self.fitness.tolist(), "mutation": self.mutation.T.tolist()}


def check_state(x, n: int | None = None) -> np.ndarray:
    """Validate a frequency vector (non-negative, sums to 1) and return it as an array."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or (n is not None and x.size != n):
        raise ValidationError(f"population state must be a length-{n} vector")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValidationError("population state entries must be finite and >= 0")
    if abs(x.sum() - 1.0) > STATE_TOL:
        raise ValidationError(f"population state sums to {float(x.sum())!r}, expected 1")
    return x


def mean_fitness_finite(model: FiniteModel, x) -> float:
    return float(np.dot(np.asarray(x, dtype=float), model.fitness))


def step_finite(model: FiniteModel, x) -> np.ndarray:
    """One generation: selection by fitness, then mutation, then renormalize."""
    x = check_state(x, model.size)
    mean = mean_fitness_finite(model, x)
    if mean <= 0:
        raise ZeroMeanFitness("mean fitness is zero; population extinct")
    y = model.mutation @ (model.fitness * x)
    return y / y.sum()


class PriceTerms(NamedTuple):
    selection: float
    mutation: float
    total: float


def price_decomposition(model: FiniteModel, x, z) -> PriceTerms:
    """Split the one-step change in the mean of ``z`` into selection and transmission.

    ``total`` is measured independently by stepping the population; the
    identity ``total == selection + mutation`` holds to rounding.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    f = model.fitness
    mean = mean_fitness_finite(model, x)
    if mean <= 0:
        raise ZeroMeanFitness("mean fitness is zero; Price terms undefined")
    rel = f / mean
    zbar = float(np.dot(x, z))
    selection = float(np.dot(x, rel * z)) - float(np.dot(x, rel)) * zbar
    x_sel = f * x / mean
    z_offspring = model.mutation.T @ z
    mutation = float(np.dot(x_sel, z_offspring - z))
    total = float(np.dot(step_finite(model, x), z)) - zbar
    return PriceTerms(selection, mutation, total)


def fisher_delta(model: FiniteModel, x) -> tuple[float, float]:
    """Return ``(one-step change in mean fitness, Var(f)/mean)`` for a mutation-free model."""
    n = model.size
    if np.max(np.abs(model.mutation - np.eye(n))) > STOCHASTIC_TOL:
        raise NotMutationFree("fisher_delta requires an identity mutation matrix")
    x = np.asarray(x, dtype=float)
    f = model.fitness
    mean = mean_fitness_finite(model, x)
    if mean <= 0:
        raise ZeroMeanFitness("mean fitness is zero")
    delta = mean_fitness_finite(model, step_finite(model, x)) - mean
    var = float(np.dot(x, (f - mean) ** 2))
    return delta, var / mean


@dataclass(frozen=True)
class PowerResult:
    eigenvalue: float
    vector: np.ndarray
    iterations: int
    converged: bool
    residual: float


def power_iteration(matrix, tolerance: float = 1e-12, max_iterations: int = 100_000,
                    start=None) -> PowerResult:
    """Dominant eigenpair of a non-negative matrix.

    Iterates ``v <- M v / |M v|_1`` from the uniform simplex vector.  The
    eigenvalue estimate is ``|M v|_1``.  Declared converged once the relative
    change of the estimate stays below ``tolerance`` for two consecutive
    sweeps and the residual ``|M v - lam v|_1`` is below
    ``tolerance * max(1, lam)``.
    """
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    v = np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=float) / np.sum(start)
    lam = 0.0
    calm = 0
    residual = float("inf")
    for it in range(1, max_iterations + 1):
        w = m @ v
        lam_new = float(w.sum())
        if lam_new <= 0:
            return PowerResult(0.0, v, it, False, float(np.abs(w).sum()))
        w /= lam_new
        calm = calm + 1 if abs(lam_new - lam) <= tolerance * lam_new else 0
        lam, v = lam_new, w
        if calm >= 2:
            residual = float(np.abs(m @ v - lam * v).sum())
            if residual <= tolerance * max(1.0, lam):
                return PowerResult(lam, v, it, True, residual)
    residual = float(np.abs(m @ v - lam * v).sum())
    return PowerResult(lam, v, max_iterations, False, residual)


@dataclass(frozen=True)
class PerronResult:
    eigenvalue: float
    right_vector: np.ndarray
    left_vector: np.ndarray
    iterations: int
    converged: bool
    right_residual: float = float("nan")
    left_residual: float = float("nan")


def perron_eigenpair(model: FiniteModel, tolerance: float = 1e-12,
                     max_iterations: int = 100_000) -> PerronResult:
    """Perron eigenvalue with right (simplex-normalized) and left vectors of ``A = QF``.

    The left vector is scaled so that ``left @ right == 1``.  ``converged`` is
    false when either sweep fails to settle (no spectral gap, oscillation).
    """
    a = model.evolution_matrix
    right = power_iteration(a, tolerance, max_iterations)
    left = power_iteration(a.T, tolerance, max_iterations)
    w = left.vector
    overlap = float(np.dot(w, right.vector))
    if overlap > 0:
        w = w / overlap
    lam = right.eigenvalue
    return PerronResult(
        eigenvalue=lam,
        right_vector=right.vector,
        left_vector=w,
        iterations=max(right.iterations, left.iterations),
        converged=right.converged and left.converged and abs(left.eigenvalue - lam) <= 10 * tolerance * max(1.0, lam),
        right_residual=float(np.abs(a @ right.vector - lam * right.vector).sum()),
        left_residual=float(np.abs(a.T @ w - lam * w).sum()),
    )


def symmetrized_operator(model: FiniteModel) -> np.ndarray:
    """``B = F^1/2 Q F^1/2``; requires a symmetric mutation matrix."""
    q = model.mutation
    if np.max(np.abs(q - q.T)) > STOCHASTIC_TOL:
        raise NotSymmetric("mutation matrix is not symmetric")
    root = np.sqrt(model.fitness)
    return root[:, None] * q * root[None, :]


@dataclass
class FiniteTrajectory:
    """States ``x(0..T)`` and mean fitness at each of them.

    ``extinct_at`` is the index of the first state whose mean fitness is zero,
    in which case the trajectory stops there.
    """

    states: np.ndarray
    mean_fitness: np.ndarray
    extinct_at: int | None = None

    def __len__(self):
        return len(self.mean_fitness)

    def __iter__(self) -> Iterator[tuple[np.ndarray, float]]:
        return iter(zip(self.states, self.mean_fitness.tolist()))

    def __getitem__(self, i):
        return self.states[i], float(self.mean_fitness[i])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def evolve_finite(model: FiniteModel, x0, steps: int) -> FiniteTrajectory:
    if steps < 0:
        raise ValueError("steps must be >= 0")
    x = check_state(x0, model.size)
    states = [x]
    means = [mean_fitness_finite(model, x)]
    for _ in range(steps):
        if means[-1] <= 0:
            break
        x = step_finite(model, x)
        states.append(x)
        means.append(mean_fitness_finite(model, x))
    extinct = len(means) - 1 if means[-1] <= 0 else None
    return FiniteTrajectory(np.array(states), np.array(means), extinct)
