"""Analysis of tree runs: preservation checks, trait verdicts, concentration, utility."""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import FrontierExplosion, MissingCoordinateLabels
from .tree import ExponentEstimate, Frontier, NodeRef, Trajectory, TreeModel

DEFAULT_MARGIN = 0.01
DEFAULT_NODE_CAP = 1_000_000
PRESERVATION_SLACK = 1e-12


class PreservationResult(NamedTuple):
    holds: bool
    witness: NodeRef | None
    visited: int
    complete: bool = True

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "witness": None if self.witness is None else list(self.witness.path),
            "visited": self.visited,
            "complete": self.complete,
        }


def eta_preservation_check(model: TreeModel, depth_limit: int, eta: float,
                           node_cap: int = DEFAULT_NODE_CAP) -> PreservationResult:
    """Check that every reproducing node within ``depth_limit`` has probability
    at least ``eta`` of a child at least as fit as itself.

    Nodes are visited breadth-first, so the witness is a shallowest
    violation.  Deterministic rays are checked once at their head.  Raises
    :class:`FrontierExplosion` carrying a partial result if more than
    ``node_cap`` nodes would be visited.
    """
    if depth_limit < 1:
        raise ValueError("depth_limit must be >= 1")
    queue = deque([model.root()])
    visited = 0
    while queue:
        node = queue.popleft()
        visited += 1
        if visited > node_cap:
            partial = PreservationResult(True, None, visited - 1, complete=False)
            raise FrontierExplosion(f"preservation check exceeded {node_cap} nodes", partial)
        f = model.state_fitness(node.state)
        kids = model.state_children(node.state)
        if f > 0:
            good = math.fsum(p for p, s in kids if model.state_fitness(s) >= f)
            if good < eta - PRESERVATION_SLACK:
                return PreservationResult(False, node, visited)
        if node.depth < depth_limit and not model.state_is_ray(node.state):
            for k, (p, s) in enumerate(kids):
                if p > 0:
                    queue.append(node.child(k, s))
    return PreservationResult(True, None, visited)


VERDICTS = ("takes_over", "dies_out", "survives", "inconclusive")


class Classification(NamedTuple):
    verdict: str
    evidence: tuple

    def to_dict(self) -> dict:
        s, t = self.evidence
        return {"verdict": self.verdict, "trait": s._asdict(), "complement": t._asdict()}


def classify_partition(estimate_s: ExponentEstimate, estimate_t: ExponentEstimate,
                       margin: float = DEFAULT_MARGIN) -> Classification:
    """Verdict for trait ``S`` against its complement ``T`` from exponent estimates."""
    if margin <= 0:
        raise ValueError("margin must be positive")
    if estimate_s.lower > estimate_t.upper + margin:
        verdict = "takes_over"
    elif estimate_s.upper < estimate_t.lower - margin:
        verdict = "dies_out"
    elif estimate_s.upper > estimate_t.upper + margin:
        verdict = "survives"
    else:
        verdict = "inconclusive"
    return Classification(verdict, (estimate_s, estimate_t))


def resolve_f_star(model: TreeModel, observed_max: float | None = None) -> float:
    """The model's declared fitness supremum, else ``observed_max`` with a warning."""
    declared = getattr(model, "declared_fitness_supremum", None)
    if declared is not None:
        return float(declared)
    if observed_max is None:
        raise ValueError("model declares no fitness supremum and no observed maximum was given")
    warnings.warn("model declares no fitness supremum; using the running maximum instead", RuntimeWarning)
    return float(observed_max)


def concentration_mass(frontier: Frontier, model: TreeModel, f_star: float | None,
                       epsilon: float) -> float:
    """Share of the frontier with fitness strictly within ``epsilon`` of ``f_star``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if len(frontier) == 0:
        return 0.0
    if f_star is None:
        f_star = resolve_f_star(model, float(frontier.fitness.max()))
    near = np.abs(frontier.fitness - f_star) < epsilon
    return float(frontier.shares[near].sum())


@dataclass(frozen=True)
class UtilityProfile:
    """Conditional mean utility as a function of fitness, with declared properties.

    ``bounded`` and ``continuous_on_reachable`` are declarations; use
    :meth:`spot_check` to test the bound on sampled fitness values.
    """

    conditional_mean: Callable[[float], float]
    bounded: bool = False
    continuous_on_reachable: bool = True
    bound: float | None = None
    name: str = "custom"

    def values(self, fitness: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.array([self.conditional_mean(float(f)) for f in fitness], dtype=float)

    def spot_check(self, fitness_samples) -> bool:
        if not self.bounded or self.bound is None:
            return True
        vals = self.values(np.asarray(fitness_samples, dtype=float))
        return bool(np.all(np.abs(vals) <= self.bound))


def _safe_log(f: float) -> float:
    return math.log(f) if f > 0 else -math.inf


UTILITY_PROFILES = {
    "identity": lambda: UtilityProfile(lambda f: f, name="identity"),
    "square": lambda: UtilityProfile(lambda f: f * f, name="square"),
    "log": lambda: UtilityProfile(_safe_log, continuous_on_reachable=False, name="log"),
}


def utility_profile(spec: str) -> UtilityProfile:
    """Built-in profiles: ``identity``, ``square``, ``log``, ``const:c``."""
    if spec in UTILITY_PROFILES:
        return UTILITY_PROFILES[spec]()
    if spec.startswith("const:"):
        c = float(spec.split(":", 1)[1])
        return UtilityProfile(lambda f: c, bounded=True, bound=abs(c), name=spec)
    raise ValueError(f"unknown utility profile {spec!r}")


class UtilityValue(NamedTuple):
    value: float
    negative_infinite_share: float

    @property
    def flagged(self) -> bool:
        return self.negative_infinite_share > 0


def expected_utility(frontier: Frontier, model: TreeModel, utility: UtilityProfile) -> UtilityValue:
    """Share-weighted mean utility.  Any positive share on ``-inf`` utility makes it ``-inf``
    and the offending share is reported alongside."""
    if len(frontier) == 0:
        return UtilityValue(float("nan"), 0.0)
    x = frontier.shares
    mu = utility.values(frontier.fitness)
    bad = (mu == -math.inf) & (x > 0)
    if bad.any():
        return UtilityValue(-math.inf, float(x[bad].sum()))
    return UtilityValue(float(np.dot(x, mu)), 0.0)


def coordinate_means(frontier: Frontier, model: TreeModel) -> tuple[float, float]:
    """Share-weighted means of the ``f_C`` and ``f_D`` label scalars."""
    try:
        fc = np.array([lab.scalars["f_C"] for lab in frontier.labels], dtype=float)
        fd = np.array([lab.scalars["f_D"] for lab in frontier.labels], dtype=float)
    except KeyError as exc:
        raise MissingCoordinateLabels(f"frontier node lacks coordinate label {exc}") from None
    return float(np.dot(frontier.shares, fc)), float(np.dot(frontier.shares, fd))


class FloorCheck(NamedTuple):
    floor_estimate: float
    passes: bool


def geometric_mean_floor_check(trajectory: Trajectory, eta: float, f_star: float,
                               tail_fraction: float = 0.5, tolerance: float = 1e-3) -> FloorCheck:
    """Minimum running geometric mean over the trailing part of a run, compared to ``eta * f_star``."""
    if len(trajectory) == 0:
        raise ValueError("trajectory is empty")
    if not 0 < tail_fraction < 1:
        raise ValueError("tail_fraction must lie in (0, 1)")
    gm = trajectory.running_geometric_mean
    tail = max(1, math.ceil(gm.size * tail_fraction))
    floor = float(gm[-tail:].min())
    return FloorCheck(floor, floor >= eta * f_star - tolerance)


def min_trailing_share(trajectory: Trajectory, trait: str, tail_fraction: float = 0.5) -> float:
    """Smallest share of ``trait`` over the trailing part of a run (a persistence diagnostic)."""
    shares = trajectory.column(trait)
    if shares.size == 0:
        raise ValueError("trajectory is empty")
    tail = max(1, math.ceil(shares.size * tail_fraction))
    return float(shares[-tail:].min())
