"""Selection-mutation dynamics on a lazily generated infinite tree.

Every node of the tree is a program; a node's children are the programs it
can propose, with probabilities forming one column of a column-stochastic
kernel.  Because a node can only be produced at one depth, the population at
time ``t`` lives entirely on depth-``t`` nodes, which is what makes a
frontier-by-frontier propagation exact.

Masses are kept as normalized shares plus a running ``log`` of the total
mass, so super-exponential growth and decay never overflow.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import Extinction, FrontierExplosion, ModelError, TooShort

PROB_TOL = 1e-12
DEFAULT_PRUNE = 1e-12
DEFAULT_MAX_FRONTIER = 5_000_000


def max_frontier_entries() -> int:
    raw = os.environ.get("EVOTREE_MAX_FRONTIER")
    if not raw:
        return DEFAULT_MAX_FRONTIER
    try:
        value = int(raw)
    except ValueError:
        raise ModelError(f"EVOTREE_MAX_FRONTIER must be an integer, got {raw!r}")
    if value < 1:
        raise ModelError("EVOTREE_MAX_FRONTIER must be positive")
    return value


class NodeRef:
    """Identity of a tree node: the child indices leading to it from the root.

    The path is stored run-length encoded, which keeps long deterministic
    chains cheap.  ``state`` is a model-private payload used to generate the
    node's fitness and children; it does not take part in equality.
    """

    __slots__ = ("runs", "depth", "state")

    def __init__(self, runs: tuple = (), depth: int = 0, state: Any = None):
        self.runs = runs
        self.depth = depth
        self.state = state

    @classmethod
    def from_path(cls, path: Iterable[int], state: Any = None) -> "NodeRef":
        runs: list[list[int]] = []
        depth = 0
        for i in path:
            i = int(i)
            if runs and runs[-1][0] == i:
                runs[-1][1] += 1
            else:
                runs.append([i, 1])
            depth += 1
        return cls(tuple((a, b) for a, b in runs), depth, state)

    @property
    def path(self) -> tuple[int, ...]:
        return tuple(i for i, count in self.runs for _ in range(count))

    def child(self, index: int, state: Any) -> "NodeRef":
        runs = self.runs
        if runs and runs[-1][0] == index:
            runs = runs[:-1] + ((index, runs[-1][1] + 1),)
        else:
            runs = runs + ((index, 1),)
        return NodeRef(runs, self.depth + 1, state)

    def extend(self, index: int, count: int) -> "NodeRef":
        """Follow child ``index`` ``count`` times, keeping the same state (ray continuation)."""
        if count == 0:
            return self
        runs = self.runs
        if runs and runs[-1][0] == index:
            runs = runs[:-1] + ((index, runs[-1][1] + count),)
        else:
            runs = runs + ((index, count),)
        return NodeRef(runs, self.depth + count, self.state)

    def startswith(self, prefix: Sequence[int]) -> bool:
        if len(prefix) > self.depth:
            return False
        k = 0
        for i, count in self.runs:
            for _ in range(count):
                if k == len(prefix):
                    return True
                if prefix[k] != i:
                    return False
                k += 1
        return True

    def label(self) -> str:
        return "".join(map(str, self.path)) if all(i < 10 for i, _ in self.runs) else ".".join(map(str, self.path))

    def __eq__(self, other):
        return isinstance(other, NodeRef) and self.runs == other.runs

    def __hash__(self):
        return hash(self.runs)

    def __repr__(self):
        return f"NodeRef(path={self.label() or '()'!s}, depth={self.depth})"


@dataclass(frozen=True)
class Labels:
    tags: frozenset = frozenset()
    scalars: Mapping[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"tags": sorted(self.tags), "scalars": {k: self.scalars[k] for k in sorted(self.scalars)}}


NO_LABELS = Labels()


class TreeModel:
    """Generator contract for an infinite tree.

    Subclasses implement the ``state_*`` hooks.  A node whose child list is
    empty must have fitness 0.  If :meth:`state_is_ray` is true for a state,
    that node heads a deterministic chain of identical copies: a single child
    with probability 1 whose state equals the parent's.  The engine relies on
    this to carry such chains without re-expanding them.
    """

    declared_fitness_supremum: float | None = None

    def root_state(self) -> Any:
        raise NotImplementedError

    def state_fitness(self, state) -> float:
        raise NotImplementedError

    def state_children(self, state) -> list[tuple[float, Any]]:
        raise NotImplementedError

    def state_labels(self, state) -> Labels:
        return NO_LABELS

    def state_is_ray(self, state) -> bool:
        return False

    # node-level view
    def root(self) -> NodeRef:
        return NodeRef((), 0, self.root_state())

    def fitness(self, node: NodeRef) -> float:
        return self.state_fitness(node.state)

    def labels(self, node: NodeRef) -> Labels:
        return self.state_labels(node.state)

    def children(self, node: NodeRef) -> list[tuple[int, float]]:
        return [(i, p) for i, (p, _) in enumerate(self.state_children(node.state))]

    def expand(self, node: NodeRef) -> list[tuple[NodeRef, float]]:
        return [(node.child(i, s), p) for i, (p, s) in enumerate(self.state_children(node.state))]

    def node_at(self, path: Iterable[int]) -> NodeRef:
        node = self.root()
        for i in path:
            kids = self.state_children(node.state)
            if not 0 <= i < len(kids):
                raise ModelError(f"node {node.label() or '()'} has no child {i}")
            node = node.child(i, kids[i][1])
        return node


class TraitPredicate:
    """Named node predicate defining a trait.

    ``test`` receives ``(node, labels)``.  Predicates built with
    :meth:`on_fitness` test the node's fitness instead.  ``ray_invariant``
    declares that every node of a deterministic ray answers like its head,
    which lets the engine skip re-evaluation along rays.
    """

    def __init__(self, name: str, test: Callable[[NodeRef, Labels], bool] | None = None,
                 ray_invariant: bool = True, fitness_test: Callable[[np.ndarray], np.ndarray] | None = None):
        if (test is None) == (fitness_test is None):
            raise ValueError("give exactly one of test or fitness_test")
        self.name = name
        self.test = test
        self.fitness_test = fitness_test
        self.ray_invariant = ray_invariant

    @classmethod
    def on_fitness(cls, name: str, fitness_test: Callable[[np.ndarray], np.ndarray]) -> "TraitPredicate":
        """``fitness_test`` maps an array of fitnesses to a boolean array."""
        return cls(name, fitness_test=fitness_test)

    def __repr__(self):
        return f"TraitPredicate({self.name!r})"


def tag_trait(tag: str, name: str | None = None) -> TraitPredicate:
    return TraitPredicate(name or tag, lambda node, labels: tag in labels.tags)


def subtree_trait(path: Sequence[int], name: str | None = None) -> TraitPredicate:
    prefix = tuple(int(i) for i in path)
    label = name or "subtree:" + "".join(map(str, prefix))
    return TraitPredicate(label, lambda node, labels: node.startswith(prefix), ray_invariant=False)


def all_trait() -> TraitPredicate:
    return TraitPredicate("all", lambda node, labels: True)


def zero_fitness_trait() -> TraitPredicate:
    return TraitPredicate.on_fitness("zero_fitness", lambda f: f == 0)


class Frontier:
    """Normalized population on the nodes of one depth.

    Stored column-wise.  Entry ``i`` is the node reached from ``anchors[i]``
    by following child 0 ``offsets[i]`` times; offsets are only non-zero for
    deterministic-ray entries.  Use :meth:`node` or :meth:`items` to get the
    actual node references.
    """

    def __init__(self, anchors, offsets, shares, fitness, ray, labels, depth: int,
                 log_total_mass: float = 0.0, truncated_share_bound: float = 0.0,
                 extinct: bool = False, cols: dict | None = None):
        self.anchors = anchors
        self.offsets = offsets
        self.shares = shares
        self.fitness = fitness
        self.ray = ray
        self.labels = labels
        self.depth = depth
        self.log_total_mass = log_total_mass
        self.truncated_share_bound = truncated_share_bound
        self.extinct = extinct
        self._cols = cols if cols is not None else {}

    @classmethod
    def single(cls, model: TreeModel, node: NodeRef) -> "Frontier":
        anchors = np.empty(1, dtype=object)
        anchors[0] = node
        labels = np.empty(1, dtype=object)
        labels[0] = model.state_labels(node.state)
        return cls(anchors, np.zeros(1, dtype=np.int64), np.ones(1),
                   np.array([float(model.state_fitness(node.state))]),
                   np.array([bool(model.state_is_ray(node.state))]), labels, node.depth)

    @classmethod
    def empty(cls, depth: int, truncated_share_bound: float = 0.0) -> "Frontier":
        return cls(np.empty(0, dtype=object), np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0),
                   np.zeros(0, dtype=bool), np.empty(0, dtype=object), depth, -math.inf,
                   truncated_share_bound, extinct=True)

    def __len__(self):
        return self.shares.size

    def node(self, i: int) -> NodeRef:
        return self.anchors[i].extend(0, int(self.offsets[i]))

    def nodes(self) -> list[NodeRef]:
        return [self.node(i) for i in range(len(self))]

    def items(self) -> Iterator[tuple[NodeRef, float]]:
        for i in range(len(self)):
            yield self.node(i), float(self.shares[i])

    def as_dict(self) -> dict[NodeRef, float]:
        return dict(self.items())

    def share_of(self, node: NodeRef) -> float:
        return self.as_dict().get(node, 0.0)

    @property
    def mean_fitness(self) -> float:
        return float(np.dot(self.shares, self.fitness))

    def total_share(self) -> float:
        return float(self.shares.sum())

    def snapshot(self) -> list[dict]:
        """Plain records ``{path, share, fitness, labels}`` for JSON export."""
        out = []
        for i in range(len(self)):
            out.append({
                "path": list(self.node(i).path),
                "share": float(self.shares[i]),
                "fitness": float(self.fitness[i]),
                "labels": self.labels[i].to_dict(),
            })
        return out


def root_frontier(model: TreeModel) -> Frontier:
    return Frontier.single(model, model.root())


class StepRecord(NamedTuple):
    """Summary of the step taken from the frontier at ``time``.

    ``mean_fitness`` and ``trait_shares`` describe that incoming frontier;
    ``log_total_mass``, ``running_geometric_mean`` and
    ``truncated_share_bound`` describe the population after the step, so
    ``log_total_mass`` is ``log Z(time + 1)``.
    """

    time: int
    mean_fitness: float
    log_total_mass: float
    running_geometric_mean: float
    trait_shares: dict
    truncated_share_bound: float


def _trait_column(frontier: Frontier, trait: TraitPredicate, nodes: list | None = None) -> np.ndarray:
    if trait.fitness_test is not None:
        return np.asarray(trait.fitness_test(frontier.fitness), dtype=bool)
    cached = frontier._cols.get(trait.name)
    if cached is not None and cached[0] is trait:
        return cached[1]
    if nodes is None:
        nodes = frontier.nodes()
    col = np.fromiter((bool(trait.test(n, lab)) for n, lab in zip(nodes, frontier.labels)),
                      dtype=bool, count=len(frontier))
    frontier._cols[trait.name] = (trait, col)
    return col


def trait_share(frontier: Frontier, model: TreeModel, trait: TraitPredicate) -> float:
    if len(frontier) == 0:
        return 0.0
    return float(frontier.shares[_trait_column(frontier, trait)].sum())


_NO_INDEX = np.zeros(0, dtype=np.int64)


def _check_mergeable(traits: Sequence[TraitPredicate]) -> None:
    for tr in traits:
        if not tr.ray_invariant:
            raise ValueError(f"trait {tr.name!r} depends on node paths and cannot be used with merge_states")


def _merge_by_state(anchors: np.ndarray, shares: np.ndarray) -> np.ndarray | None:
    """Sum shares of entries with equal states into the first of them, in place.

    Returns the indices to keep, or None when every state is distinct.
    """
    first: dict = {}
    keep = []
    try:
        for i, node in enumerate(anchors):
            j = first.setdefault(node.state, i)
            if j == i:
                keep.append(i)
            else:
                shares[j] += shares[i]
    except TypeError:
        raise ModelError("merge_states needs hashable generator states") from None
    if len(keep) == anchors.size:
        return None
    return np.asarray(keep, dtype=np.int64)


def advance(model: TreeModel, frontier: Frontier, prune_threshold: float = DEFAULT_PRUNE,
            traits: Sequence[TraitPredicate] = (), max_entries: int | None = None,
            merge_states: bool = False) -> tuple[Frontier, StepRecord]:
    """One generation of selection and mutation on the tree.

    Returns the next frontier and the record of this step.  Entries whose
    share falls below ``prune_threshold`` are dropped after normalization and
    their mass is added to ``truncated_share_bound``.  ``traits`` are
    evaluated on the incoming frontier for the record.  ``max_entries``
    overrides the ``EVOTREE_MAX_FRONTIER`` cap.

    With ``merge_states`` entries that reach the same generator state are
    summed into one entry (the first one, so a carried ray keeps its path).
    Their subtrees are identical, so shares, fitness and label-based traits
    are unchanged; node paths become representatives only, which is why
    path-dependent traits are refused in this mode.
    """
    if not 0 <= prune_threshold < 1:
        raise ValueError("prune_threshold must lie in [0, 1)")
    if merge_states:
        _check_mergeable(traits)
    t = frontier.depth
    shares = {tr.name: trait_share(frontier, model, tr) for tr in traits}
    x, f = frontier.shares, frontier.fitness
    mean = float(np.dot(x, f))
    if not mean > 0:
        empty = Frontier.empty(t + 1, frontier.truncated_share_bound)
        record = StepRecord(t, 0.0, -math.inf, 0.0, shares, frontier.truncated_share_bound)
        raise Extinction(f"mean fitness is zero at t={t}", empty, record)
    w = x * (f / mean)

    live = w > 0
    if frontier.ray.any():
        keep_ray = np.flatnonzero(frontier.ray & live)
        expand = np.flatnonzero(~frontier.ray & live)
    else:
        keep_ray = _NO_INDEX
        expand = np.flatnonzero(live)

    new_anchor: list = []
    new_share: list = []
    new_fit: list = []
    new_ray: list = []
    new_lab: list = []
    anchors = frontier.anchors
    state_children = model.state_children
    state_fitness = model.state_fitness
    state_labels = model.state_labels
    state_is_ray = model.state_is_ray
    for i in expand.tolist():
        parent = anchors[i]
        wi = w[i]
        for k, (p, s) in enumerate(state_children(parent.state)):
            if p <= 0:
                continue
            share = wi * p
            if share <= 0:
                continue
            new_anchor.append(parent.child(k, s))
            new_share.append(share)
            new_fit.append(state_fitness(s))
            new_ray.append(state_is_ray(s))
            new_lab.append(state_labels(s))

    n_new = len(new_anchor)
    total = keep_ray.size + n_new
    cap = max_frontier_entries() if max_entries is None else max_entries
    if total > cap:
        raise FrontierExplosion(f"frontier at t={t + 1} would hold {total} entries (cap {cap})", frontier)

    anchors_out = np.empty(total, dtype=object)
    labels_out = np.empty(total, dtype=object)
    if keep_ray.size:
        anchors_out[:keep_ray.size] = frontier.anchors[keep_ray]
        anchors_out[keep_ray.size:] = new_anchor
        labels_out[:keep_ray.size] = frontier.labels[keep_ray]
        labels_out[keep_ray.size:] = new_lab
        offsets = np.concatenate([frontier.offsets[keep_ray] + 1, np.zeros(n_new, dtype=np.int64)])
        share_out = np.concatenate([w[keep_ray], np.asarray(new_share, dtype=float)])
        fit_out = np.concatenate([f[keep_ray], np.asarray(new_fit, dtype=float)])
        ray_out = np.concatenate([np.ones(keep_ray.size, dtype=bool), np.asarray(new_ray, dtype=bool)])
    else:
        anchors_out[:] = new_anchor
        labels_out[:] = new_lab
        offsets = np.zeros(n_new, dtype=np.int64)
        share_out = np.array(new_share, dtype=float)
        fit_out = np.array(new_fit, dtype=float)
        ray_out = np.array(new_ray, dtype=bool)

    cols = {}
    for name, (trait, col) in frontier._cols.items():
        if trait.ray_invariant:
            cols[name] = (trait, col[keep_ray])

    select = None
    if merge_states and total > 1:
        select = _merge_by_state(anchors_out, share_out)
        if select is not None:
            anchors_out, labels_out = anchors_out[select], labels_out[select]
            offsets, share_out = offsets[select], share_out[select]
            fit_out, ray_out = fit_out[select], ray_out[select]

    bound = frontier.truncated_share_bound
    merged = select
    select = None
    if prune_threshold > 0:
        small = share_out < prune_threshold
        if small.any():
            if small.all():
                small[int(np.argmax(share_out))] = False
            bound += float(share_out[small].sum())
            select = np.flatnonzero(~small)
    if select is not None:
        anchors_out, labels_out = anchors_out[select], labels_out[select]
        offsets, share_out = offsets[select], share_out[select]
        fit_out, ray_out = fit_out[select], ray_out[select]
    if merged is not None:
        select = merged if select is None else merged[select]
    share_out = share_out / share_out.sum()

    log_mass = frontier.log_total_mass + math.log(mean)
    nxt = Frontier(anchors_out, offsets, share_out, fit_out, ray_out, labels_out, t + 1,
                   log_mass, bound)
    # carry ray-invariant trait columns, evaluate them on new entries only
    for name, (trait, col) in cols.items():
        fresh = np.fromiter(
            (bool(trait.test(n, lab)) for n, lab in zip(new_anchor, new_lab)), dtype=bool, count=n_new)
        full = np.concatenate([col, fresh])
        nxt._cols[name] = (trait, full[select] if select is not None else full)
    record = StepRecord(t, mean, log_mass, math.exp(log_mass / (t + 1)), shares, bound)
    return nxt, record


@dataclass
class Trajectory:
    """Step records ``0..steps-1`` plus the frontier reached after the last step."""

    records: list
    final: Frontier
    trait_names: list
    final_trait_shares: dict
    extinct_at: int | None = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name: str) -> np.ndarray:
        if name in self.trait_names:
            return np.array([r.trait_shares[name] for r in self.records])
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def mean_fitness(self) -> np.ndarray:
        return self.column("mean_fitness")

    @property
    def log_total_mass(self) -> np.ndarray:
        return self.column("log_total_mass")

    @property
    def running_geometric_mean(self) -> np.ndarray:
        return self.column("running_geometric_mean")

    def log_sizes(self) -> np.ndarray:
        """``log Z(t)`` for ``t = 0..len``."""
        return np.concatenate([[0.0], self.log_total_mass])


def run_tree(model: TreeModel, steps: int, prune_threshold: float = DEFAULT_PRUNE,
             traits: Sequence[TraitPredicate] = (), start: Frontier | None = None,
             on_step: Callable[[Frontier, StepRecord], None] | None = None,
             merge_states: bool = False) -> Trajectory:
    """Advance ``steps`` times from the root (or ``start``).

    ``on_step(frontier, record)`` is called after each step with the frontier
    the step started from.  On extinction the raised :class:`Extinction` carries the partial
    trajectory as ``trajectory`` and the step index as ``record.time``.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    names = [tr.name for tr in traits]
    if len(set(names)) != len(names):
        raise ValueError("trait names must be unique")
    frontier = start if start is not None else root_frontier(model)
    cap = max_frontier_entries()
    records = []
    for _ in range(steps):
        try:
            nxt, record = advance(model, frontier, prune_threshold, traits, cap, merge_states)
        except Extinction as exc:
            if on_step is not None:
                on_step(frontier, exc.record)
            records.append(exc.record)
            exc.trajectory = Trajectory(records, exc.frontier, names, {n: 0.0 for n in names},
                                        exc.record.time)
            raise
        if on_step is not None:
            on_step(frontier, record)
        frontier = nxt
        records.append(record)
    final_shares = {tr.name: trait_share(frontier, model, tr) for tr in traits}
    return Trajectory(records, frontier, names, final_shares)


def lineage_sizes(model: TreeModel, origin: NodeRef, steps: int,
                  prune_threshold: float = 0.0, merge_states: bool = False) -> np.ndarray:
    """``log Z_origin(s)`` for ``s = 0..steps``, from the process restarted at ``origin``.

    After an extinction the remaining entries are ``-inf``.
    """
    out = np.full(steps + 1, -math.inf)
    out[0] = 0.0
    frontier = Frontier.single(model, origin)
    cap = max_frontier_entries()
    for s in range(steps):
        try:
            frontier, record = advance(model, frontier, prune_threshold, (), cap, merge_states)
        except Extinction:
            break
        out[s + 1] = record.log_total_mass
    return out


def descend(model: TreeModel, origin: NodeRef, path: Iterable[int]) -> tuple[NodeRef, float]:
    """Follow ``path`` down from ``origin``.

    Returns the node reached and the log of the connecting entry of ``A**k``:
    the product of ``fitness(parent) * probability`` along the way.
    """
    node, log_weight = origin, 0.0
    for i in path:
        kids = model.state_children(node.state)
        if not 0 <= i < len(kids):
            raise ModelError(f"node {node.label() or '()'} has no child {i}")
        p, s = kids[i]
        f = model.state_fitness(node.state)
        log_weight += math.log(f * p) if f * p > 0 else -math.inf
        node = node.child(i, s)
    return node, log_weight


class ExponentEstimate(NamedTuple):
    """Finite-horizon surrogates for the lower and upper growth exponents."""

    horizon: int
    lower: float
    upper: float
    window: int
    full_sequence_available: bool

    def to_dict(self) -> dict:
        return self._asdict()


def exponent_estimate(log_sizes: Sequence[float], window: int | None = None) -> ExponentEstimate:
    """Min and max of ``Z(t) ** (1/t)`` over the last ``window`` times.

    ``log_sizes[t]`` is ``log Z(t)`` starting at ``t = 0``.  The default
    window is a quarter of the horizon.
    """
    logs = np.asarray(log_sizes, dtype=float)
    horizon = logs.size - 1
    if window is None:
        window = max(1, horizon // 4)
    if window < 1:
        raise ValueError("window must be >= 1")
    if logs.size <= window:
        raise TooShort(f"need more than {window} log sizes, got {logs.size}")
    t = np.arange(horizon - window + 1, horizon + 1)
    values = np.exp(logs[t] / t)
    return ExponentEstimate(horizon, float(values.min()), float(values.max()), window,
                            bool(np.all(np.isfinite(logs))))


def particle_oracle(model: TreeModel, particles: int, steps: int, seed: int,
                    traits: Sequence[TraitPredicate] = ()) -> list[tuple[float, dict]]:
    """Monte Carlo estimate of ``(mean fitness, trait shares)`` for ``t = 0..steps-1``.

    Each step reweights particles by fitness, resamples them systematically
    and moves every particle to a random child.  Particles sitting on the
    same node are pooled, so memory scales with distinct nodes.
    """
    if particles < 1:
        raise ValueError("particles must be >= 1")
    rng = np.random.default_rng(seed)
    nodes = [model.root()]
    counts = np.array([particles], dtype=np.int64)
    out = []
    for t in range(steps):
        fit = np.array([model.state_fitness(n.state) for n in nodes], dtype=float)
        labs = [model.state_labels(n.state) for n in nodes]
        shares = {}
        for tr in traits:
            if tr.fitness_test is not None:
                mask = np.asarray(tr.fitness_test(fit), dtype=bool)
            else:
                mask = np.array([bool(tr.test(n, lab)) for n, lab in zip(nodes, labs)], dtype=bool)
            shares[tr.name] = float(counts[mask].sum()) / particles
        weights = counts * fit
        total = float(weights.sum())
        out.append((total / particles, shares))
        if not total > 0:
            raise Extinction(f"all particle weights are zero at t={t}")
        edges = np.cumsum(weights) / total
        edges[-1] = 1.0
        u = (rng.random() + np.arange(particles)) / particles
        picked = np.bincount(np.searchsorted(edges, u, side="right"), minlength=len(nodes))
        next_nodes = []
        next_counts = []
        for i in np.flatnonzero(picked).tolist():
            kids = model.state_children(nodes[i].state)
            probs = np.array([p for p, _ in kids], dtype=float)
            drawn = rng.multinomial(int(picked[i]), probs / probs.sum())
            for k in np.flatnonzero(drawn).tolist():
                next_nodes.append(nodes[i].child(k, kids[k][1]))
                next_counts.append(int(drawn[k]))
        nodes = next_nodes
        counts = np.array(next_counts, dtype=np.int64)
    return out


def check_contract(model: TreeModel, depth: int = 25, per_level: int = 64) -> list[str]:
    """Check probability sums, the childless-means-unfit rule and purity.

    Walks the tree breadth-first to ``depth``, keeping at most ``per_level``
    reachable nodes per level.  Returns a list of violation messages.
    """
    problems = []
    level = [model.root()]
    for d in range(depth + 1):
        nxt = []
        for node in level:
            f = model.state_fitness(node.state)
            kids = model.state_children(node.state)
            name = node.label() or "()"
            if not math.isfinite(f) or f < 0:
                problems.append(f"{name}: fitness {f!r} is negative or not a number")
            if model.state_fitness(node.state) != f or [p for p, _ in model.state_children(node.state)] != [p for p, _ in kids]:
                problems.append(f"{name}: generator is not pure")
            if model.state_labels(node.state) != model.state_labels(node.state):
                problems.append(f"{name}: labels are not pure")
            if not kids:
                if f != 0:
                    problems.append(f"{name}: childless node has fitness {f!r}")
                continue
            probs = [p for p, _ in kids]
            if min(probs) < 0:
                problems.append(f"{name}: negative child probability")
            if abs(math.fsum(probs) - 1.0) > PROB_TOL:
                problems.append(f"{name}: child probabilities sum to {math.fsum(probs)!r}")
            if model.state_is_ray(node.state):
                if len(kids) != 1 or kids[0][1] != node.state:
                    problems.append(f"{name}: ray node is not a deterministic self-copy")
            if d < depth:
                for k, (p, s) in enumerate(kids):
                    if p > 0 and len(nxt) < per_level:
                        nxt.append(node.child(k, s))
        level = nxt
        if not level:
            break
    return problems


def _fmt(value: float) -> str:
    return repr(float(value))


def trajectory_rows(trajectory: Trajectory) -> Iterator[list[str]]:
    yield ["t", "mean_fitness", "log_total_mass", "running_geometric_mean",
           "truncated_share_bound", *trajectory.trait_names]
    for r in trajectory.records:
        yield [str(r.time), _fmt(r.mean_fitness), _fmt(r.log_total_mass), _fmt(r.running_geometric_mean),
               _fmt(r.truncated_share_bound), *(_fmt(r.trait_shares[n]) for n in trajectory.trait_names)]


def write_trajectory_csv(trajectory: Trajectory, target) -> None:
    """Write the trajectory table to a path or an open text file."""
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", newline="") as fh:
            write_trajectory_csv(trajectory, fh)
        return
    writer = csv.writer(target, lineterminator="\n")
    writer.writerows(trajectory_rows(trajectory))


def trajectory_csv(trajectory: Trajectory) -> str:
    buf = io.StringIO()
    write_trajectory_csv(trajectory, buf)
    return buf.getvalue()


def write_frontier_json(frontier: Frontier, target) -> None:
    text = json.dumps(frontier.snapshot(), sort_keys=True)
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w") as fh:
            fh.write(text + "\n")
    else:
        target.write(text + "\n")
