"""Worked tree models with their closed-form reference quantities.

Every constructor returns a :class:`ZooModel`, a :class:`TreeModel` that
also carries its name, parameters and reference values.  Models can be
built by name from plain dictionaries with :func:`build`, which is what the
CLI and the experiment configs use.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Mapping

import numpy as np

from .errors import ModelError
from .tree import NO_LABELS, Labels, NodeRef, TreeModel

SequenceFn = Callable[[int], float]

SPINE = Labels(frozenset({"spine"}))
BURST = Labels(frozenset({"burst"}))
DEAD = Labels(frozenset({"dead"}))
LOCKED = Labels(frozenset({"locked"}))


class ZooModel(TreeModel):
    name = "model"

    def __init__(self, parameters: Mapping[str, Any] | None = None,
                 references: Mapping[str, Any] | None = None,
                 declared_fitness_supremum: float | None = None):
        self.parameters = dict(parameters or {})
        self.references = dict(references or {})
        self.declared_fitness_supremum = declared_fitness_supremum

    @property
    def model(self) -> "ZooModel":
        return self

    def describe(self) -> dict:
        return {
            "name": self.name,
            "parameters": {k: _plain(v) for k, v in self.parameters.items()},
            "declared_fitness_supremum": self.declared_fitness_supremum,
        }

    def __repr__(self):
        args = ", ".join(f"{k}={_plain(v)!r}" for k, v in self.parameters.items())
        return f"{self.name}({args})"


def _plain(value):
    if isinstance(value, ZooModel):
        return value.describe()
    if callable(value):
        return getattr(value, "spec", getattr(value, "__name__", repr(value)))
    return value


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0 < value < 1:
        raise ModelError(f"{name} must lie in (0, 1), got {float(value)!r}")
    return value


# sequences addressable by string, e.g. "const:2", "pow:4"

def _named(fn: Callable, spec: str) -> Callable:
    fn.spec = spec
    return fn


def sequence(spec) -> SequenceFn:
    """Turn a sequence spec (callable or string) into a function of ``t``.

    Strings: ``const:c``, ``inv`` (1/(t+1)), ``ratio`` (t/(t+1)), ``pow:r``
    (r**t), ``geometric:r`` (r**k block lengths), ``doubly`` (2**(2**k)).
    """
    if callable(spec):
        return spec
    if isinstance(spec, (int, float)):
        c = float(spec)
        return _named(lambda t: c, f"const:{c!r}")
    if not isinstance(spec, str):
        raise ModelError(f"cannot interpret sequence spec {spec!r}")
    kind, _, arg = spec.partition(":")
    try:
        if kind == "const":
            c = float(arg)
            return _named(lambda t: c, spec)
        if kind == "inv":
            return _named(lambda t: 1.0 / (t + 1), spec)
        if kind == "ratio":
            return _named(lambda t: t / (t + 1), spec)
        if kind == "pow":
            r = float(arg)
            return _named(lambda t: r ** t, spec)
        if kind == "geometric":
            r = int(arg)
            return _named(lambda k: r ** k, spec)
        if kind == "doubly":
            return _named(lambda k: 2 ** (2 ** k), spec)
    except ValueError:
        pass
    raise ModelError(f"unknown sequence spec {spec!r}")


class SingleRay(ZooModel):
    """One deterministic chain; the node at depth ``t`` has fitness ``seq(t)``."""

    name = "single_ray"

    def __init__(self, fitness_sequence, constant: bool = False):
        seq = sequence(fitness_sequence)
        super().__init__({"fitness_sequence": seq},
                         declared_fitness_supremum=float(seq(0)) if constant else None)
        self.seq = seq
        self.constant = constant

    def root_state(self):
        return 0

    def state_fitness(self, t):
        return float(self.seq(t))

    def state_children(self, t):
        return [(1.0, t if self.constant else t + 1)]

    def state_is_ray(self, t):
        return self.constant


def single_ray(fitness_sequence, constant: bool = False) -> SingleRay:
    """Deterministic ray.  ``constant=True`` promises the sequence never changes,
    letting the engine treat the whole chain as a ray."""
    return SingleRay(fitness_sequence, constant)


class TwoRay(ZooModel):
    """Root with two children, each heading its own deterministic ray."""

    name = "two_ray"
    _tags = (Labels(frozenset({"ray_a"})), Labels(frozenset({"ray_b"})))

    def __init__(self, fitness_a, fitness_b):
        a, b = sequence(fitness_a), sequence(fitness_b)
        super().__init__({"fitness_a": a, "fitness_b": b})
        self.seqs = (a, b)

    def root_state(self):
        return (None, 0)

    def state_fitness(self, state):
        which, t = state
        return float(self.seqs[0 if which is None else which](t))

    def state_children(self, state):
        which, t = state
        if which is None:
            return [(0.5, (0, 1)), (0.5, (1, 1))]
        return [(1.0, (which, t + 1))]

    def state_labels(self, state):
        return NO_LABELS if state[0] is None else self._tags[state[0]]


def two_ray(fitness_a, fitness_b) -> TwoRay:
    return TwoRay(fitness_a, fitness_b)


class OscillatingBlockRay(ZooModel):
    """Single ray alternating between blocks of ``low`` and ``high`` fitness.

    Block ``k`` lasts ``block_length(k)`` generations; even blocks are low.
    """

    name = "oscillating_block_ray"

    def __init__(self, low: float, high: float, block_length):
        low, high = float(low), float(high)
        if not 0 < low <= high:
            raise ModelError("need 0 < low <= high")
        lengths = sequence(block_length)
        super().__init__({"low": low, "high": high, "block_length": lengths},
                         declared_fitness_supremum=high)
        self.low, self.high, self.lengths = low, high, lengths

    def _length(self, k: int) -> int:
        n = int(self.lengths(k))
        if n < 1:
            raise ModelError(f"block {k} has non-positive length {n}")
        return n

    def root_state(self):
        return (0, 0)

    def state_fitness(self, state):
        return self.high if state[0] % 2 else self.low

    def state_children(self, state):
        block, pos = state
        if pos + 1 >= self._length(block):
            return [(1.0, (block + 1, 0))]
        return [(1.0, (block, pos + 1))]

    def block_boundaries(self, horizon: int) -> list[tuple[int, float]]:
        """``(T, exact running geometric mean over the first T generations)`` at each block end ``T <= horizon``."""
        out = []
        end, n_low, n_high, k = 0, 0, 0, 0
        log_low, log_high = math.log(self.low), math.log(self.high)
        while True:
            n = self._length(k)
            if end + n > horizon:
                return out
            end += n
            if k % 2:
                n_high += n
            else:
                n_low += n
            out.append((end, math.exp((n_low * log_low + n_high * log_high) / end)))
            k += 1


def oscillating_block_ray(low: float, high: float, block_length) -> OscillatingBlockRay:
    return OscillatingBlockRay(low, high, block_length)


class BinaryDyadic(ZooModel):
    """Complete binary tree; bit ``j`` of the path moves fitness by ``+-2**-j``."""

    name = "binary_dyadic"

    def __init__(self):
        super().__init__({}, {"root_exponent": 2.0}, declared_fitness_supremum=2.0)

    def root_state(self):
        return (0, 1.0)

    def state_fitness(self, state):
        return state[1]

    def state_children(self, state):
        depth, f = state
        step = 2.0 ** -(depth + 1)
        return [(0.5, (depth + 1, f - step)), (0.5, (depth + 1, f + step))]

    def closed_form_exponent(self, node: NodeRef) -> float:
        return binary_closed_form_exponent(node)


def binary_dyadic() -> BinaryDyadic:
    return BinaryDyadic()


def binary_fitness(path) -> float:
    return 1.0 + sum((2 * int(bit) - 1) * 2.0 ** -(j + 1) for j, bit in enumerate(path))


def binary_closed_form_exponent(node) -> float:
    """Supremum of descendant fitness below a binary-tree node: ``f + 2**-depth``."""
    path = node.path if isinstance(node, NodeRef) else tuple(node)
    return binary_fitness(path) + 2.0 ** -len(path)


def binary_moments(horizon: int) -> list[np.ndarray]:
    """Fitness moments of the binary tree's unnormalized population.

    Entry ``s`` holds ``G_s(k) = sum over depth-s nodes of y_n * f_n**k`` for
    ``k = 0..2*horizon + 1 - s``.  Splitting ``f`` into ``f +- d`` with mass
    ``y*f/2`` each gives ``G_{s+1}(k) = sum_{j even} C(k, j) d**j G_s(k+1-j)``,
    so the moments evolve exactly without enumerating ``2**s`` nodes.
    """
    top = 2 * horizon + 1
    binom = np.zeros((top + 1, top + 1))
    for k in range(top + 1):
        binom[k, :k + 1] = [math.comb(k, j) for j in range(k + 1)]
    g = np.ones(top + 1)
    out = [g]
    for s in range(horizon):
        d = 2.0 ** -(s + 1)
        n = g.size - 1
        nxt = np.zeros(n)
        for j in range(0, n, 2):
            nxt[j:] += binom[j:n, j] * d ** j * g[1:n - j + 1]
        g = nxt
        out.append(g)
    return out


def locked_binary_reference(eta: float, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact locked share and ``log Z(t)`` for ``lock(binary_dyadic(), eta)``, ``t = 0..horizon``.

    The unlocked part is the binary tree scaled by ``(1-eta)**t``; a locked
    ray leaving a depth-``s`` node carries ``eta (1-eta)**s y_n f_n**(t-s)``
    at time ``t``.  Both sums reduce to the moments of :func:`binary_moments`.
    """
    eta = _check_unit("eta", eta)
    g = binary_moments(horizon)
    share = np.zeros(horizon + 1)
    log_mass = np.zeros(horizon + 1)
    for t in range(horizon + 1):
        unlocked = (1 - eta) ** t * g[t][0]
        locked = eta * math.fsum((1 - eta) ** s * g[s][t - s] for s in range(t))
        share[t] = locked / (locked + unlocked)
        log_mass[t] = math.log(locked + unlocked)
    return share, log_mass


def burst_references(eta: float, b: float) -> dict:
    ratio = (1 - eta) / ((1 - b * b) * eta)
    odd = (1 + b * b * ratio) / (1 + b * ratio + (1 - eta) * (1 + b * ratio) / eta)
    even = (1 + b * ratio) / (1 + ratio + (1 - eta) * b * b * ratio / eta)
    return {
        "R": ratio,
        "mean_fitness_odd": odd,
        "mean_fitness_even": even,
        "geometric_floor": eta * 1.0,
    }


class BurstSpine(ZooModel):
    """Fitness-1 spine shedding burst lineages of fitness 0 (even depth) or ``b`` (odd depth)."""

    name = "burst_spine"

    def __init__(self, eta: float, b: float):
        eta, b = _check_unit("eta", eta), _check_unit("b", b)
        super().__init__({"eta": eta, "b": b}, burst_references(eta, b), declared_fitness_supremum=1.0)
        self.eta, self.b = eta, b

    def root_state(self):
        return ("spine", 0)

    def state_fitness(self, state):
        kind, value = state
        if kind == "spine":
            return 1.0
        return value if kind == "burst" else 0.0

    def state_children(self, state):
        kind, value = state
        if kind == "spine":
            q = self.b if value % 2 else 0.0
            return [(self.eta, ("spine", value + 1)), (1 - self.eta, ("burst", q))]
        if kind == "burst" and value > 0:
            return [(self.eta, ("burst", value)), (1 - self.eta, ("dead", 0.0))]
        return []

    def state_labels(self, state):
        return SPINE if state[0] == "spine" else BURST if state[0] == "burst" else DEAD


def burst_spine(eta: float, b: float) -> BurstSpine:
    return BurstSpine(eta, b)


class Locked(ZooModel):
    """Inner model where every reproducing node also spawns a locked copy of itself.

    The locked child is appended after the inner children and receives
    probability ``eta``; the inner children are scaled by ``1 - eta``.
    """

    name = "lock"

    def __init__(self, inner: TreeModel, eta: float):
        eta = _check_unit("eta", eta)
        super().__init__({"inner": inner, "eta": eta},
                         getattr(inner, "references", {}),
                         declared_fitness_supremum=inner.declared_fitness_supremum)
        self.inner, self.eta = inner, eta

    def root_state(self):
        return (False, self.inner.root_state())

    def state_fitness(self, state):
        locked, payload = state
        return payload if locked else self.inner.state_fitness(payload)

    def state_children(self, state):
        locked, payload = state
        if locked:
            return [(1.0, state)]
        f = self.inner.state_fitness(payload)
        kids = [(p * (1 - self.eta), (False, s)) for p, s in self.inner.state_children(payload)]
        if f > 0:
            kids.append((self.eta, (True, f)))
        return kids

    def state_labels(self, state):
        return LOCKED if state[0] else self.inner.state_labels(state[1])

    def state_is_ray(self, state):
        return state[0]


def lock(inner: TreeModel, eta: float) -> Locked:
    return Locked(inner, eta)


class NonattainedSpine(ZooModel):
    """Spine of fitness ``n/(n+1)`` shedding locked rays; the supremum 1 is never attained."""

    name = "nonattained_spine"

    def __init__(self, eta: float):
        eta = _check_unit("eta", eta)
        super().__init__({"eta": eta}, {"f_star": 1.0, "first_fitness": 0.5}, declared_fitness_supremum=1.0)
        self.eta = eta

    def root_state(self):
        return ("spine", 1)

    def state_fitness(self, state):
        n = state[1]
        return n / (n + 1)

    def state_children(self, state):
        kind, n = state
        if kind == "locked":
            return [(1.0, state)]
        return [(1 - self.eta, ("spine", n + 1)), (self.eta, ("locked", n))]

    def state_labels(self, state):
        return LOCKED if state[0] == "locked" else SPINE

    def state_is_ray(self, state):
        return state[0] == "locked"


def nonattained_spine(eta: float) -> NonattainedSpine:
    return NonattainedSpine(eta)


class UnboundedSpine(ZooModel):
    """Spine with fitness ``growth(t)``: ``eta`` to a locked copy, ``epsilon`` onward, the rest to a dead leaf."""

    name = "unbounded_spine"
    horizon_guard = 300

    def __init__(self, eta: float, epsilon: float, growth="pow:4"):
        eta, epsilon = _check_unit("eta", eta), float(epsilon)
        if not 0 < epsilon < 1 - eta:
            raise ModelError(f"epsilon must lie in (0, 1 - eta), got {float(epsilon)!r}")
        g = sequence(growth)
        super().__init__({"eta": eta, "epsilon": epsilon, "growth": g},
                         {"horizon_guard": self.horizon_guard}, declared_fitness_supremum=math.inf)
        self.eta, self.epsilon, self.growth = eta, epsilon, g

    def root_state(self):
        return ("spine", 0)

    def state_fitness(self, state):
        kind, value = state
        if kind == "spine":
            if value > self.horizon_guard:
                raise ModelError(f"unbounded_spine is only supported to depth {self.horizon_guard}")
            return float(self.growth(value))
        return value if kind == "locked" else 0.0

    def state_children(self, state):
        kind, value = state
        if kind == "locked":
            return [(1.0, state)]
        if kind == "dead":
            return []
        return [
            (self.epsilon, ("spine", value + 1)),
            (self.eta, ("locked", float(self.growth(value)))),
            (1 - self.eta - self.epsilon, ("dead", 0.0)),
        ]

    def state_labels(self, state):
        return {"spine": SPINE, "locked": LOCKED, "dead": DEAD}[state[0]]

    def state_is_ray(self, state):
        return state[0] == "locked"


def unbounded_spine(eta: float, epsilon: float, growth="pow:4") -> UnboundedSpine:
    return UnboundedSpine(eta, epsilon, growth)


class TensorProduct(ZooModel):
    """Pairs of nodes evolving independently, with additive fitness.

    Children enumerate ``(c-child, d-child)`` lexicographically.  A
    coordinate with no children (a dead leaf) stays where it is, so the pair
    keeps reproducing through the other coordinate.
    """

    name = "tensor_product"

    def __init__(self, model_c: TreeModel, model_d: TreeModel):
        sup_c, sup_d = model_c.declared_fitness_supremum, model_d.declared_fitness_supremum
        sup = None if sup_c is None or sup_d is None else sup_c + sup_d
        super().__init__({"model_c": model_c, "model_d": model_d}, {"f_star": sup}, declared_fitness_supremum=sup)
        self.c, self.d = model_c, model_d
        self._label_cache: dict = {}

    def root_state(self):
        return (self.c.root_state(), self.d.root_state())

    def state_fitness(self, state):
        return self.c.state_fitness(state[0]) + self.d.state_fitness(state[1])

    def _kids(self, model, s):
        kids = model.state_children(s)
        return kids if kids else [(1.0, s)]

    def state_children(self, state):
        sc, sd = state
        if self.state_is_ray(state):
            return [(1.0, state)]
        kc, kd = self._kids(self.c, sc), self._kids(self.d, sd)
        return [(pc * pd, (cc, dd)) for pc, cc in kc for pd, dd in kd]

    def state_labels(self, state):
        sc, sd = state
        lc, ld = self.c.state_labels(sc), self.d.state_labels(sd)
        tags = {"c:" + t for t in lc.tags} | {"d:" + t for t in ld.tags}
        if "locked" in lc.tags and "locked" in ld.tags:
            tags.add("locked")
        scalars = {"f_C": self.c.state_fitness(sc), "f_D": self.d.state_fitness(sd)}
        return Labels(frozenset(tags), scalars)

    def state_is_ray(self, state):
        return self.c.state_is_ray(state[0]) and self.d.state_is_ray(state[1])


def tensor_product(model_c: TreeModel, model_d: TreeModel) -> TensorProduct:
    return TensorProduct(model_c, model_d)


# name -> (constructor, required params, optional params)
REGISTRY: dict[str, tuple[Callable, tuple, tuple]] = {
    "single_ray": (single_ray, ("fitness_sequence",), ("constant",)),
    "two_ray": (two_ray, ("fitness_a", "fitness_b"), ()),
    "oscillating_block_ray": (oscillating_block_ray, ("low", "high", "block_length"), ()),
    "binary_dyadic": (binary_dyadic, (), ()),
    "burst_spine": (burst_spine, ("eta", "b"), ()),
    "lock": (lock, ("inner", "eta"), ()),
    "nonattained_spine": (nonattained_spine, ("eta",), ()),
    "unbounded_spine": (unbounded_spine, ("eta", "epsilon"), ("growth",)),
    "tensor_product": (tensor_product, ("model_c", "model_d"), ()),
}

_NESTED = {"inner", "model_c", "model_d"}


def build(name: str, params: Mapping[str, Any] | None = None) -> ZooModel:
    """Construct a zoo model from its name and a parameter mapping.

    Nested models (``inner``, ``model_c``, ``model_d``) are given as
    ``{"model": name, "params": {...}}``.
    """
    if name not in REGISTRY:
        raise ModelError(f"unknown model {name!r}; known: {', '.join(sorted(REGISTRY))}")
    ctor, required, optional = REGISTRY[name]
    params = dict(params or {})
    missing = [p for p in required if p not in params]
    if missing:
        raise ModelError(f"model {name!r} is missing parameter(s): {', '.join(missing)}")
    unknown = sorted(set(params) - set(required) - set(optional))
    if unknown:
        raise ModelError(f"model {name!r} got unknown parameter(s): {', '.join(unknown)}")
    for key in _NESTED & set(params):
        spec = params[key]
        if not isinstance(spec, Mapping) or "model" not in spec:
            raise ModelError(f"parameter {key!r} of {name!r} must be {{'model': ..., 'params': ...}}")
        extra = set(spec) - {"model", "params"}
        if extra:
            raise ModelError(f"nested model spec has unknown key(s): {', '.join(sorted(extra))}")
        params[key] = build(spec["model"], spec.get("params"))
    try:
        return ctor(**params)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"bad parameters for {name!r}: {exc}") from exc
