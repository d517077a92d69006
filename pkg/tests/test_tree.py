import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evotree import tree, zoo
from evotree.errors import Extinction, TooShort
from evotree.tree import NodeRef, TreeModel


class RandomTree(TreeModel):
    """Pseudo-random finite-branching tree; every node is generated from its key."""

    def __init__(self, seed, zero_rate=0.15):
        self.seed = seed
        self.zero_rate = zero_rate

    def _rng(self, key):
        return np.random.default_rng([self.seed, key])

    def root_state(self):
        return 0

    def state_fitness(self, key):
        rng = self._rng(key)
        if key and rng.random() < self.zero_rate:
            return 0.0
        return float(rng.uniform(0.2, 2.0))

    def state_children(self, key):
        if self.state_fitness(key) == 0:
            return []
        rng = self._rng(key + 10**9)
        k = int(rng.integers(1, 4))
        p = rng.dirichlet(np.ones(k))
        return [(float(pi), key * 4 + i + 1) for i, pi in enumerate(p)]


class Dead(TreeModel):
    def root_state(self):
        return 0

    def state_fitness(self, s):
        return 0.0

    def state_children(self, s):
        return []


# frozen small cases

def test_root_frontier():
    fr = tree.root_frontier(zoo.binary_dyadic())
    assert fr.as_dict() == {NodeRef(): 1.0}
    assert fr.depth == 0 and fr.log_total_mass == 0.0 and fr.truncated_share_bound == 0.0


def test_unit_ray_is_static():
    traj = tree.run_tree(zoo.single_ray("const:1", constant=True), 50, 0.0)
    assert len(traj.final) == 1
    assert traj.final.total_share() == 1.0
    assert np.all(traj.log_total_mass == 0.0)


def test_binary_root_step():
    model = zoo.binary_dyadic()
    fr, rec = tree.advance(model, tree.root_frontier(model), 0.0)
    shares = {n.path: x for n, x in fr.items()}
    assert shares == {(0,): 0.5, (1,): 0.5}
    assert sorted(fr.fitness.tolist()) == [0.5, 1.5]
    assert rec.mean_fitness == 1.0
    assert fr.mean_fitness == 1.0


def test_burst_spine_first_step():
    model = zoo.burst_spine(0.5, 0.5)
    spine, burst = tree.tag_trait("spine"), tree.tag_trait("burst")
    fr, rec = tree.advance(model, tree.root_frontier(model), 0.0)
    assert rec.mean_fitness == 1.0
    assert tree.trait_share(fr, model, spine) == 0.5
    assert tree.trait_share(fr, model, burst) == 0.5


def test_zero_steps():
    traj = tree.run_tree(zoo.binary_dyadic(), 0)
    assert len(traj) == 0
    assert traj.final.depth == 0


def test_decreasing_ray_geometric_mean():
    traj = tree.run_tree(zoo.single_ray("inv"), 200, 0.0)
    gm = traj.running_geometric_mean
    assert np.all(np.diff(gm) < 0)
    assert gm[-1] < 0.02


def test_trait_shares_edge_cases():
    model = zoo.lock(zoo.binary_dyadic(), 0.25)
    fr, _ = tree.advance(model, tree.root_frontier(model), 0.0)
    assert tree.trait_share(fr, model, tree.all_trait()) == pytest.approx(1.0)
    assert tree.trait_share(fr, model, tree.tag_trait("nothing")) == 0.0
    assert tree.trait_share(fr, model, tree.tag_trait("locked")) == pytest.approx(0.25, abs=1e-15)


def test_subtree_trait():
    model = zoo.binary_dyadic()
    traj = tree.run_tree(model, 6, 0.0, [tree.subtree_trait((1,))])
    # the "1" subtree is fitter, so it gains share after the first step
    assert traj.column("subtree:1")[1] == 0.5
    assert traj.final_trait_shares["subtree:1"] > 0.5


def test_locked_share_floor():
    eta = 0.3
    traj = tree.run_tree(zoo.lock(zoo.binary_dyadic(), eta), 10, 0.0, [tree.tag_trait("locked")])
    shares = np.append(traj.column("locked")[1:], traj.final_trait_shares["locked"])
    assert np.all(shares >= eta - 1e-12)


def test_locked_lineage_is_geometric():
    model = zoo.lock(zoo.binary_dyadic(), 0.25)
    origin = model.node_at((2,))
    assert "locked" in model.labels(origin).tags
    f = model.fitness(origin)
    sizes = tree.lineage_sizes(model, origin, 30)
    assert sizes[0] == 0.0
    assert np.array_equal(sizes, np.arange(31) * math.log(f))


def test_binary_node_zero_lineage():
    model = zoo.binary_dyadic()
    sizes = tree.lineage_sizes(model, model.node_at((0,)), 16)
    values = np.exp(sizes[1:] / np.arange(1, 17))
    assert np.all(values <= 1.0 + 1e-12)
    assert np.all(np.diff(values[1:]) > 0)
    assert zoo.binary_closed_form_exponent((0,)) == 1.0


def test_exponent_estimate_geometric():
    est = tree.exponent_estimate(np.arange(41) * math.log(2), window=7)
    assert est.lower == pytest.approx(2.0) and est.upper == pytest.approx(2.0)
    assert est.horizon == 40 and est.window == 7 and est.full_sequence_available


def test_exponent_estimate_too_short():
    with pytest.raises(TooShort):
        tree.exponent_estimate([0.0, 1.0], window=2)


def test_extinction():
    with pytest.raises(Extinction) as info:
        tree.run_tree(Dead(), 5)
    exc = info.value
    assert len(exc.frontier) == 0
    assert exc.record.time == 0
    assert exc.trajectory.extinct_at == 0
    assert exc.record.log_total_mass == -math.inf


def test_lineage_after_extinction():
    model = zoo.burst_spine(0.5, 0.5)
    burst = model.node_at((1,))
    sizes = tree.lineage_sizes(model, burst, 5)
    assert sizes[0] == 0.0
    assert np.isneginf(sizes[-1])


def test_pruning_bound():
    model = zoo.binary_dyadic()
    traj = tree.run_tree(model, 14, 1e-4)
    bounds = np.array([r.truncated_share_bound for r in traj.records])
    assert np.all(np.diff(bounds) >= 0)
    assert bounds[-1] > 0
    assert traj.final.total_share() == pytest.approx(1.0, abs=1e-12)
    exact = tree.run_tree(model, 10, 0.0)
    assert all(r.truncated_share_bound == 0.0 for r in exact.records)


def test_frontier_cap(monkeypatch):
    monkeypatch.setenv("EVOTREE_MAX_FRONTIER", "100")
    from evotree.errors import FrontierExplosion
    with pytest.raises(FrontierExplosion):
        tree.run_tree(zoo.binary_dyadic(), 10, 0.0)


# particle oracle

def test_oracle_exact_on_ray():
    model = zoo.single_ray("inv")
    traj = tree.run_tree(model, 10, 0.0)
    est = tree.particle_oracle(model, 7, 10, seed=3)
    assert [m for m, _ in est] == pytest.approx(traj.mean_fitness.tolist(), abs=1e-15)


def test_oracle_binary():
    model = zoo.binary_dyadic()
    traj = tree.run_tree(model, 11, 0.0)
    est = np.array([m for m, _ in tree.particle_oracle(model, 100_000, 11, seed=11)])
    assert np.max(np.abs(est - traj.mean_fitness)) <= 0.02


@pytest.mark.slow
def test_oracle_burst_traits():
    model = zoo.burst_spine(0.5, 0.5)
    traits = [tree.tag_trait("spine"), tree.tag_trait("burst"), tree.zero_fitness_trait()]
    traj = tree.run_tree(model, 20, 0.0, traits)
    est = tree.particle_oracle(model, 200_000, 20, seed=5, traits=traits)
    for t, (_, shares) in enumerate(est):
        for tr in traits:
            assert abs(shares[tr.name] - traj.column(tr.name)[t]) <= 0.01


# node identities

@given(st.lists(st.integers(0, 3), max_size=30))
def test_noderef_roundtrip(path):
    node = NodeRef.from_path(path)
    assert node.path == tuple(path)
    assert node.depth == len(path)
    step = NodeRef()
    for i in path:
        step = step.child(i, None)
    assert step == node and hash(step) == hash(node)
    assert node.startswith(path[: len(path) // 2])


def test_ray_extension_matches_children():
    a = NodeRef.from_path((1, 0)).extend(0, 5)
    assert a.path == (1, 0, 0, 0, 0, 0, 0)
    assert a.runs == ((1, 1), (0, 6))


def test_contract_checker():
    assert tree.check_contract(RandomTree(1), depth=6) == []
    assert tree.check_contract(zoo.burst_spine(0.5, 0.5)) == []

    class Leaky(RandomTree):
        def state_children(self, key):
            return [(p * 0.9, s) for p, s in super().state_children(key)]

    assert any("sum to" in p for p in tree.check_contract(Leaky(1), depth=3))


def test_csv_export(tmp_path):
    traj = tree.run_tree(zoo.burst_spine(0.5, 0.5), 5, 0.0, [tree.tag_trait("spine")])
    text = tree.trajectory_csv(traj)
    lines = text.strip().splitlines()
    assert lines[0] == "t,mean_fitness,log_total_mass,running_geometric_mean,truncated_share_bound,spine"
    assert len(lines) == 6
    assert lines[1].split(",")[:2] == ["0", "1.0"]


# properties on random trees

random_runs = st.tuples(st.integers(0, 10_000), st.integers(1, 8), st.sampled_from([0.0, 1e-6, 1e-3]))


@settings(max_examples=60, deadline=None)
@given(random_runs)
def test_engine_invariants(case):
    seed, steps, prune = case
    model = RandomTree(seed)
    fr = tree.root_frontier(model)
    prev_log, prev_bound = 0.0, 0.0
    for t in range(steps):
        try:
            nxt, rec = tree.advance(model, fr, prune)
        except Extinction:
            return
        assert rec.mean_fitness == pytest.approx(float(np.dot(fr.shares, fr.fitness)), rel=1e-12)
        assert rec.log_total_mass - prev_log == pytest.approx(math.log(rec.mean_fitness), abs=1e-10)
        assert abs(nxt.total_share() - 1) <= 1e-10
        assert all(n.depth == t + 1 for n in nxt.nodes())
        assert nxt.truncated_share_bound >= prev_bound
        if prune == 0:
            assert nxt.truncated_share_bound == 0.0
        prev_log, prev_bound, fr = rec.log_total_mass, nxt.truncated_share_bound, nxt


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.integers(0, 2), min_size=1, max_size=3), st.integers(1, 5))
def test_lineage_monotonicity(seed, path, t):
    model = RandomTree(seed, zero_rate=0.05)
    origin = model.root()
    node = origin
    for i in path:
        kids = model.children(node)
        if not kids:
            return
        node = model.node_at(node.path + (i % len(kids),))
    target, log_q = tree.descend(model, origin, node.path)
    log_m = tree.lineage_sizes(model, target, t)[t]
    log_n = tree.lineage_sizes(model, origin, t + len(path))[t + len(path)]
    if log_m > -math.inf and log_q > -math.inf:
        assert log_n >= log_q + log_m - 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 7))
def test_lineage_mass_recursion(seed, steps):
    model = RandomTree(seed, zero_rate=0.05)
    sizes = tree.lineage_sizes(model, model.root(), steps)
    traj_logs = [0.0]
    try:
        traj = tree.run_tree(model, steps, 0.0)
        traj_logs = traj.log_sizes()
    except Extinction as exc:
        traj_logs = exc.trajectory.log_sizes()
    n = min(len(traj_logs), sizes.size)
    assert np.allclose(sizes[:n], traj_logs[:n], atol=1e-10)


# state merging

@pytest.mark.parametrize("model", [
    zoo.burst_spine(0.5, 0.5),
    zoo.tensor_product(zoo.lock(zoo.nonattained_spine(0.5), 0.5), zoo.nonattained_spine(0.5)),
], ids=["burst", "tensor"])
def test_merging_is_exact(model):
    traits = [tree.zero_fitness_trait(), tree.tag_trait("locked")]
    plain = tree.run_tree(model, 14, 0.0, traits)
    merged = tree.run_tree(model, 14, 0.0, traits, merge_states=True)
    assert len(merged.final) < len(plain.final)
    assert np.allclose(merged.log_sizes(), plain.log_sizes(), atol=1e-13)
    for name in ("zero_fitness", "locked"):
        assert np.allclose(merged.column(name), plain.column(name), atol=1e-13)
        assert merged.final_trait_shares[name] == pytest.approx(plain.final_trait_shares[name], abs=1e-13)


def test_merging_refuses_path_traits():
    with pytest.raises(ValueError):
        tree.run_tree(zoo.burst_spine(0.5, 0.5), 3, traits=[tree.subtree_trait((0,))], merge_states=True)
