import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evotree import analysis, tree, zoo
from evotree.errors import FrontierExplosion, MissingCoordinateLabels
from evotree.tree import ExponentEstimate


def est(lower, upper):
    return ExponentEstimate(100, lower, upper, 25, True)


# preservation

def test_burst_spine_preserves():
    res = analysis.eta_preservation_check(zoo.burst_spine(0.5, 0.5), 12, 0.5)
    assert res.holds and res.witness is None and res.complete


@pytest.mark.parametrize("inner", [zoo.binary_dyadic(), zoo.burst_spine(0.5, 0.5), zoo.two_ray(1.0, "inv")])
def test_lock_preserves(inner):
    assert analysis.eta_preservation_check(zoo.lock(inner, 0.3), 8, 0.3).holds


def test_decreasing_ray_fails_with_witness():
    res = analysis.eta_preservation_check(zoo.two_ray(1.0, "inv"), 10, 0.5)
    assert not res.holds
    assert res.witness.path == (1,)


def test_binary_does_not_preserve_at_high_eta():
    # only the "1" child keeps or raises fitness, with probability one half
    model = zoo.binary_dyadic()
    assert analysis.eta_preservation_check(model, 6, 0.5).holds
    assert not analysis.eta_preservation_check(model, 6, 0.6).holds


def test_preservation_node_cap():
    with pytest.raises(FrontierExplosion) as info:
        analysis.eta_preservation_check(zoo.binary_dyadic(), 30, 0.5, node_cap=1000)
    assert not info.value.partial.complete


# classification

@pytest.mark.parametrize("s, t, verdict", [
    (est(2, 2), est(1, 1), "takes_over"),
    (est(1, 1), est(2, 2), "dies_out"),
    (est(1.5, 1.5), est(1.5, 1.5), "inconclusive"),
    (est(1.0, 1.8), est(1.0, 1.2), "survives"),
])
def test_classification(s, t, verdict):
    assert analysis.classify_partition(s, t).verdict == verdict


bounds = st.tuples(st.floats(0.1, 3), st.floats(0, 1)).map(lambda p: est(p[0], p[0] + p[1]))


@settings(max_examples=300)
@given(bounds, bounds)
def test_classification_swap(s, t):
    a = analysis.classify_partition(s, t).verdict
    b = analysis.classify_partition(t, s).verdict
    if a == "takes_over":
        assert b == "dies_out"
    if a == "dies_out":
        assert b == "takes_over"
    if a == "inconclusive":
        assert b in ("inconclusive", "survives")


def test_classification_margin():
    with pytest.raises(ValueError):
        analysis.classify_partition(est(1, 1), est(1, 1), margin=0)


# concentration

def test_concentration_nonattained():
    model = zoo.nonattained_spine(0.5)
    traj = tree.run_tree(model, 2000, 0.0)
    assert analysis.concentration_mass(traj.final, model, 1.0, 0.1) > 0.95


def test_concentration_unbounded_stays_away():
    model = zoo.unbounded_spine(0.5, 0.1)
    traj = tree.run_tree(model, 40, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mass = analysis.concentration_mass(traj.final, zoo.single_ray("inv"), None, 1e-3)
    assert mass < 0.9
    with pytest.warns(RuntimeWarning):
        analysis.resolve_f_star(zoo.single_ray("inv"), 3.0)
    assert analysis.resolve_f_star(model, 3.0) == math.inf


# utility

def test_log_utility_flags_zero_mass():
    model = zoo.burst_spine(0.5, 0.5)
    traj = tree.run_tree(model, 3, 0.0)
    value = analysis.expected_utility(traj.final, model, analysis.utility_profile("log"))
    assert value.value == -math.inf and value.flagged
    assert 0 < value.negative_infinite_share < 1


def test_utility_profiles():
    model = zoo.binary_dyadic()
    fr, _ = tree.advance(model, tree.root_frontier(model), 0.0)
    assert analysis.expected_utility(fr, model, analysis.utility_profile("identity")).value == 1.0
    assert analysis.expected_utility(fr, model, analysis.utility_profile("square")).value == 1.25
    const = analysis.utility_profile("const:2")
    assert analysis.expected_utility(fr, model, const).value == 2.0
    assert const.bounded and const.spot_check([0, 1, 100])
    with pytest.raises(ValueError):
        analysis.utility_profile("cube")


# coordinates

def test_coordinate_means_add_up():
    non = zoo.nonattained_spine(0.5)
    model = zoo.tensor_product(non, non)
    traj = tree.run_tree(model, 50, 0.0)
    mc, md = analysis.coordinate_means(traj.final, model)
    assert mc + md == pytest.approx(traj.final.mean_fitness, abs=1e-12)
    assert mc == pytest.approx(md, abs=1e-12)


def test_coordinate_means_need_labels():
    model = zoo.binary_dyadic()
    with pytest.raises(MissingCoordinateLabels):
        analysis.coordinate_means(tree.root_frontier(model), model)


# geometric mean floor

def test_floor_on_burst_spine():
    traj = tree.run_tree(zoo.burst_spine(0.5, 0.5), 200, 0.0)
    check = analysis.geometric_mean_floor_check(traj, 0.5, 1.0)
    assert check.passes
    assert check.floor_estimate == pytest.approx(0.5, abs=5e-3)


def test_floor_fails_without_preservation():
    lone = tree.run_tree(zoo.single_ray("inv"), 200, 0.0)
    assert not analysis.geometric_mean_floor_check(lone, 0.5, 1.0).passes


def test_min_trailing_share():
    traj = tree.run_tree(zoo.lock(zoo.binary_dyadic(), 0.25), 10, 0.0, [tree.tag_trait("locked")])
    assert analysis.min_trailing_share(traj, "locked") >= 0.25 - 1e-12


def test_constant_ray_floor():
    traj = tree.run_tree(zoo.single_ray(1.5, constant=True), 20, 0.0)
    check = analysis.geometric_mean_floor_check(traj, 0.3, 1.5)
    assert check.floor_estimate == pytest.approx(1.5, abs=1e-15) and check.passes


# invariants

def test_identity_utility_is_mean_fitness():
    model = zoo.burst_spine(0.5, 0.3)
    seen = []
    ident = analysis.utility_profile("identity")
    tree.run_tree(model, 30, 0.0, on_step=lambda fr, rec: seen.append(
        (analysis.expected_utility(fr, model, ident).value, rec.mean_fitness)))
    assert all(u == m for u, m in seen)


_run = tree.run_tree(zoo.nonattained_spine(0.5), 300, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-4, 1.0), st.floats(1e-4, 1.0))
def test_concentration_monotone_in_epsilon(a, b):
    small, large = sorted((a, b))
    model = zoo.nonattained_spine(0.5)
    assert analysis.concentration_mass(_run.final, model, 1.0, small) <= \
        analysis.concentration_mass(_run.final, model, 1.0, large)


LOCKABLE = [
    zoo.single_ray("inv"), zoo.two_ray(1.0, "ratio"), zoo.oscillating_block_ray(1, 2, "geometric:4"),
    zoo.binary_dyadic(), zoo.burst_spine(0.5, 0.5), zoo.nonattained_spine(0.5), zoo.unbounded_spine(0.5, 0.1),
]


@pytest.mark.parametrize("eta", [0.1, 0.25, 0.5])
@pytest.mark.parametrize("inner", LOCKABLE, ids=lambda m: type(m).__name__)
def test_every_locked_model_preserves(inner, eta):
    assert analysis.eta_preservation_check(zoo.lock(inner, eta), 7, eta).holds
