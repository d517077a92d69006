import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evotree import gaussian
from evotree.gaussian import GaussianPeak

GOLDEN = (1 + math.sqrt(5)) / 2


@pytest.mark.parametrize("sigma2, s2, width", [
    (1.0, 1.0, GOLDEN),
    (2.0, 1.0, 1 + math.sqrt(3)),
])
def test_equilibrium_width(sigma2, s2, width):
    peak = GaussianPeak(landscape_variance=s2, mutation_variance=sigma2)
    assert gaussian.equilibrium_width(peak) == pytest.approx(width, abs=1e-12)


@pytest.mark.parametrize("dimension, lam", [(1, 0.6180339887498949), (2, 0.3819660112501051)])
def test_unit_peak_eigenvalue(dimension, lam):
    assert gaussian.peak_eigenvalue(GaussianPeak(dimension=dimension)) == pytest.approx(lam, abs=1e-12)


def test_equilibrium_pair():
    eq = gaussian.equilibrium(GaussianPeak())
    assert eq.width == pytest.approx(GOLDEN)
    assert eq.eigenvalue == pytest.approx(1 / math.sqrt(1 + GOLDEN))


@pytest.mark.parametrize("peak, half_width", [
    (GaussianPeak(), 10.0),
    (GaussianPeak(landscape_variance=4.0, mutation_variance=0.25), None),
])
def test_discretization_matches_closed_form(peak, half_width):
    grid = gaussian.discretized_dominant_eigenvalue(peak, half_width, 2001)
    assert grid == pytest.approx(gaussian.peak_eigenvalue(peak), rel=1e-3)


def test_discretization_guards():
    peak = GaussianPeak()
    with pytest.raises(ValueError):
        gaussian.discretized_dominant_eigenvalue(peak, 10.0, 2000)
    with pytest.raises(ValueError):
        gaussian.discretized_dominant_eigenvalue(peak, 1.0, 2001)
    with pytest.raises(ValueError):
        gaussian.discretized_dominant_eigenvalue(GaussianPeak(dimension=2, center=(0.0, 0.0)))


def test_flattest_pair():
    narrow = GaussianPeak(1.0, 0.05, 1.0)
    broad = GaussianPeak(0.8, 10.0, 1.0)
    cmp = gaussian.flattest_compare(narrow, broad)
    c1 = (1 + math.sqrt(1.2)) / 2
    c2 = (1 + math.sqrt(41)) / 2
    assert cmp.eigenvalue_a == pytest.approx(math.sqrt(0.05 / (0.05 + c1)), abs=1e-12)
    assert cmp.eigenvalue_b == pytest.approx(0.8 * math.sqrt(10 / (10 + c2)), abs=1e-12)
    assert cmp.eigenvalue_b == pytest.approx(0.68345, abs=1e-5)
    assert cmp.winner == "b"


def test_flattest_needs_shared_mutation():
    with pytest.raises(ValueError):
        gaussian.flattest_compare(GaussianPeak(mutation_variance=1.0), GaussianPeak(mutation_variance=2.0))


def test_invalid_peaks():
    with pytest.raises(ValueError):
        GaussianPeak(peak_height=0.0)
    with pytest.raises(ValueError):
        GaussianPeak(landscape_variance=-1.0)
    with pytest.raises(ValueError):
        GaussianPeak(dimension=2, center=(1.0,))


def test_landscape_model_columns():
    model, x = gaussian.landscape_model([GaussianPeak(center=(0.0,))], 1.0, -5.0, 5.0, 101)
    assert x.size == 101 and model.size == 101
    assert np.allclose(model.mutation.sum(axis=0), 1.0, atol=1e-12)
    assert model.fitness[50] == pytest.approx(1.0)


positive = st.floats(1e-3, 1e3)


@settings(max_examples=300, deadline=None)
@given(positive, positive, st.integers(1, 4), st.floats(0.1, 10))
def test_eigenvalue_forms_agree(s2, sigma2, d, f0):
    a, b = gaussian.both_eigenvalue_forms(GaussianPeak(f0, s2, sigma2, d))
    assert abs(a - b) <= 1e-12 * max(a, b)
    assert 0 < a < f0


@settings(max_examples=200, deadline=None)
@given(positive, positive)
def test_width_solves_fixed_point(s2, sigma2):
    c = gaussian.equilibrium_width(GaussianPeak(landscape_variance=s2, mutation_variance=sigma2))
    # the width is the positive root of c^2 - sigma2 c - sigma2 s2 = 0
    assert c ** 2 - sigma2 * c - sigma2 * s2 == pytest.approx(0.0, abs=1e-9 * max(1.0, c ** 2))
