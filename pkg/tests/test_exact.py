import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from l0conic.exact import (ENUM_LIMIT, GapUndefined, enumerate_miqo, keep_largest, optimality_gap,
                           support_qp, threshold_round)
from l0conic.model import SparsityPriors, build_instance, to_mmatrix


def test_keep_largest_example_and_ties():
    np.testing.assert_array_equal(keep_largest([3, 1, 2], 2), [True, False, True])
    np.testing.assert_array_equal(keep_largest([1, 1, 1], 2), [True, True, False])
    with pytest.raises(ValueError):
        keep_largest([1, 2], 3)


def test_threshold_round_example():
    inst = build_instance([3.0, 1.0, 2.0], lam=0.0)
    x_bar, ub = threshold_round([3.0, 1.0, 2.0], 2, inst)
    np.testing.assert_array_equal(x_bar, [3, 0, 2])
    assert ub == pytest.approx(1.0)


def test_threshold_round_flags_prior_violation():
    inst = build_instance([1.0, 1.0, 1.0, 1.0], priors=SparsityPriors.spikes(4, 1, 2))
    _, ub = threshold_round([1.0, 0.0, 0.0, 1.0], 2, inst)
    assert ub == float("inf")


def test_gap():
    assert optimality_gap(2.0, 1.5) == 25.0
    assert optimality_gap(1.0, 1.0) == 0.0
    for ub in (0.0, -1.0):
        with pytest.raises(GapUndefined):
            optimality_gap(ub, 0.0)


def test_enumerate_example1(example1):
    val, z, x = enumerate_miqo(example1)
    assert val == pytest.approx(149 / 150, abs=1e-12)
    np.testing.assert_array_equal(z, [0, 1])
    np.testing.assert_allclose(x, [0, 2 / 3], atol=1e-12)


def test_enumerate_example2(example2):
    val, z, x = enumerate_miqo(example2)
    assert val == pytest.approx(1.504, abs=1e-12)
    np.testing.assert_array_equal(z, [0, 1, 1])
    np.testing.assert_allclose(x, [0, 0.48, 0.74], atol=1e-12)


def test_enumerate_zero_signal():
    inst = build_instance(np.zeros(3), lam=1.0, priors=SparsityPriors.regularized(0.2))
    val, z, x = enumerate_miqo(inst)
    assert val == 0.0 and not x.any() and not z.any()


def test_enumerate_size_limit():
    with pytest.raises(ValueError):
        enumerate_miqo(build_instance(np.ones(ENUM_LIMIT + 1)))


@given(st.lists(st.floats(0, 1), min_size=2, max_size=6), st.floats(0, 3),
       st.lists(st.booleans(), min_size=6, max_size=6))
def test_support_qp_stationary_or_bounded(y, lam, mask):
    inst = build_instance(np.array(y), lam=lam)
    supp = np.array(mask[:inst.n])
    x = support_qp(inst, supp)
    assert np.all(x[~supp] == 0)
    assert np.all(x >= -1e-12) and np.all(x <= inst.big_m + 1e-12)
    Q = to_mmatrix(inst).to_dense()
    grad = (Q @ x - inst.y)[supp]
    free = (x[supp] > 1e-9) & (x[supp] < inst.big_m - 1e-9)
    assert np.all(np.abs(grad[free]) <= 1e-9)
    # KKT sign conditions at active bounds
    assert np.all(grad[x[supp] <= 1e-9] >= -1e-9)
    assert np.all(grad[x[supp] >= inst.big_m - 1e-9] <= 1e-9)


def test_support_qp_matches_grid_search():
    # a second route: brute force over a fine box grid
    inst = build_instance(np.array([0.1, 1.0]), lam=4.0)
    x = support_qp(inst, np.array([True, True]))
    grid = np.linspace(0, 1, 401)
    X1, X2 = np.meshgrid(grid, grid, indexing="ij")
    vals = (0.1 - X1) ** 2 + (1 - X2) ** 2 + 4 * (X1 - X2) ** 2
    assert inst.objective(x, np.zeros(2)) <= vals.min() + 1e-12


@given(st.lists(st.floats(0, 1), min_size=1, max_size=5), st.floats(0, 2), st.floats(0, 0.3))
def test_enumeration_beats_every_support(y, lam, mu0):
    inst = build_instance(np.array(y), lam=lam, priors=SparsityPriors.regularized(mu0))
    best, _, _ = enumerate_miqo(inst)
    for bits in itertools.product((False, True), repeat=inst.n):
        supp = np.array(bits)
        x = support_qp(inst, supp)
        assert best <= inst.objective(x, supp.astype(float)) + 1e-12
