import csv

import numpy as np
import pytest

from l0conic.cutting import solve_decomp
from l0conic.lagrangian import (BlockPartition, block_instance, boundary_terms, eval_block,
                                run_subgradient, subgradient)
from l0conic.model import SparsityPriors, Status, build_instance


def spiky(n, seed, mu0=0.01, lam=0.3):
    rng = np.random.default_rng(seed)
    y = np.zeros(n)
    for start in rng.integers(0, n - 8, size=max(1, n // 40)):
        y[start:start + 8] += rng.uniform(0.3, 1.0)
    y += np.abs(rng.normal(0, 0.05, n))
    return build_instance(y / y.max(), lam=lam, priors=SparsityPriors.regularized(mu0))


def test_uniform_partition():
    part = BlockPartition.uniform(10, 3)
    assert part.starts == (0, 3, 6, 10)
    assert part.m == 3 and part.n == 10
    assert part.block(2) == slice(6, 10)
    for bad in ((10, 0), (3, 4)):
        with pytest.raises(ValueError):
            BlockPartition.uniform(*bad)
    with pytest.raises(ValueError):
        BlockPartition((0, 3, 3, 5))


def test_boundary_terms_signs():
    part = BlockPartition.uniform(9, 3)
    gamma = np.array([0.2, -0.4])
    lin, const = boundary_terms(part, 1, gamma, lam=0.5)
    np.testing.assert_allclose(lin, [-0.2, 0.0, -0.4])
    assert const == pytest.approx(-0.04 / 2.0)
    lin0, const0 = boundary_terms(part, 0, gamma, lam=0.5)
    np.testing.assert_allclose(lin0, [0, 0, 0.2])
    assert const0 == 0.0


def test_block_instance_keeps_data():
    inst = spiky(40, 0)
    part = BlockPartition.uniform(40, 4)
    blk = block_instance(inst, part, 2)
    np.testing.assert_array_equal(blk.y, inst.y[20:30])
    assert blk.lam == inst.lam and blk.big_m == inst.big_m


def test_eval_block_index_check():
    inst = spiky(40, 0)
    with pytest.raises(IndexError):
        eval_block(inst, BlockPartition.uniform(40, 2), 2, np.zeros(1))


def test_single_block_is_direct_decomp():
    inst = spiky(120, 1)
    rep = run_subgradient(inst, 1)
    assert rep.iterations == 0 and rep.extra["blocks_solved"] == [1]
    assert rep.status is Status.OPTIMAL
    assert rep.objective == pytest.approx(solve_decomp(inst).objective, abs=1e-4)


def test_zero_multiplier_and_zero_ends_give_zero_subgradient():
    part = BlockPartition.uniform(6, 2)
    assert subgradient(part, np.zeros(1), np.array([1, 1, 0, 0, 1, 1.0]), 0.3)[0] == 0.0
    assert subgradient(part, np.zeros(1), np.array([1, 1, 1e-9, 0, 1, 1.0]), 0.3)[0] == 0.0


def test_subgradient_matches_finite_differences():
    inst = spiky(160, 2)
    part = BlockPartition.uniform(160, 4)
    gamma = np.random.default_rng(0).normal(0, 0.05, 3)

    def dual(g):
        return sum(eval_block(inst, part, j, g).objective for j in range(part.m))

    x = np.concatenate([eval_block(inst, part, j, gamma).x for j in range(part.m)])
    xi = subgradient(part, gamma, x, inst.lam)
    for k in range(3):
        e = 1e-4 * np.eye(3)[k]
        fd = (dual(gamma + e) - dual(gamma - e)) / 2e-4
        assert fd == pytest.approx(xi[k], abs=1e-3)


@pytest.mark.parametrize("m", [2, 5, 10])
def test_weak_duality(m):
    inst = spiky(200, 3)
    direct = solve_decomp(inst).objective
    rep = run_subgradient(inst, m, h_max=6)
    assert np.all(np.asarray(rep.extra["dual_history"]) <= direct + 1e-6 * (1 + abs(direct)))
    assert rep.objective == max(rep.extra["dual_history"])


def straddling_spike():
    # one spike across the first cut of five 40-wide blocks, zeros elsewhere
    y = np.full(200, 0.01)
    y[30:50] = np.linspace(0.4, 1.0, 20)
    return build_instance(y, lam=0.3, priors=SparsityPriors.regularized(0.01))


def test_skipping_leaves_trajectory_unchanged():
    inst = straddling_spike()
    on = run_subgradient(inst, 5, h_max=6)
    off = run_subgradient(inst, 5, h_max=6, skip=False)
    # only the two blocks next to the active cut are re-solved
    assert on.extra["blocks_solved"][1:] == [2] * on.iterations
    assert off.extra["blocks_solved"][1:] == [5] * off.iterations
    np.testing.assert_allclose(on.extra["gamma_history"], off.extra["gamma_history"], atol=1e-12, rtol=0)
    np.testing.assert_allclose(on.extra["dual_history"], off.extra["dual_history"], atol=1e-12, rtol=0)


def test_workers_do_not_change_result():
    inst = spiky(160, 5)
    a = run_subgradient(inst, 4, h_max=4)
    b = run_subgradient(inst, 4, h_max=4, workers=3)
    np.testing.assert_array_equal(a.extra["gamma_history"], b.extra["gamma_history"])


def test_large_penalty_needs_fewer_resolves():
    small = run_subgradient(spiky(200, 6, mu0=0.0005), 5, h_max=10)
    large = run_subgradient(spiky(200, 6, mu0=0.2), 5, h_max=10)
    assert large.extra["resolves"] < small.extra["resolves"]
    assert large.extra["nnz"] <= small.extra["nnz"]


def test_no_smoothing_means_independent_blocks():
    inst = spiky(60, 7, lam=0.0)
    rep = run_subgradient(inst, 3)
    assert rep.iterations == 0 and rep.status is Status.OPTIMAL
    assert rep.extra["gamma"] == [0.0, 0.0]


def test_iteration_log(tmp_path):
    path = tmp_path / "it.csv"
    rep = run_subgradient(spiky(120, 8), 3, h_max=3, log_path=path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["h", "dual_value", "xi_inf", "blocks_solved"]
    assert len(rows) - 1 == rep.iterations + 1


def test_rejects_cardinality_and_non_chain():
    inst = build_instance(np.ones(6), lam=0.3, priors=SparsityPriors.cardinality(2))
    with pytest.raises(ValueError):
        run_subgradient(inst, 2)
    from l0conic.model import AdjacencyGraph, ProblemInstance, Signal
    ring = ProblemInstance(Signal(np.ones(4)), AdjacencyGraph(4, [[0, 1], [1, 2], [2, 3], [0, 3]]), 0.3)
    with pytest.raises(ValueError):
        run_subgradient(ring, 2)
