import numpy as np
import pytest
from hypothesis import given, strategies as st

from l0conic.exact import enumerate_miqo
from l0conic.model import SparsityPriors, build_instance
from l0conic.relax import RelaxationKind, active_edges, build_relaxation, register_cut


def solve(inst, kind):
    sol = build_relaxation(inst, kind).solve()
    assert sol.usable
    return sol


@pytest.mark.parametrize("kind, z, x", [
    ("l1", (0.30, 0.60), (0.30, 0.60)),
    ("persp", (0.00, 0.82), (0.00, 0.59)),
    ("pairwise", (0.11, 1.00), (0.08, 0.69)),
])
def test_example1_solutions(example1, kind, z, x):
    sol = solve(example1, kind)
    np.testing.assert_allclose(sol.z, z, atol=1e-2)
    np.testing.assert_allclose(sol.x, x, atol=1e-2)


def test_example1_l1_value(example1):
    # z = x at the optimum; one-dimensional minimization by hand gives 0.665
    assert solve(example1, "l1").objective == pytest.approx(0.665, abs=1e-7)


def test_example2_persp_value(example2):
    assert solve(example2, "persp").objective == pytest.approx(1.413, abs=1e-3)


def test_lam_zero_has_no_edges():
    inst = build_instance([0.5, 1.0], lam=0.0)
    assert active_edges(inst).shape == (0, 2)
    assert build_relaxation(inst, "decomp").num_cuts == 0


def test_decomp_master_starts_with_unit_cuts(example2):
    m = build_relaxation(example2, RelaxationKind.DECOMP)
    assert m.delta_sets == [[1.0], [1.0]]
    assert not register_cut(m, 0, 1.0)
    assert register_cut(m, 0, 2.0)
    assert m.num_cuts == 3
    with pytest.raises(ValueError):
        register_cut(m, 1, 0.0)


def test_cuts_only_on_decomp(example1):
    with pytest.raises(ValueError):
        register_cut(build_relaxation(example1, "persp"), 0, 2.0)


def test_cardinality_prior_binds():
    inst = build_instance([1.0, 1.0, 1.0], priors=SparsityPriors.cardinality(1))
    sol = solve(inst, "persp")
    assert sol.z.sum() <= 1 + 1e-7


def test_spike_prior_rows_hold():
    inst = build_instance(np.array([1.0, 0.0, 0.0, 1.0, 1.0]), lam=0.1,
                          priors=SparsityPriors.spikes(4, 1, 2))
    sol = solve(inst, "persp")
    z = sol.z
    assert z.sum() <= 4 + 1e-7
    assert np.abs(np.diff(z)).sum() <= 2 + 1e-6


def test_linear_shift_moves_objective(example1):
    base = build_relaxation(example1, "persp").solve().objective
    shifted = build_relaxation(example1, "persp", extra_linear=np.zeros(2), extra_constant=1.5)
    assert shifted.solve().objective == pytest.approx(base + 1.5, abs=1e-7)


def random_priors(draw, n):
    kind = draw(st.sampled_from(["none", "cardinality", "regularized", "spikes"]))
    if kind == "cardinality":
        return SparsityPriors.cardinality(draw(st.integers(0, n)))
    if kind == "regularized":
        return SparsityPriors.regularized(draw(st.floats(0, 0.3)))
    if kind == "spikes":
        h = draw(st.integers(1, 2))
        return SparsityPriors.spikes(draw(st.integers(h, n)), 1, h)
    return SparsityPriors.none()


@st.composite
def small_instances(draw):
    n = draw(st.integers(2, 6))
    y = draw(st.lists(st.floats(0, 1), min_size=n, max_size=n))
    return build_instance(np.array(y), lam=draw(st.floats(0, 2)), priors=random_priors(draw, n))


@given(small_instances())
def test_relaxations_sandwich_optimum(inst):
    star, _, _ = enumerate_miqo(inst)
    vals = [solve(inst, k).objective for k in ("l1", "persp", "pairwise")]
    assert np.all(np.diff(vals) >= -1e-6)
    assert vals[-1] <= star + 1e-6
