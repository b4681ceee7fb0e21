import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from l0conic.cone import (Aff, Cone, ConeProgram, ProgramBuilder, available_backends, cone_violation,
                          dumps, loads, solve_cone_program)
from l0conic.cone.ipm import IPMSettings, solve_ipm

needs_clarabel = pytest.mark.skipif("clarabel" not in available_backends(),
                                    reason="clarabel not installed")


def ball_program(c):
    """min c'x over the unit ball; optimum -|c|."""
    b = ProgramBuilder()
    x = b.add_vars(len(c), "x")
    b.add_cost(x, np.asarray(c, dtype=float))
    b.add_soc(Aff.constant(np.ones(1)), *[Aff.var(x[k:k + 1]) for k in range(len(c))])
    return b.build()


def random_lp(rng, n=6, m=10):
    """A feasible, bounded LP: min c'x, G x <= h with x in a box."""
    G = np.vstack([rng.normal(size=(m, n)), np.eye(n), -np.eye(n)])
    x0 = rng.uniform(-0.5, 0.5, n)
    h = G @ x0 + rng.uniform(0.1, 1.0, G.shape[0])
    c = rng.normal(size=n)
    return ConeProgram(c, sp.csr_matrix((0, n)), np.zeros(0), sp.csr_matrix(G), h,
                       (Cone("nonneg", 1, G.shape[0]),))


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6).filter(lambda c: np.linalg.norm(c) > 1e-3))
def test_ball_closed_form(c):
    sol = solve_cone_program(ball_program(c))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-np.linalg.norm(c), abs=1e-7)
    assert sol.dual_objective == pytest.approx(sol.objective, abs=1e-6)


def test_rotated_cone_convention():
    # s * z >= v^2 with z = 2, v = 3 forces s >= 4.5
    b = ProgramBuilder()
    s = b.add_vars(1, "s")
    b.add_cost(s, 1.0)
    b.add_rsoc(Aff.var(s), Aff.constant(np.array([2.0])), Aff.constant(np.array([3.0])))
    assert solve_cone_program(b.build()).objective == pytest.approx(4.5, abs=1e-7)


@pytest.mark.parametrize("seed", range(5))
def test_lp_against_highs(seed):
    from scipy.optimize import linprog

    prog = random_lp(np.random.default_rng(seed))
    ref = linprog(prog.c, A_ub=prog.G.toarray(), b_ub=prog.h, bounds=(None, None), method="highs")
    sol = solve_cone_program(prog)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(ref.fun, abs=1e-7)
    eq, cone = prog.residuals(sol.primal)
    assert eq == 0 and cone <= 1e-7


@needs_clarabel
@pytest.mark.parametrize("seed", range(3))
def test_socp_against_clarabel(seed):
    rng = np.random.default_rng(seed)
    n = 5
    b = ProgramBuilder()
    x = b.add_vars(n, "x")
    t = b.add_vars(n, "t")
    b.add_cost(t, 1.0)
    b.add_cost(x, rng.normal(size=n))
    z = rng.uniform(0.2, 1.0, n)
    b.add_rsoc(Aff.var(t), Aff.constant(z), Aff.var(x))
    b.add_nonneg(Aff.constant(np.ones(n)) - Aff.var(x))
    b.add_eq(Aff(1, [(x[k], 1.0) for k in range(n)]) - Aff.constant(np.array([0.5])))
    prog = b.build()
    ref = solve_cone_program(prog, backend="clarabel")
    sol = solve_cone_program(prog, backend="reference")
    assert ref.status == sol.status == "optimal"
    assert sol.objective == pytest.approx(ref.objective, abs=1e-7)


def test_infeasible_detected():
    b = ProgramBuilder()
    x = b.add_vars(1, "x")
    b.add_cost(x, 1.0)
    b.add_nonneg(Aff.var(x) - Aff.constant(np.array([2.0])))
    b.add_nonneg(Aff.constant(np.array([1.0])) - Aff.var(x))
    assert solve_ipm(b.build()).status == "infeasible"


def test_unbounded_detected():
    b = ProgramBuilder()
    x = b.add_vars(1, "x")
    b.add_cost(x, -1.0)
    b.add_nonneg(Aff.var(x))
    assert solve_ipm(b.build()).status == "unbounded"


def test_iteration_limit():
    res = solve_ipm(random_lp(np.random.default_rng(1)), IPMSettings(max_iter=2))
    assert res.status in ("max_iter", "near_optimal")


def test_dump_roundtrip():
    prog = ball_program([1.0, -2.0])
    again = loads(dumps(prog))
    assert dumps(again) == dumps(prog)
    buf = io.StringIO()
    prog.dump(buf)
    assert buf.getvalue().startswith("l0conic-cone-program 1")
    with pytest.raises(ValueError):
        loads("something else\n")


def test_program_validation():
    with pytest.raises(ValueError):
        ConeProgram(np.zeros(2), sp.csr_matrix((0, 2)), np.zeros(0), sp.csr_matrix((1, 2)),
                    np.zeros(1), (Cone("nonneg", 1, 2),))
    with pytest.raises(ValueError):
        ConeProgram(np.zeros(2), sp.csr_matrix((0, 2)), np.zeros(0), sp.csr_matrix((1, 2)),
                    np.zeros(1), (Cone("psd", 1, 1),))


def test_cone_violation():
    cones = (Cone("nonneg", 1, 2), Cone("soc", 3, 1), Cone("rsoc", 3, 1))
    assert cone_violation(cones, np.array([1, 0, 5, 3, 4, 1, 1, 1.0])) <= 1e-12
    assert cone_violation(cones, np.array([-0.5, 0, 5, 3, 4, 1, 1, 1.0])) == pytest.approx(0.5)


def test_unknown_backend():
    with pytest.raises(ValueError):
        solve_cone_program(ball_program([1.0]), backend="nope")
