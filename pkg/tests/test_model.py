import numpy as np
import pytest
from hypothesis import given, strategies as st

from l0conic.model import (AdjacencyGraph, MMatrixQuadratic, ProblemInstance, Signal, SolveReport,
                           SparsityPriors, Status, build_instance, load_instance_json,
                           read_signal_csv, to_mmatrix, write_signal_csv)

signals = st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=12)


def test_example1_quadratic():
    Q = to_mmatrix(build_instance([0.4, 1.0], lam=0.5))
    np.testing.assert_allclose(Q.to_dense(), [[1.5, -0.5], [-0.5, 1.5]])
    np.testing.assert_allclose(Q.linear, [-0.8, -2.0])


def test_example2_quadratic():
    Q = to_mmatrix(build_instance([0.3, 0.7, 1.0], lam=1.0))
    np.testing.assert_allclose(Q.to_dense(), [[2, -1, 0], [-1, 3, -1], [0, -1, 2]])


def test_big_m_defaults_to_peak():
    assert build_instance([0.4, 1.0]).big_m == 1.0
    assert build_instance([0.0, 0.0]).big_m == 1.0


@pytest.mark.parametrize("bad", [[], [1.0, -0.1], [np.nan], [np.inf]])
def test_signal_rejects_bad_values(bad):
    with pytest.raises(ValueError):
        Signal(np.array(bad, dtype=float))


def test_graph_validation():
    with pytest.raises(ValueError):
        AdjacencyGraph(3, [[0, 0]])
    with pytest.raises(ValueError):
        AdjacencyGraph(3, [[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        AdjacencyGraph(2, [[0, 2]])
    assert AdjacencyGraph.chain(4).is_chain
    assert not AdjacencyGraph(3, [[0, 2]]).is_chain


def test_instance_rejects_mismatch_and_bad_priors():
    with pytest.raises(ValueError):
        ProblemInstance(Signal([1.0, 2.0]), AdjacencyGraph.chain(3), 1.0)
    with pytest.raises(ValueError):
        build_instance([1.0], lam=-1.0)
    with pytest.raises(ValueError):
        build_instance([1.0, 2.0], priors=SparsityPriors.cardinality(3))


def test_priors_feasibility():
    card = SparsityPriors.cardinality(2)
    assert card.feasible([1, 0, 1])
    assert not card.feasible([1, 1, 1])
    sp = SparsityPriors.spikes(k=4, s=1, h=2)
    assert sp.feasible([0, 1, 1, 0])
    assert not sp.feasible([1, 0, 0, 1])  # two patches
    assert not sp.feasible([0, 1, 0, 0])  # patch shorter than h
    with pytest.raises(ValueError):
        SparsityPriors.regularized(-1.0)


@given(signals, st.floats(0, 5))
def test_quadratic_matches_objective(y, lam):
    inst = build_instance(np.array(y), lam=lam)
    Q = to_mmatrix(inst)
    x = np.linspace(0, 1, inst.n)
    assert Q.value(x) == pytest.approx(inst.objective(x, np.zeros(inst.n)), rel=1e-12, abs=1e-12)


@given(signals, st.floats(0, 5))
def test_chain_matrix_is_diagonally_dominant(y, lam):
    Q = to_mmatrix(build_instance(np.array(y), lam=lam))
    assert np.all(Q.dominance_surplus() >= 1 - 1e-12)
    dense = Q.to_dense()
    assert np.all(dense[~np.eye(len(y), dtype=bool)] <= 0)
    assert np.linalg.eigvalsh(dense).min() > 0


def test_offdiag_lookup():
    Q = to_mmatrix(build_instance([1.0, 2.0, 3.0], lam=2.0))
    assert Q.offdiag_of(1, 0) == -2.0
    assert Q.offdiag_of(0, 2) == 0.0
    assert isinstance(Q, MMatrixQuadratic)


@given(signals)
def test_signal_csv_roundtrip(tmp_path_factory, y):
    path = tmp_path_factory.mktemp("csv") / "y.csv"
    write_signal_csv(path, y)
    np.testing.assert_array_equal(read_signal_csv(path, header=True).values, y)


def test_read_signal_csv_reports_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0.5\nabc\n")
    with pytest.raises(ValueError, match=":2:"):
        read_signal_csv(path)


def test_load_instance_json(data_dir):
    inst, raw = load_instance_json(data_dir / "example1.json")
    assert inst.lam == 0.5 and inst.priors.mu0 == 0.5
    np.testing.assert_array_equal(inst.y, [0.4, 1.0])


def test_report_to_dict_is_plain():
    rep = SolveReport(np.zeros(2), np.ones(2), float("nan"), Status.NUMERICAL_FAILURE)
    d = rep.to_dict()
    assert d["status"] == "numerical_failure" and d["objective"] is None
