"""Cutting-surface solvers for the decomposition relaxation.

:func:`solve_decomp` refines the lifted master from :mod:`l0conic.relax`
edge by edge with closed-form separation. The dense separation problem over
all decompositions of ``Q`` is provided only at tiny scale
(:func:`separation_oracle_small`) together with the cutting loop that uses it
(:func:`simple_cutting_surface`); both serve as test oracles.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .cone.program import Aff
from .hull import PairParams, cap_d, cut_violation, eval_g, normalized_d, optimal_d, z2_hull_block
from .model import MMatrixQuadratic, ProblemInstance, SolveReport, Status
from .relax import RelaxationKind, build_relaxation, register_cuts

log = logging.getLogger(__name__)


@dataclass
class CuttingSurfaceConfig:
    rel_improvement_stop: float = 5e-5
    violation_tol: float = 1e-6
    max_rounds: int = 200
    d_max: float = 1e6
    persp_tol: float = 1e-7
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    d_rule: str = "hybrid"
    hybrid_range: float = 1e2
    backend: str | None = None
    trace_path: str | None = None


_CONE_STATUS = {
    "optimal": Status.OPTIMAL,
    "near_optimal": Status.OPTIMAL,
    "infeasible": Status.INFEASIBLE,
    "unbounded": Status.NUMERICAL_FAILURE,
    "max_iter": Status.NUMERICAL_FAILURE,
    "numerical_failure": Status.NUMERICAL_FAILURE,
}


def separate_master(model, sol, cfg: CuttingSurfaceConfig):
    """Violated edges of a master solution and their capped optimal ``d``."""
    edges = model.edges
    if not len(edges):
        return np.empty(0, np.int64), np.empty(0), 0.0
    i, j = edges[:, 0], edges[:, 1]
    x = np.maximum(sol.x, 0.0)
    z = np.clip(sol.z, 0.0, 1.0)
    gd, ge = sol.gamma_diag, sol.gamma_edge
    persp_ok = gd * z - x * x >= -cfg.persp_tol
    ok = persp_ok[i] & persp_ok[j]
    gdi, gdj = np.maximum(gd[i], 0.0), np.maximum(gd[j], 0.0)
    viol = cut_violation(z[i], z[j], x[i], x[j], gdi, ge, gdj)
    viol = np.where(ok, viol, -np.inf)
    hit = np.flatnonzero(viol > cfg.violation_tol)
    args = (z[i[hit]], z[j[hit]], x[i[hit]], x[j[hit]], gdi[hit], ge[hit], gdj[hit])
    d = choose_d(args, cfg)
    worst = float(viol.max()) if viol.size else 0.0
    return hit, np.atleast_1d(d), worst


def choose_d(args, cfg: CuttingSurfaceConfig):
    zi, zj, xi, xj, gii, gij, gjj = args
    raw = cap_d(optimal_d(zi, zj, xi, xj, gii, gjj), cfg.d_max)
    if cfg.d_rule == "closed_form":
        return raw
    norm = cap_d(normalized_d(zi, zj, xi, xj, gii, gij, gjj), cfg.d_max)
    if cfg.d_rule == "normalized":
        return norm
    extreme = (raw > cfg.hybrid_range) | (raw < 1.0 / cfg.hybrid_range)
    return np.where(extreme, norm, raw)


def solve_decomp(inst: ProblemInstance, cfg: CuttingSurfaceConfig | None = None,
                 extra_linear=None, extra_constant: float = 0.0,
                 warm_cuts=None) -> SolveReport:
    """Solve the decomposition relaxation by adding one cut per violated edge
    and round until the relative improvement stalls.

    ``warm_cuts`` holds per-edge separation parameters from an earlier solve
    on the same signal and graph. Cuts do not depend on the linear terms, so
    they stay valid when only ``extra_linear`` changes. The final parameters
    are returned as ``extra["delta_sets"]``.
    """
    cfg = cfg or CuttingSurfaceConfig()
    t0 = time.perf_counter()
    model = build_relaxation(inst, RelaxationKind.DECOMP, extra_linear, extra_constant)
    n_base = model.num_cuts
    if warm_cuts is not None:
        if len(warm_cuts) != len(model.edges):
            raise ValueError("warm_cuts must list one entry per edge")
        e = np.array([k for k, ds in enumerate(warm_cuts) for _ in ds], dtype=np.int64)
        d = np.array([v for ds in warm_cuts for v in ds], dtype=float)
        if e.size:
            register_cuts(model, e, d)
    trace = []
    history = []
    status = Status.ITERATION_LIMIT
    zeta_old = None
    sol = None
    rounds = 0
    reduced = 0
    for rounds in range(1, cfg.max_rounds + 1):
        sol = model.solve(cfg.feas_tol, cfg.gap_tol, cfg.backend)
        if not sol.usable:
            status = _CONE_STATUS.get(sol.status, Status.NUMERICAL_FAILURE)
            log.warning("master solve ended with status %s in round %d", sol.status, rounds)
            break
        zeta = sol.objective
        history.append(zeta)
        reduced += sol.status != "optimal"
        if zeta_old is not None and zeta - zeta_old <= cfg.rel_improvement_stop * max(abs(zeta), 1e-12):
            trace.append((rounds, zeta, 0, np.nan, model.num_cuts))
            status = Status.OPTIMAL
            break
        hit, d, worst = separate_master(model, sol, cfg)
        added = register_cuts(model, hit, d) if hit.size else np.zeros(0, bool)
        trace.append((rounds, zeta, int(added.sum()), worst, model.num_cuts))
        if not added.any():
            status = Status.OPTIMAL
            break
        zeta_old = zeta
    if cfg.trace_path:
        with open(cfg.trace_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "objective", "cuts_added", "max_violation", "total_cuts"])
            w.writerows(trace)
    n = inst.n
    x = np.zeros(n) if sol is None else np.clip(sol.x, 0.0, None)
    z = np.zeros(n) if sol is None else np.clip(sol.z, 0.0, 1.0)
    objective = float("nan") if sol is None or not sol.usable else sol.objective
    return SolveReport(
        x_star=x,
        z_star=z,
        objective=objective,
        status=status,
        iterations=rounds,
        cuts_added=model.num_cuts - n_base,
        wall_time=time.perf_counter() - t0,
        extra={"history": history, "trace": trace, "reduced_accuracy_solves": reduced, "delta_sizes": [len(s) for s in model.delta_sets],
               "delta_sets": [list(s) for s in model.delta_sets]},
    )


# ---------------------------------------------------------------------------
# dense separation at test scale


def _decomp_value(Q: MMatrixQuadratic, z, x, left, right):
    i, j = Q.edges[:, 0], Q.edges[:, 1]
    return float(np.sum(np.abs(Q.offdiag) * eval_g(z[i], z[j], x[i], x[j], left, right)))


def _chain_grid(Q: MMatrixQuadratic, z, x, points: int):
    """Exhaustive log-grid over the free coordinates of a chain decomposition.

    On a chain the row equalities fix the outer parameters and leave one free
    right-hand parameter per interior edge; the rest follow from the rows.
    """
    n = Q.n
    w = np.abs(Q.offdiag)
    nfree = n - 2
    axis = np.logspace(-4, 4, points)
    grids = np.meshgrid(*([axis] * nfree), indexing="ij") if nfree else []
    flat = [g.ravel() for g in grids]
    size = flat[0].size if flat else 1
    left = np.empty((size, n - 1))
    right = np.empty((size, n - 1))
    left[:, 0] = Q.diag[0] / w[0]
    for e in range(n - 2):
        right[:, e] = flat[e]
        left[:, e + 1] = (Q.diag[e + 1] - w[e] * right[:, e]) / w[e + 1]
    right[:, n - 2] = Q.diag[n - 1] / w[n - 2]
    feas = np.all((left > 0) & (right > 0) & (left * right >= 1 - 1e-12), axis=1)
    if not feas.any():
        return None
    L, R = left[feas], right[feas]
    i, j = Q.edges[:, 0], Q.edges[:, 1]
    vals = (w * eval_g(z[i], z[j], x[i], x[j], L, R)).sum(axis=1)
    k = int(np.argmax(vals))
    return L[k], R[k], float(vals[k])


def separation_oracle_small(Q: MMatrixQuadratic, z, x, grid_points: int = 401):
    """Most violated decomposition of ``Q`` at ``(z, x)``.

    Returns ``(theta, left, right)`` where ``left[e]``/``right[e]`` are the
    coefficients of ``x_i^2``/``x_j^2`` for edge ``e = (i, j)``. Intended for
    ``n <= 4`` only.
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    n = Q.n
    if n > 4:
        raise ValueError("the dense separation oracle is limited to n <= 4")
    m = len(Q.edges)
    if m == 0:
        return 0.0, np.empty(0), np.empty(0)
    w = np.abs(Q.offdiag)
    i, j = Q.edges[:, 0], Q.edges[:, 1]
    best = None
    chain = m == n - 1 and np.all(j == i + 1) and np.all(i == np.arange(m))
    if chain:
        best = _chain_grid(Q, z, x, grid_points)

    def neg(v):
        return -_decomp_value(Q, z, x, v[:m], v[m:])

    rows = np.zeros((n, 2 * m))
    rows[i, np.arange(m)] = w
    rows[j, m + np.arange(m)] = w
    cons = [
        {"type": "eq", "fun": lambda v: rows @ v - Q.diag, "jac": lambda v: rows},
        {"type": "ineq", "fun": lambda v: v[:m] * v[m:] - 1.0},
    ]
    starts = []
    if best is not None:
        starts.append(np.concatenate([best[0], best[1]]))
    # balanced start: split each row evenly across its edges
    deg = np.bincount(Q.edges.ravel(), minlength=n)
    starts.append(np.concatenate([Q.diag[i] / (deg[i] * w), Q.diag[j] / (deg[j] * w)]))
    for v0 in starts:
        res = minimize(neg, v0, method="SLSQP", constraints=cons,
                       bounds=[(1e-8, None)] * (2 * m), options={"ftol": 1e-13, "maxiter": 500})
        v = res.x
        feasible = (np.max(np.abs(rows @ v - Q.diag)) < 1e-7
                    and np.all(v[:m] * v[m:] >= 1 - 1e-7))
        if feasible and (best is None or -res.fun > best[2]):
            best = (v[:m].copy(), v[m:].copy(), float(-res.fun))
    if best is None:
        raise RuntimeError("no feasible decomposition found")
    left, right, theta = best
    return theta, left, right


def simple_cutting_surface(inst: ProblemInstance, max_rounds: int = 20, tol: float = 1e-6,
                           rel_improvement_stop: float = 5e-5, backend: str | None = None):
    """Perspective relaxation strengthened by one dense decomposition cut per
    round. Returns the objective history and the final (x, z)."""
    from .model import to_mmatrix

    Q = to_mmatrix(inst)
    base = build_relaxation(inst, RelaxationKind.PERSP)
    b, vm = base.builder, base.var_map
    x, z = vm["x"], vm["z"]
    # epigraph t of the whole quadratic, replacing the separate terms
    t = b.add_vars(1, "t_quad")
    b.add_cost(t, 1.0)
    b.add_cost(vm["t"], -1.0)
    if "s_edge" in vm:
        b.add_cost(vm["s_edge"], -inst.lam)
    terms = [(vm["t"][k:k + 1], -1.0) for k in range(inst.n)]
    if "s_edge" in vm:
        terms += [(vm["s_edge"][k:k + 1], -inst.lam) for k in range(len(vm["s_edge"]))]
    b.add_nonneg(Aff(1, [(t, 1.0), *terms]))
    i, j = Q.edges[:, 0], Q.edges[:, 1]
    history, cuts = [], []
    sol = None
    for _ in range(max_rounds):
        sol = base.solve(backend=backend)
        history.append(sol.objective)
        if len(history) > 1 and history[-1] - history[-2] <= rel_improvement_stop * abs(history[-1]):
            break
        xs, zs = np.clip(sol.x, 0, None), np.clip(sol.z, 0, 1)
        theta, left, right = separation_oracle_small(Q, zs, xs)
        tval = float(sol.cone.primal[t][0])
        if theta <= tval + tol:
            break
        s = b.add_vars(len(Q.edges), "s_dec")
        for e in range(len(Q.edges)):
            z2_hull_block(b, Aff.var(z[i[e:e + 1]]), Aff.var(z[j[e:e + 1]]),
                          Aff.var(x[i[e:e + 1]]), Aff.var(x[j[e:e + 1]]), Aff.var(s[e:e + 1]),
                          PairParams(float(left[e]), max(float(right[e]), 1.0 / left[e])))
        w = np.abs(Q.offdiag)
        b.add_nonneg(Aff(1, [(t, 1.0), *[(s[e:e + 1], -w[e]) for e in range(len(w))]]))
        cuts.append((left.copy(), right.copy()))
    return {"history": history, "x": sol.x, "z": sol.z, "cuts": cuts}
