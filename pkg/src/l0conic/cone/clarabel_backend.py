"""Adapter from :class:`ConeProgram` to the Clarabel solver.

Clarabel takes ``A x + s = b`` with ``s`` in a cone product, so equality rows
become a zero cone and rotated cones are rewritten as second-order cones.
"""

from __future__ import annotations

import time

import numpy as np
import scipy.sparse as sp

from .program import ConeProgram

_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "near_optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
    "MaxIterations": "max_iter",
    "MaxTime": "max_iter",
    "NumericalError": "numerical_failure",
    "InsufficientProgress": "numerical_failure",
}


def _cone_transform(prog: ConeProgram):
    """Matrix T mapping the program's slack rows to Clarabel's cone rows."""
    import clarabel

    m = prog.h.size
    rows, cols, vals = [], [], []
    cones = []
    pos = 0
    for cone in prog.cones:
        k, d = cone.count, cone.dim
        base = pos + d * np.arange(k)
        if cone.kind == "nonneg":
            rows.append(base)
            cols.append(base)
            vals.append(np.ones(k))
            cones.append(clarabel.NonnegativeConeT(k))
        elif cone.kind == "soc":
            for j in range(d):
                rows.append(base + j)
                cols.append(base + j)
                vals.append(np.ones(k))
            cones.extend(clarabel.SecondOrderConeT(d) for _ in range(k))
        else:
            for tr, coef, col in ((0, 1.0, 0), (0, 1.0, 1), (1, 1.0, 0), (1, -1.0, 1)):
                rows.append(base + tr)
                cols.append(base + col)
                vals.append(np.full(k, coef))
            for j in range(2, d):
                rows.append(base + j)
                cols.append(base + j)
                vals.append(np.full(k, 2.0))
            cones.extend(clarabel.SecondOrderConeT(d) for _ in range(k))
        pos += cone.rows
    if m:
        T = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))
    else:
        T = sp.csr_matrix((0, 0))
    return T, cones


def solve_clarabel(prog: ConeProgram, feas_tol=1e-8, gap_tol=1e-8, max_iter=200):
    import clarabel

    from . import ConeSolution

    t0 = time.perf_counter()
    n, p = prog.c.size, prog.b.size
    T, cones = _cone_transform(prog)
    G = T @ prog.G
    h = T @ prog.h
    Amat = sp.vstack([prog.A, G]).tocsc()
    bvec = np.concatenate([prog.b, h])
    all_cones = ([clarabel.ZeroConeT(p)] if p else []) + cones
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_feas = feas_tol
    settings.tol_gap_abs = gap_tol
    settings.tol_gap_rel = gap_tol
    settings.max_iter = max_iter
    solver = clarabel.DefaultSolver(sp.csc_matrix((n, n)), prog.c.astype(float), Amat, bvec, all_cones, settings)
    sol = solver.solve()
    x = np.asarray(sol.x)
    dual = np.asarray(sol.z)
    y, zc = dual[:p], dual[p:]
    z_user = T.T @ zc if zc.size else zc
    eq_res, cone_res = prog.residuals(x)
    status = _STATUS.get(str(sol.status).split(".")[-1], "numerical_failure")
    return ConeSolution(
        primal=x,
        dual_eq=y,
        dual_cone=np.asarray(z_user),
        objective=float(prog.c @ x) + prog.offset,
        dual_objective=float(-(prog.b @ y) - (prog.h @ z_user)) + prog.offset if status in ("optimal", "near_optimal") else np.nan,
        status=status,
        iterations=int(sol.iterations),
        solve_time=time.perf_counter() - t0,
        primal_residual=max(eq_res, cone_res),
        dual_residual=float(np.max(np.abs(prog.A.T @ y + prog.G.T @ z_user + prog.c), initial=0.0)),
        backend="clarabel",
    )
