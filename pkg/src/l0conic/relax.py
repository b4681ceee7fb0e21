"""Conic relaxations of the sparse denoising problem.

Four tiers, weakest to strongest:

* ``l1``: big-M relaxation with the plain quadratic objective.
* ``persp``: separable perspective terms ``x_i^2 / z_i``.
* ``pairwise``: perspective terms plus the two-variable hull of every
  smoothness term ``(x_i - x_j)^2``.
* ``decomp``: the lifted master with variables standing for ``x_i x_j`` and a
  finite family of pairwise hull cuts per edge, refined by
  :mod:`l0conic.cutting`. With only ``d = 1`` registered it coincides with
  ``pairwise``.

Every tier keeps the bound rows ``0 <= x <= big_m * z`` and ``0 <= z <= 1``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .cone import ConeSolution, solve_cone_program
from .cone.program import Aff, ProgramBuilder
from .hull import PairCut, add_f_block, x2_hull_block
from .model import PriorKind, ProblemInstance, SparsityPriors

DUPLICATE_RTOL = 1e-9


class RelaxationKind(str, enum.Enum):
    L1 = "l1"
    PERSP = "persp"
    PAIRWISE = "pairwise"
    DECOMP = "decomp"


@dataclass
class MasterSolution:
    x: np.ndarray
    z: np.ndarray
    objective: float
    status: str
    gamma_diag: np.ndarray | None = None
    gamma_edge: np.ndarray | None = None
    cone: ConeSolution | None = None

    @property
    def usable(self) -> bool:
        return self.status in ("optimal", "near_optimal")


@dataclass
class MasterModel:
    """A relaxation under construction together with its variable map.

    ``var_map`` holds index arrays into the program's variable vector:
    ``x``, ``z`` always, ``gamma_diag``/``gamma_edge`` for the lifted master.
    ``delta_sets[e]`` lists the separation parameters registered for edge
    ``e`` (row ``e`` of ``instance.graph.edges``).
    """

    instance: ProblemInstance
    kind: RelaxationKind
    builder: ProgramBuilder
    var_map: dict
    edges: np.ndarray
    delta_sets: list[list[float]] = field(default_factory=list)
    cuts: list[PairCut] = field(default_factory=list)

    @property
    def program(self):
        return self.builder.build()

    @property
    def num_cuts(self) -> int:
        return len(self.cuts)

    def solve(self, feas_tol: float = 1e-8, gap_tol: float = 1e-8,
              backend: str | None = None) -> MasterSolution:
        sol = solve_cone_program(self.program, feas_tol=feas_tol, gap_tol=gap_tol, backend=backend)
        v = sol.primal
        # a stalled solve keeps its dual value, the more accurate of the two
        # and still a bound from below
        value = sol.dual_objective if sol.status == "near_optimal" else sol.objective
        out = MasterSolution(
            x=v[self.var_map["x"]].copy(),
            z=v[self.var_map["z"]].copy(),
            objective=value,
            status=sol.status,
            cone=sol,
        )
        if "gamma_diag" in self.var_map:
            out.gamma_diag = v[self.var_map["gamma_diag"]].copy()
            out.gamma_edge = v[self.var_map["gamma_edge"]].copy()
        return out


def active_edges(inst: ProblemInstance) -> np.ndarray:
    """Edges carrying a nonzero coupling; none when the smoothness weight is 0."""
    if inst.lam == 0:
        return np.empty((0, 2), dtype=np.int64)
    return inst.graph.edges


def build_relaxation(inst: ProblemInstance, kind: RelaxationKind | str,
                     extra_linear: np.ndarray | None = None,
                     extra_constant: float = 0.0,
                     priors: bool = True) -> MasterModel:
    """Assemble the relaxation ``kind`` of ``inst``.

    ``extra_linear`` adds ``extra_linear' x`` to the objective and
    ``extra_constant`` shifts it; both are used by block subproblems.
    """
    kind = RelaxationKind(kind)
    n, y, lam = inst.n, inst.y, inst.lam
    edges = active_edges(inst)
    ei, ej = (edges[:, 0], edges[:, 1]) if edges.size else (np.empty(0, int), np.empty(0, int))

    b = ProgramBuilder()
    x = b.add_vars(n, "x")
    z = b.add_vars(n, "z")
    X, Z = Aff.var(x), Aff.var(z)
    b.offset = float(y @ y) + extra_constant
    lin = -2.0 * y + inst.priors.mu1
    if extra_linear is not None:
        lin = lin + np.asarray(extra_linear, dtype=float)
    b.add_cost(x, lin)
    if inst.priors.mu0 > 0:
        b.add_cost(z, inst.priors.mu0)

    b.add_nonneg(X)
    b.add_nonneg(Z)
    b.add_nonneg(Aff.constant(np.ones(n)) - Z)
    b.add_nonneg(Z * inst.big_m - X)

    var_map = {"x": x, "z": z}
    one_n = Aff.constant(np.ones(n))
    if kind is RelaxationKind.DECOMP:
        q_diag = 1.0 + lam * np.bincount(edges.ravel(), minlength=n) if edges.size else np.ones(n)
        gd = b.add_vars(n, "gamma_diag")
        ge = b.add_vars(len(edges), "gamma_edge")
        b.add_cost(gd, q_diag)
        b.add_cost(ge, -2.0 * lam)
        b.add_rsoc(Aff.var(gd), Z, X)
        var_map.update(gamma_diag=gd, gamma_edge=ge)
    else:
        t = b.add_vars(n, "t")
        b.add_cost(t, 1.0)
        b.add_rsoc(Aff.var(t), one_n if kind is RelaxationKind.L1 else Z, X)
        var_map["t"] = t
        if len(edges):
            s = b.add_vars(len(edges), "s_edge")
            b.add_cost(s, lam)
            var_map["s_edge"] = s
            S = Aff.var(s)
            if kind is RelaxationKind.PAIRWISE:
                var_map["edge_block"] = x2_hull_block(b, Aff.var(z[ei]), Aff.var(z[ej]),
                                                      Aff.var(x[ei]), Aff.var(x[ej]), S)
            else:
                ones = Aff.constant(np.ones(len(edges)))
                b.add_rsoc(S, ones, Aff.var(x[ei]) - Aff.var(x[ej]))

    model = MasterModel(inst, kind, b, var_map, edges, [[] for _ in range(len(edges))])
    if priors:
        add_prior_constraints(model, inst.priors)
    if kind is RelaxationKind.DECOMP and len(edges):
        register_cuts(model, np.arange(len(edges)), np.ones(len(edges)))
    return model


def add_prior_constraints(m: MasterModel, priors: SparsityPriors) -> MasterModel:
    """Add the indicator constraints of ``priors``; penalties live in the cost."""
    b, z = m.builder, m.var_map["z"]
    n = z.size
    if priors.kind in (PriorKind.CARDINALITY, PriorKind.SPIKES):
        b.add_nonneg(_budget(z, float(priors.k)))
    if priors.kind is PriorKind.SPIKES:
        if n > 1:
            p = b.add_vars(n - 1, "rise")
            q = b.add_vars(n - 1, "fall")
            P, Qv = Aff.var(p), Aff.var(q)
            b.add_nonneg(P)
            b.add_nonneg(Qv)
            b.add_eq(Aff.var(z[1:]) - Aff.var(z[:-1]) - P + Qv)
            total = Aff(1, [(np.array([i]), -1.0) for i in np.concatenate([p, q])], 2.0 * priors.s)
            b.add_nonneg(total)
            m.var_map.update(rise=p, fall=q)
        h = priors.h
        ell = np.arange(n)
        terms = []
        for off in range(-h, h + 1):
            idx = ell + off
            ok = (idx >= 0) & (idx < n)
            coef = ok.astype(float) - (h if off == 0 else 0.0)
            terms.append((z[np.clip(idx, 0, n - 1)], coef))
        b.add_nonneg(Aff(n, terms))
    return m


def _budget(z: np.ndarray, k: float) -> Aff:
    """Single row ``k - sum(z)``."""
    return Aff(1, [(np.array([zi]), -1.0) for zi in z], k)


def register_cut(m: MasterModel, edge: int, d: float) -> bool:
    """Add the cut for parameter ``d`` on edge ``edge``; False if already present."""
    return bool(register_cuts(m, np.array([edge]), np.array([d]))[0])


def register_cuts(m: MasterModel, edge_idx, d_values) -> np.ndarray:
    """Batched :func:`register_cut`; returns a mask of cuts actually added."""
    if m.kind is not RelaxationKind.DECOMP:
        raise ValueError("cuts apply only to the decomp master")
    edge_idx = np.asarray(edge_idx, dtype=np.int64)
    d_values = np.asarray(d_values, dtype=float)
    added = np.zeros(edge_idx.size, dtype=bool)
    for k, (e, d) in enumerate(zip(edge_idx, d_values)):
        if not d > 0:
            raise ValueError("separation parameter must be positive")
        known = m.delta_sets[e]
        if any(abs(d - old) <= DUPLICATE_RTOL * max(abs(d), abs(old)) for old in known):
            continue
        known.append(float(d))
        added[k] = True
    if not added.any():
        return added
    e, d = edge_idx[added], d_values[added]
    b, vm = m.builder, m.var_map
    x, z, gd, ge = vm["x"], vm["z"], vm["gamma_diag"], vm["gamma_edge"]
    i, j = m.edges[e, 0], m.edges[e, 1]
    s = b.add_vars(e.size, "s_cut")
    S = Aff.var(s)
    # The cut d*f(z, xi, xj/d) <= d*Gii - 2*Gij + Gjj/d, rescaled by min(d, 1/d)
    # via the homogeneity of f so every coefficient stays within [-2, 1].
    p, q = np.minimum(d, 1.0), np.minimum(1.0 / d, 1.0)
    b.add_nonneg(Aff(e.size, [(gd[i], p * p), (ge[e], -2.0 * p * q), (gd[j], q * q), (s, -1.0)]))
    blk = add_f_block(b, Aff.var(z[i]), Aff.var(z[j]), Aff.var(x[i], p), Aff.var(x[j], q), S)
    for k in range(e.size):
        m.cuts.append(PairCut(int(i[k]), int(j[k]), float(d[k]),
                              {"s": int(s[k]), "v": int(blk["v"][k]), "w": int(blk["w"][k])}))
    return added
