"""Closed-form pieces of the two-variable convex hulls.

For indicators ``z`` and continuous ``x`` the pairwise function

    f(z1, z2, x1, x2) = (x1 - x2)^2 / z1   if x1 >= x2
                        (x1 - x2)^2 / z2   otherwise

describes the hull of ``(x1 - x2)^2`` with indicators, and ``g(.; d)`` does the
same for the parametric quadratic ``d1 x1^2 - 2 x1 x2 + d2 x2^2`` with
``d1 d2 >= 1``. Functions here are vectorized over numpy arrays and follow the
convention ``a/0 = inf`` for ``a > 0`` and ``0/0 = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cone.program import Aff, ProgramBuilder

D_MAX = 1e6
DEGENERATE_DENOM = 1e-10


@dataclass(frozen=True)
class PairParams:
    """Coefficients of ``d1 x1^2 - 2 x1 x2 + d2 x2^2``; convex iff ``d1 d2 >= 1``."""

    d1: float
    d2: float

    def __post_init__(self):
        if not (self.d1 > 0 and self.d2 > 0):
            raise ValueError("pair parameters must be positive")
        if self.d1 * self.d2 < 1.0 - 1e-12:
            raise ValueError(f"d1*d2 = {self.d1 * self.d2:.6g} < 1 gives a nonconvex quadratic")


@dataclass
class PairCut:
    """A registered cut for edge (i, j) and the master variables it created."""

    i: int
    j: int
    d: float
    aux: dict = field(default_factory=dict)


def ratio(num, den):
    """``num / den`` with ``a/0 = inf`` (a > 0) and ``0/0 = 0``."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    pos = den > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(pos, num / np.where(pos, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return out if out.ndim else float(out)


def eval_f(z1, z2, x1, x2):
    diff = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    return np.where(diff >= 0, ratio(diff**2, z1), ratio(diff**2, z2))[()]


def decomposition_terms(z1, z2, x1, x2, d1, d2):
    """The two valid lower bounds on ``d1 x1^2 - 2 x1 x2 + d2 x2^2`` whose
    maximum is ``g``: one splits off ``x2^2``, the other ``x1^2``."""
    z1, z2, x1, x2 = (np.asarray(a, dtype=float) for a in (z1, z2, x1, x2))
    first = d1 * eval_f(z1, z2, x1, x2 / d1) + _scaled_persp(x2, z2, d2 - 1.0 / d1)
    second = d2 * eval_f(z1, z2, x1 / d2, x2) + _scaled_persp(x1, z1, d1 - 1.0 / d2)
    return first, second


def _scaled_persp(x, z, coef):
    # coef >= 0 up to rounding; a zero coefficient kills an infinite perspective
    coef = np.maximum(coef, 0.0)
    term = ratio(x * x, z)
    return np.where(coef > 0, coef * term, 0.0)


def eval_g(z1, z2, x1, x2, d1, d2):
    """Explicit piecewise form of the hull function for parameters ``(d1, d2)``."""
    z1, z2, x1, x2, d1, d2 = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (z1, z2, x1, x2, d1, d2)))
    quad = d1 * x1**2 - 2 * x1 * x2
    out = np.empty(z1.shape)
    big1 = z1 >= z2
    # z1 >= z2 splits on d1 x1 vs x2, z1 < z2 on x1 vs d2 x2
    a = big1 & (d1 * x1 >= x2)
    b = big1 & ~a
    c = ~big1 & (x1 >= d2 * x2)
    e = ~big1 & ~c
    out[a] = (ratio(quad[a] + x2[a] ** 2 / d1[a], z1[a])
              + _scaled_persp(x2[a], z2[a], d2[a] - 1.0 / d1[a]))
    out[b] = ratio(quad[b] + d2[b] * x2[b] ** 2, z2[b])
    out[c] = ratio(quad[c] + d2[c] * x2[c] ** 2, z1[c])
    out[e] = (ratio(x1[e] ** 2 / d2[e] - 2 * x1[e] * x2[e] + d2[e] * x2[e] ** 2, z2[e])
              + _scaled_persp(x1[e], z1[e], d1[e] - 1.0 / d2[e]))
    return out[()]


# ---------------------------------------------------------------------------
# conic blocks


def add_f_block(b: ProgramBuilder, zi: Aff, zj: Aff, xi: Aff, xj: Aff, s: Aff) -> dict:
    """Rows forcing ``s >= f(zi, zj, xi, xj)`` (batched). Returns new var ids."""
    k = s.size
    v = b.add_vars(k, "v")
    w = b.add_vars(k, "w")
    V, W = Aff.var(v), Aff.var(w)
    b.add_nonneg(V)
    b.add_nonneg(W)
    b.add_nonneg(V - xi + xj)
    b.add_nonneg(W - xj + xi)
    b.add_rsoc(s, zi, V)
    b.add_rsoc(s, zj, W)
    return {"v": v, "w": w}


def x2_hull_block(b: ProgramBuilder, zi: Aff, zj: Aff, xi: Aff, xj: Aff, s: Aff) -> dict:
    """Extended formulation of the hull of ``(x1 - x2)^2`` with indicators."""
    return add_f_block(b, zi, zj, xi, xj, s)


def z2_hull_block(b: ProgramBuilder, zi: Aff, zj: Aff, xi: Aff, xj: Aff, s: Aff,
                  d: PairParams) -> dict:
    """Extended formulation of the hull of ``d1 x1^2 - 2 x1 x2 + d2 x2^2``."""
    d1, d2 = d.d1, d.d2
    k = s.size
    names = ("s1", "s2", "q1", "q2", "v1", "v2", "w1", "w2")
    ids = {nm: b.add_vars(k, nm) for nm in names}
    S1, S2, Q1, Q2, V1, V2, W1, W2 = (Aff.var(ids[nm]) for nm in names)
    for nm in names:
        b.add_nonneg(Aff.var(ids[nm]))
    b.add_rsoc(S1, zi, xi)
    b.add_rsoc(S2, zj, xj)
    b.add_nonneg(V1 * d1 - xi * d1 + xj)
    b.add_rsoc(Q1, zi, V1)
    b.add_nonneg(V2 * d1 + xi * d1 - xj)
    b.add_rsoc(Q1, zj, V2)
    b.add_nonneg(s - Q1 * d1 - S2 * (d2 - 1.0 / d1))
    b.add_nonneg(W1 * d2 - xi + xj * d2)
    b.add_rsoc(Q2, zi, W1)
    b.add_nonneg(W2 * d2 + xi - xj * d2)
    b.add_rsoc(Q2, zj, W2)
    b.add_nonneg(s - Q2 * d2 - S1 * (d1 - 1.0 / d2))
    return ids


# ---------------------------------------------------------------------------
# separation for the lifted master


def _pick_branch(xi, xj, gii, gjj):
    """True where ``xi^2/Gii >= xj^2/Gjj`` (cross-multiplied, G >= 0)."""
    return xi * xi * gjj >= xj * xj * gii


def optimal_d(zi, zj, xi, xj, gii, gjj):
    """Maximizer over ``d > 0`` of the lifted cut expression; ``inf`` when the
    maximum is approached as ``d`` grows without bound."""
    zi, zj, xi, xj, gii, gjj = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (zi, zj, xi, xj, gii, gjj)))
    zc = np.where(_pick_branch(xi, xj, gii, gjj), zi, zj)
    den = gii - ratio(xi * xi, zc)
    num = np.maximum(gjj - ratio(xj * xj, zc), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(den > DEGENERATE_DENOM, np.sqrt(num / np.where(den > 0, den, 1.0)), np.inf)
    return d[()]


def separation_terms(zi, zj, xi, xj, gii, gij, gjj):
    """``(V, A, B)`` with cut value ``V - (d A + B / d) / 2`` for the active branch."""
    zi, zj, xi, xj, gii, gij, gjj = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (zi, zj, xi, xj, gii, gij, gjj)))
    zc = np.where(_pick_branch(xi, xj, gii, gjj), zi, zj)
    A = np.maximum(gii - ratio(xi * xi, zc), 0.0)
    B = np.maximum(gjj - ratio(xj * xj, zc), 0.0)
    V = gij - ratio(xi * xj, zc)
    return V, A, B


def normalized_d(zi, zj, xi, xj, gii, gij, gjj):
    """Maximizer of the cut value divided by the row scale ``d + 1/d``.

    Unlike :func:`optimal_d` this stays finite and positive when one of the
    perspective rows is tight, where the raw maximizer degenerates to 0 or
    infinity and yields cuts that barely move the master.
    """
    V, A, B = separation_terms(zi, zj, xi, xj, gii, gij, gjj)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = ((B - A) + np.sqrt((B - A) ** 2 + 4 * V * V)) / (2 * V)
    return np.where(V > 0, d, 1.0)[()]


def cap_d(d, d_max: float = D_MAX):
    """Clip a separation parameter into ``[1/d_max, d_max]``."""
    return np.clip(d, 1.0 / d_max, d_max)


def cut_expression(zi, zj, xi, xj, gii, gij, gjj, d):
    """``d f(zi, zj, xi, xj/d) - (d Gii - 2 Gij + Gjj/d)``; positive means the
    cut for ``d`` is violated."""
    d = np.asarray(d, dtype=float)
    return (d * eval_f(zi, zj, xi, np.asarray(xj, dtype=float) / d)
            - (d * gii - 2.0 * gij + gjj / d))


def cut_value(zi, zj, xi, xj, gii, gij, gjj, d):
    """Half the cut expression, so the supremum over ``d`` equals
    :func:`cut_violation` exactly."""
    return 0.5 * cut_expression(zi, zj, xi, xj, gii, gij, gjj, d)


def cut_violation(zi, zj, xi, xj, gii, gij, gjj):
    """Explicit supremum over ``d`` of :func:`cut_value`; positive means the
    point violates the pairwise hull for this edge."""
    zi, zj, xi, xj, gii, gij, gjj = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (zi, zj, xi, xj, gii, gij, gjj)))
    zc = np.where(_pick_branch(xi, xj, gii, gjj), zi, zj)
    ri = np.maximum(gii - ratio(xi * xi, zc), 0.0)
    rj = np.maximum(gjj - ratio(xj * xj, zc), 0.0)
    with np.errstate(invalid="ignore"):
        out = gij - ratio(xi * xj, zc) - np.sqrt(ri * rj)
    return out[()]
