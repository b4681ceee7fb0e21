"""Thresholding heuristic, optimality gap, and exhaustive search for tiny n."""

from __future__ import annotations

import itertools

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky
from scipy.optimize import lsq_linear

from .model import ProblemInstance, to_mmatrix

ENUM_LIMIT = 16


class GapUndefined(ValueError):
    """Raised when the upper bound is not positive."""


def keep_largest(x_hat, k: int) -> np.ndarray:
    """Boolean mask of the ``k`` largest entries, lowest index first on ties."""
    x_hat = np.asarray(x_hat, dtype=float)
    if not 0 <= k <= x_hat.size:
        raise ValueError(f"k={k} outside [0, {x_hat.size}]")
    order = np.argsort(-x_hat, kind="stable")
    mask = np.zeros(x_hat.size, dtype=bool)
    mask[order[:k]] = True
    return mask


def threshold_round(x_hat, k: int, inst: ProblemInstance) -> tuple[np.ndarray, float]:
    """Zero all but the ``k`` largest entries and evaluate the exact objective.

    The indicator is the support of the rounded point. Returns ``inf`` as the
    bound when that support violates the instance's priors.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    x_bar = np.where(keep_largest(x_hat, k), x_hat, 0.0)
    z = (x_bar != 0).astype(float)
    if not inst.priors.feasible(z):
        return x_bar, float("inf")
    return x_bar, float(inst.objective(x_bar, z))


# upper bounds at or below this are solver noise around zero
GAP_FLOOR = 1e-8


def optimality_gap(zeta_ub: float, zeta_lb: float) -> float:
    """Percent gap ``100 (ub - lb) / ub``."""
    if not zeta_ub > GAP_FLOOR:
        raise GapUndefined(f"gap undefined for upper bound {zeta_ub!r}")
    return 100.0 * (zeta_ub - zeta_lb) / zeta_ub


def support_qp(inst: ProblemInstance, supp: np.ndarray, Q: np.ndarray | None = None) -> np.ndarray:
    """Minimize the smooth part of the objective over ``x`` supported on ``supp``
    with ``0 <= x <= big_m``.

    The unconstrained stationary point is tried first; if it leaves the box
    the problem is re-solved as bounded least squares.
    """
    n = inst.n
    x = np.zeros(n)
    idx = np.flatnonzero(supp)
    if idx.size == 0:
        return x
    Q = to_mmatrix(inst).to_dense() if Q is None else Q
    Qs = Q[np.ix_(idx, idx)]
    rhs = inst.y[idx] - 0.5 * inst.priors.mu1
    xs = cho_solve(cho_factor(Qs), rhs)
    if np.all(xs >= 0) and np.all(xs <= inst.big_m):
        x[idx] = xs
        return x
    # x'Qx - 2 rhs'x = |R x - R^-T rhs|^2 + const with Q = R'R
    R = cholesky(Qs)
    target = np.linalg.solve(R.T, rhs)
    res = lsq_linear(R, target, bounds=(0.0, inst.big_m), method="bvls", tol=1e-14)
    x[idx] = res.x
    return x


def enumerate_miqo(inst: ProblemInstance) -> tuple[float, np.ndarray, np.ndarray]:
    """Exact optimum by trying every indicator vector allowed by the priors."""
    n = inst.n
    if n > ENUM_LIMIT:
        raise ValueError(f"enumeration limited to n <= {ENUM_LIMIT}")
    Q = to_mmatrix(inst).to_dense()
    best = (float("inf"), np.zeros(n), np.zeros(n))
    for bits in itertools.product((0.0, 1.0), repeat=n):
        z = np.array(bits)
        if not inst.priors.feasible(z):
            continue
        x = support_qp(inst, z > 0, Q)
        val = float(inst.objective(x, z))
        if val < best[0] - 1e-13:
            best = (val, z, x)
    return best
