"""Lagrangian decomposition of the regularized chain problem into blocks.

The chain is cut at block boundaries; each cut link ``x_{l-1} - x_l`` is
dualized with a multiplier ``gamma``. For fixed multipliers the blocks are
independent decomposition relaxations whose boundary coordinates carry the
linear terms ``+gamma`` (last entry of the left block) and ``-gamma`` (first
entry of the right block). Each cut link keeps its smoothness term as
``lam * w^2`` on a split variable ``w``, which is eliminated in closed form at
``w = -gamma / (2 lam)`` and contributes ``-gamma^2 / (4 lam)``. Multipliers
follow a subgradient ascent with step ``1/h``. With ``lam = 0`` the blocks do
not interact and the multipliers stay at zero.
"""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cutting import CuttingSurfaceConfig, solve_decomp
from .data import NONZERO_TOL
from .exact import GapUndefined, optimality_gap
from .model import AdjacencyGraph, PriorKind, ProblemInstance, Signal, SolveReport, Status

log = logging.getLogger(__name__)

# boundary values this small count as exact zeros in the subgradient, so a
# link whose multiplier is 0 and whose ends are both off stays put and its
# blocks can be skipped
BOUNDARY_ZERO_TOL = 1e-6


class BlockSolveError(RuntimeError):
    def __init__(self, block: int, status):
        super().__init__(f"block {block} ended with status {status}")
        self.block = block
        self.status = status


@dataclass(frozen=True)
class BlockPartition:
    """Block ``j`` (0-based) covers indices ``starts[j] .. starts[j+1] - 1``."""

    starts: tuple

    def __post_init__(self):
        s = np.asarray(self.starts)
        if s.size < 2 or s[0] != 0 or np.any(np.diff(s) <= 0):
            raise ValueError("block starts must increase from 0 to n")

    @classmethod
    def uniform(cls, n: int, m: int) -> "BlockPartition":
        """Blocks of ``n // m`` entries; the last one absorbs the remainder."""
        if not 1 <= m <= n:
            raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
        width = n // m
        return cls(tuple(j * width for j in range(m)) + (n,))

    @property
    def m(self) -> int:
        return len(self.starts) - 1

    @property
    def n(self) -> int:
        return self.starts[-1]

    def block(self, j: int) -> slice:
        return slice(self.starts[j], self.starts[j + 1])


@dataclass
class DualState:
    gamma: np.ndarray
    h: int = 0
    xi: np.ndarray | None = None
    eps_stop: float = 1e-3
    h_max: int = 100
    block_solutions: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BlockResult:
    objective: float
    x: np.ndarray
    z: np.ndarray
    delta_sets: list | None = None


def block_instance(inst: ProblemInstance, part: BlockPartition, j: int) -> ProblemInstance:
    sl = part.block(j)
    y = inst.y[sl]
    return ProblemInstance(Signal(y), AdjacencyGraph.chain(y.size), inst.lam, inst.priors, inst.big_m)


def boundary_terms(part: BlockPartition, j: int, gamma: np.ndarray,
                   lam: float) -> tuple[np.ndarray, float]:
    """Linear coefficients and constant contributed by the multipliers to block ``j``.

    ``gamma[j - 1]`` couples block ``j - 1`` to block ``j``; its constant is
    booked on the right-hand block.
    """
    size = part.starts[j + 1] - part.starts[j]
    lin = np.zeros(size)
    const = 0.0
    if j > 0:
        g = gamma[j - 1]
        lin[0] -= g
        const -= g * g / (4.0 * lam) if lam > 0 else 0.0
    if j < part.m - 1:
        lin[-1] += gamma[j]
    return lin, const


def _gamma_key(part: BlockPartition, j: int, gamma: np.ndarray) -> tuple:
    left = float(gamma[j - 1]) if j > 0 else None
    right = float(gamma[j]) if j < part.m - 1 else None
    return (j, left, right)


def eval_block(inst: ProblemInstance, part: BlockPartition, j: int, gamma,
               cfg: CuttingSurfaceConfig | None = None, warm_cuts=None) -> BlockResult:
    """Decomposition relaxation of block ``j`` at multipliers ``gamma``.

    ``warm_cuts`` are the separation parameters of an earlier solve of the
    same block, reused because the multipliers only move linear terms.
    """
    if not 0 <= j < part.m:
        raise IndexError(f"block {j} outside 0..{part.m - 1}")
    gamma = np.asarray(gamma, dtype=float)
    lin, const = boundary_terms(part, j, gamma, inst.lam)
    rep = solve_decomp(block_instance(inst, part, j), cfg, extra_linear=lin, extra_constant=const,
                       warm_cuts=warm_cuts)
    if rep.status is not Status.OPTIMAL:
        raise BlockSolveError(j, rep.status)
    return BlockResult(rep.objective, rep.x_star, rep.z_star, rep.extra["delta_sets"])


def subgradient(part: BlockPartition, gamma: np.ndarray, x: np.ndarray, lam: float) -> np.ndarray:
    """Residual ``w - (x_l - x_{l-1})`` of each cut link at the inner minimizer."""
    if lam == 0:
        return np.zeros_like(gamma)
    cut = np.asarray(part.starts[1:-1], dtype=np.int64)
    left, right = x[cut - 1], x[cut]
    left = np.where(np.abs(left) <= BOUNDARY_ZERO_TOL, 0.0, left)
    right = np.where(np.abs(right) <= BOUNDARY_ZERO_TOL, 0.0, right)
    return -gamma / (2.0 * lam) + (left - right)


def _check_instance(inst: ProblemInstance):
    if inst.priors.kind not in (PriorKind.REGULARIZED, PriorKind.NONE):
        raise ValueError("the decomposition handles penalty priors only")
    if not inst.graph.is_chain:
        raise ValueError("the decomposition needs chain adjacency")


def run_subgradient(inst: ProblemInstance, m: int, *, eps_stop: float = 1e-3, h_max: int = 100,
                    skip: bool = True, workers: int = 1, cfg: CuttingSurfaceConfig | None = None,
                    partition: BlockPartition | None = None, log_path=None,
                    warm_start: bool = True) -> SolveReport:
    """Maximize the block dual by subgradient ascent.

    ``objective`` is the best dual value seen (a lower bound). The primal
    point concatenates the block solutions of the last evaluation; entries at
    most the nonzero tolerance are zeroed to form the upper bound. With
    ``warm_start`` each block re-solve starts from its previous cuts.
    """
    _check_instance(inst)
    t0 = time.perf_counter()
    part = partition or BlockPartition.uniform(inst.n, m)
    state = DualState(np.zeros(part.m - 1), eps_stop=eps_stop, h_max=h_max)
    # per block: the key of its last solve, the cuts that solve started from,
    # and the cuts it ended with
    last_key = [None] * part.m
    warm_in = [None] * part.m
    warm_out = [None] * part.m
    history, solves_per_iter, xi_norms, gammas = [], [], [], []
    best = -np.inf
    status = Status.ITERATION_LIMIT
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while True:
            state.h += 1
            gamma = state.gamma.copy()
            gammas.append(gamma)
            keys = [_gamma_key(part, j, gamma) for j in range(part.m)]
            todo = [j for j in range(part.m) if not (skip and keys[j] in state.block_solutions)]
            if not skip:
                state.block_solutions.clear()
            # a repeat solve at an unchanged key starts from the same cuts as
            # the first one, so skipping never changes the trajectory
            for j in todo:
                if keys[j] != last_key[j]:
                    warm_in[j] = warm_out[j] if warm_start else None
            run = (lambda j: eval_block(inst, part, j, gamma, cfg, warm_in[j]))
            results = list(pool.map(run, todo)) if pool else [run(j) for j in todo]
            for j, res in zip(todo, results):
                state.block_solutions[keys[j]] = res
                last_key[j] = keys[j]
                warm_out[j] = res.delta_sets
            # keep only entries reachable at the current multipliers
            blocks = [state.block_solutions[k] for k in keys]
            state.block_solutions = dict(zip(keys, blocks))
            dual = float(sum(b.objective for b in blocks))
            x = np.concatenate([b.x for b in blocks])
            z = np.concatenate([b.z for b in blocks])
            state.xi = subgradient(part, gamma, x, inst.lam)
            xi_inf = float(np.max(np.abs(state.xi), initial=0.0))
            best = max(best, dual)
            history.append(dual)
            solves_per_iter.append(len(todo))
            xi_norms.append(xi_inf)
            if xi_inf < state.eps_stop:
                status = Status.OPTIMAL
                break
            if state.h >= state.h_max:
                break
            state.gamma = gamma + state.xi / state.h
    except BlockSolveError as exc:
        log.warning("%s", exc)
        status = Status.NUMERICAL_FAILURE
        x = np.zeros(inst.n)
        z = np.zeros(inst.n)
        best = np.nan
    finally:
        if pool:
            pool.shutdown()

    if log_path:
        with open(log_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "dual_value", "xi_inf", "blocks_solved"])
            for h, row in enumerate(zip(history, xi_norms, solves_per_iter), start=1):
                w.writerow([h, *row])

    x_bar = np.where(x > NONZERO_TOL, x, 0.0)
    upper = float(inst.objective(x_bar, (x_bar > 0).astype(float))) if status is not Status.NUMERICAL_FAILURE else None
    gap = None
    if upper is not None and np.isfinite(best):
        try:
            gap = optimality_gap(upper, best)
        except GapUndefined:
            pass
    return SolveReport(
        x_star=x,
        z_star=z,
        objective=best,
        status=status,
        rounded_objective=upper,
        gap_percent=gap,
        iterations=len(history) - 1,
        wall_time=time.perf_counter() - t0,
        extra={
            "dual_history": history,
            "xi_inf": xi_norms,
            "blocks_solved": solves_per_iter,
            "initial_solves": solves_per_iter[0] if solves_per_iter else 0,
            "resolves": int(sum(solves_per_iter[1:])),
            "gamma": state.gamma.tolist(),
            "gamma_history": [g.tolist() for g in gammas],
            "nnz": int(np.sum(x > NONZERO_TOL)),
            "blocks": part.m,
        },
    )
