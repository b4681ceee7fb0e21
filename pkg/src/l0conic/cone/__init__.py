"""Conic program container, builder and solver backends.

Two backends are available:

* ``reference``: the interior-point method in :mod:`l0conic.cone.ipm`.
* ``clarabel``: an adapter to the Clarabel solver, if installed.

The default is chosen by the ``L0CONIC_BACKEND`` environment variable and
falls back to ``reference``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .ipm import IPMSettings, solve_ipm
from .program import Aff, Cone, ConeProgram, ProgramBuilder, cone_violation, dumps, loads

__all__ = [
    "Aff",
    "Cone",
    "ConeProgram",
    "ConeSolution",
    "ProgramBuilder",
    "available_backends",
    "cone_violation",
    "dumps",
    "loads",
    "solve_cone_program",
]

BACKEND_ENV = "L0CONIC_BACKEND"


@dataclass
class ConeSolution:
    """Primal point, duals and status of one conic solve.

    ``objective`` includes the program offset; ``dual_objective`` is the
    matching lower bound from the dual iterate.
    """

    primal: np.ndarray
    dual_eq: np.ndarray
    dual_cone: np.ndarray
    objective: float
    dual_objective: float
    status: str
    iterations: int
    solve_time: float
    primal_residual: float
    dual_residual: float
    backend: str = "reference"
    info: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.primal

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    @property
    def usable(self) -> bool:
        """Optimal, or stalled with the best iterate at reduced accuracy."""
        return self.status in ("optimal", "near_optimal")


def available_backends() -> list[str]:
    out = ["reference"]
    try:
        import clarabel  # noqa: F401

        out.append("clarabel")
    except ImportError:
        pass
    return out


def solve_cone_program(
    prog: ConeProgram,
    feas_tol: float = 1e-8,
    gap_tol: float = 1e-8,
    max_iter: int = 200,
    backend: str | None = None,
) -> ConeSolution:
    """Solve ``prog`` with the selected backend."""
    backend = backend or os.environ.get(BACKEND_ENV, "reference")
    if backend == "reference":
        res = solve_ipm(prog, IPMSettings(feas_tol=feas_tol, gap_tol=gap_tol, max_iter=max_iter))
        return ConeSolution(
            primal=res.x,
            dual_eq=res.y,
            dual_cone=res.z,
            objective=res.pcost + prog.offset,
            dual_objective=res.dcost + prog.offset,
            status=res.status,
            iterations=res.iterations,
            solve_time=res.solve_time,
            primal_residual=res.pres,
            dual_residual=res.dres,
            backend="reference",
        )
    if backend == "clarabel":
        from .clarabel_backend import solve_clarabel

        return solve_clarabel(prog, feas_tol=feas_tol, gap_tol=gap_tol, max_iter=max_iter)
    raise ValueError(f"unknown cone backend {backend!r}")
