"""Command-line entry point: ``l0conic generate | denoise | lagrangian``.

Exit codes: 0 optimal, 2 iteration limit, 3 infeasible, 4 numerical
failure, 64 usage error. Outputs are JSON reports and CSV tables; nothing is
plotted.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .cone import BACKEND_ENV, available_backends
from .cutting import CuttingSurfaceConfig, solve_decomp
from .data import SyntheticConfig, instance_bundle, make_synthetic, metrics, write_bundle
from .exact import GapUndefined, optimality_gap, threshold_round
from .lagrangian import run_subgradient
from .model import (AdjacencyGraph, ProblemInstance, SolveReport, SparsityPriors, Status,
                    load_instance_json, write_signal_csv)
from .relax import RelaxationKind, build_relaxation

log = logging.getLogger("l0conic")

EXIT_CODES = {
    Status.OPTIMAL: 0,
    Status.ITERATION_LIMIT: 2,
    Status.INFEASIBLE: 3,
    Status.NUMERICAL_FAILURE: 4,
}
EXIT_USAGE = 64

REPORT_SCHEMA = {
    "type": "object",
    "required": ["status", "objective", "x_star", "z_star", "iterations", "cuts_added", "wall_time"],
    "properties": {
        "status": {"enum": [s.value for s in Status]},
        "objective": {"type": ["number", "null"]},
        "rounded_objective": {"type": ["number", "null"]},
        "gap_percent": {"type": ["number", "null"]},
        "iterations": {"type": "integer", "minimum": 0},
        "cuts_added": {"type": "integer", "minimum": 0},
        "wall_time": {"type": "number", "minimum": 0},
        "x_star": {"type": "array", "items": {"type": "number"}},
        "z_star": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
    },
}


class UsageError(Exception):
    pass


class InfeasibleInput(Exception):
    """Priors that no indicator vector of this length can meet."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="l0conic", description="Sparse signal denoising with conic relaxations.",
                epilog=f"The default cone backend can be set with {BACKEND_ENV}.")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--workers", type=_positive_int, default=1, help="parallel block solves")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic instance")
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--spikes", type=int, default=10)
    g.add_argument("--spike-len", type=_positive_int, default=10)
    g.add_argument("--sigma", type=_nonneg_float, default=0.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--lambda", dest="lam", type=_nonneg_float, default=0.3)
    _prior_flags(g, spikes=False)
    g.add_argument("--out", type=Path, required=True, help="output directory")

    d = sub.add_parser("denoise", help="solve one relaxation of an instance")
    d.add_argument("instance", type=Path)
    d.add_argument("--method", choices=[k.value for k in RelaxationKind], default="decomp")
    d.add_argument("--lambda", dest="lam", type=_nonneg_float)
    _prior_flags(d)
    d.add_argument("--round-k", type=int, help="threshold to the k largest entries")
    d.add_argument("--backend", choices=available_backends())
    d.add_argument("--max-rounds", type=_positive_int, default=200)
    d.add_argument("--out", type=Path, required=True, help="output directory")

    la = sub.add_parser("lagrangian", help="block decomposition with subgradient ascent")
    la.add_argument("instance", type=Path)
    la.add_argument("--blocks", type=_positive_int, required=True)
    la.add_argument("--kappa", type=_nonneg_float, required=True, help="per-nonzero penalty")
    la.add_argument("--lambda", dest="lam", type=_nonneg_float)
    la.add_argument("--mu1", type=_nonneg_float, default=0.0)
    la.add_argument("--eps", type=float, default=1e-3)
    la.add_argument("--h-max", type=_positive_int, default=100)
    la.add_argument("--no-skip", action="store_true", help="re-solve every block each iteration")
    la.add_argument("--backend", choices=available_backends())
    la.add_argument("--out", type=Path, required=True, help="output directory")
    return p


def _prior_flags(p, spikes: bool = True):
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--k", type=int, help="cardinality bound")
    grp.add_argument("--mu0", type=_nonneg_float, help="per-nonzero penalty")
    if spikes:
        p.add_argument("--spikes", dest="prior_spikes", type=int, help="max spike count (with --k)")
        p.add_argument("--spike-len", dest="prior_spike_len", type=int,
                       help="min spike length (with --k)")
    p.add_argument("--mu1", type=_nonneg_float, default=0.0, help="linear shrinkage")


def priors_from_args(args, fallback: SparsityPriors | None = None) -> SparsityPriors:
    s = getattr(args, "prior_spikes", None)
    h = getattr(args, "prior_spike_len", None)
    try:
        if s is not None or h is not None:
            if args.k is None or s is None or h is None:
                raise UsageError("--spikes and --spike-len need each other and --k")
            return SparsityPriors.spikes(args.k, s, h, mu1=args.mu1)
        if args.k is not None:
            return SparsityPriors.cardinality(args.k, mu1=args.mu1)
        if args.mu0 is not None:
            return SparsityPriors.regularized(args.mu0, mu1=args.mu1)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if fallback is not None:
        return fallback
    return SparsityPriors.none(mu1=args.mu1)


def _with(inst: ProblemInstance, lam=None, priors=None) -> ProblemInstance:
    return ProblemInstance(inst.signal, AdjacencyGraph.chain(inst.n),
                           inst.lam if lam is None else lam,
                           inst.priors if priors is None else priors)


def _write_solution(out: Path, inst: ProblemInstance, rep: SolveReport):
    with open(out / "solution.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "y", "x", "z"])
        for i, (yi, xi, zi) in enumerate(zip(inst.y, rep.x_star, rep.z_star)):
            w.writerow([i, repr(float(yi)), repr(float(xi)), repr(float(zi))])


def _write_report(out: Path, rep: SolveReport, extra: dict):
    d = rep.to_dict()
    d.update(extra)
    (out / "report.json").write_text(json.dumps(d, indent=1, default=_jsonable) + "\n")


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v).__name__}")


def _add_rounding(rep: SolveReport, inst: ProblemInstance, k: int | None):
    if k is None:
        return
    x_bar, ub = threshold_round(rep.x_star, k, inst)
    rep.rounded_objective = ub
    rep.extra["x_rounded"] = x_bar.tolist()
    try:
        rep.gap_percent = optimality_gap(ub, rep.objective) if np.isfinite(ub) else None
    except GapUndefined as exc:
        # e.g. an all-zero signal; the bounds are still reported
        log.info("%s", exc)
        rep.gap_percent = None


def cmd_generate(args) -> int:
    try:
        cfg = SyntheticConfig(args.n, args.spikes, args.spike_len, args.sigma, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    inst = make_synthetic(cfg)
    priors = priors_from_args(args)
    try:
        priors.check(args.n)
    except ValueError as exc:
        raise InfeasibleInput(str(exc)) from exc
    args.out.mkdir(parents=True, exist_ok=True)
    write_bundle(args.out / "instance.json",
                 instance_bundle(inst.y, args.lam, priors, y_true=inst.y_true, seed=args.seed))
    write_signal_csv(args.out / "y.csv", inst.y.values)
    write_signal_csv(args.out / "y_true.csv", inst.y_true.values)
    return 0


def _load(path: Path, lam, priors_args) -> tuple[ProblemInstance, dict]:
    try:
        inst, raw = load_instance_json(path)
    except FileNotFoundError as exc:
        raise UsageError(f"no such instance file: {path}") from exc
    priors = priors_args(inst.priors) if priors_args else None
    try:
        return _with(inst, lam, priors), raw
    except ValueError as exc:
        raise InfeasibleInput(str(exc)) from exc


def cmd_denoise(args) -> int:
    inst, raw = _load(args.instance, args.lam, lambda fb: priors_from_args(args, fb))
    t0 = time.perf_counter()
    if args.method == RelaxationKind.DECOMP.value:
        cfg = CuttingSurfaceConfig(backend=args.backend, max_rounds=args.max_rounds,
                                   trace_path=str(args.out / "trace.csv") if args.out else None)
        args.out.mkdir(parents=True, exist_ok=True)
        rep = solve_decomp(inst, cfg)
    else:
        sol = build_relaxation(inst, args.method).solve(backend=args.backend)
        ok = sol.usable
        rep = SolveReport(
            x_star=np.clip(sol.x, 0.0, None), z_star=np.clip(sol.z, 0.0, 1.0),
            objective=sol.objective if ok else float("nan"),
            status=Status.OPTIMAL if ok else _status_of(sol.status),
            iterations=1, wall_time=time.perf_counter() - t0)
    _add_rounding(rep, inst, args.round_k)
    extra = {"method": args.method, "lambda": inst.lam, "priors": inst.priors.to_dict()}
    if raw.get("y_true") is not None:
        extra["metrics"] = metrics(rep.x_star, np.asarray(raw["y_true"], dtype=float), inst.y)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_report(args.out, rep, extra)
    _write_solution(args.out, inst, rep)
    return EXIT_CODES[Status(rep.status)]


def _status_of(cone_status: str) -> Status:
    return Status.INFEASIBLE if cone_status == "infeasible" else Status.NUMERICAL_FAILURE


def cmd_lagrangian(args) -> int:
    priors = SparsityPriors.regularized(args.kappa, mu1=args.mu1)
    inst, raw = _load(args.instance, args.lam, lambda fb: priors)
    if args.blocks > inst.n:
        raise UsageError(f"--blocks {args.blocks} exceeds n = {inst.n}")
    args.out.mkdir(parents=True, exist_ok=True)
    rep = run_subgradient(inst, args.blocks, eps_stop=args.eps, h_max=args.h_max,
                          skip=not args.no_skip, workers=args.workers,
                          cfg=CuttingSurfaceConfig(backend=args.backend),
                          log_path=args.out / "iterations.csv")
    extra = {"method": "lagrangian", "lambda": inst.lam, "kappa": args.kappa}
    if raw.get("y_true") is not None:
        extra["metrics"] = metrics(rep.x_star, np.asarray(raw["y_true"], dtype=float), inst.y)
    _write_report(args.out, rep, extra)
    _write_solution(args.out, inst, rep)
    return EXIT_CODES[Status(rep.status)]


COMMANDS = {"generate": cmd_generate, "denoise": cmd_denoise, "lagrangian": cmd_lagrangian}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"l0conic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleInput as exc:
        print(f"l0conic: infeasible priors: {exc}", file=sys.stderr)
        return EXIT_CODES[Status.INFEASIBLE]


if __name__ == "__main__":
    sys.exit(main())
