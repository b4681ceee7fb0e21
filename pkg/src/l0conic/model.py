"""Problem data shared by every solver: signals, adjacency, priors, the
M-matrix objective and solve reports."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DENSE_LIMIT = 10_000


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Signal:
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(np.ravel(self.values))
        if v.size < 1:
            raise ValueError("signal must have at least one entry")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal entries must be finite")
        if np.any(v < 0):
            raise ValueError("signal entries must be nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    def __len__(self):
        return self.n


def read_signal_csv(path, header: bool = False) -> Signal:
    """One value per line; a single leading header line is skipped when
    ``header`` is set. Lines of the form ``index,value`` are also accepted."""
    vals = []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if header:
        rows = rows[1:]
    for lineno, row in enumerate(rows, start=1 + int(header)):
        row = [c.strip() for c in row if c.strip()]
        if not row:
            continue
        try:
            v = float(row[-1])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: cannot parse {row[-1]!r} as a number") from None
        if v < 0 or not np.isfinite(v):
            raise ValueError(f"{path}:{lineno}: value {v} is not a nonnegative decimal")
        vals.append(v)
    return Signal(np.array(vals))


def write_signal_csv(path, values, header: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(["index", "value"])
        for i, v in enumerate(np.asarray(values, dtype=float)):
            w.writerow([i, repr(float(v))])


@dataclass(frozen=True)
class AdjacencyGraph:
    """Undirected simple graph on ``n`` nodes, edges stored 0-based with i < j."""

    n: int
    edges: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        e = np.sort(e, axis=1)
        if np.any(e[:, 0] == e[:, 1]):
            raise ValueError("self-loops are not allowed")
        if e.size and (e.min() < 0 or e.max() >= self.n):
            raise ValueError("edge index out of range")
        if len(np.unique(e, axis=0)) != len(e):
            raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", _frozen(e, dtype=np.int64))

    @classmethod
    def chain(cls, n: int) -> "AdjacencyGraph":
        i = np.arange(n - 1)
        return cls(n, np.column_stack([i, i + 1]))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    @property
    def is_chain(self) -> bool:
        return self.num_edges == self.n - 1 and bool(
            np.all(self.edges[:, 1] - self.edges[:, 0] == 1)
            and np.array_equal(self.edges[:, 0], np.arange(self.n - 1))
        )


class PriorKind(str, enum.Enum):
    NONE = "none"
    CARDINALITY = "cardinality"
    REGULARIZED = "regularized"
    SPIKES = "spikes"


@dataclass(frozen=True)
class SparsityPriors:
    """Constraints and penalties on the support indicators.

    ``mu0`` is the per-nonzero penalty (it plays the role of both the
    regularized weight and the Lagrangian experiments' kappa); ``mu1`` adds
    linear shrinkage ``mu1 * sum(x)`` and can be combined with any kind.
    """

    kind: PriorKind = PriorKind.NONE
    k: int | None = None
    s: int | None = None
    h: int | None = None
    mu0: float = 0.0
    mu1: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", PriorKind(self.kind))
        if self.mu0 < 0 or self.mu1 < 0:
            raise ValueError("prior weights must be nonnegative")
        if self.kind in (PriorKind.CARDINALITY, PriorKind.SPIKES):
            if self.k is None or self.k < 0:
                raise ValueError("cardinality prior needs k >= 0")
        if self.kind is PriorKind.SPIKES:
            if self.s is None or self.s < 0 or self.h is None or self.h < 1:
                raise ValueError("spike prior needs s >= 0 and h >= 1")

    @classmethod
    def none(cls, mu1: float = 0.0):
        return cls(PriorKind.NONE, mu1=mu1)

    @classmethod
    def cardinality(cls, k: int, mu1: float = 0.0):
        return cls(PriorKind.CARDINALITY, k=int(k), mu1=mu1)

    @classmethod
    def regularized(cls, mu0: float, mu1: float = 0.0):
        return cls(PriorKind.REGULARIZED, mu0=float(mu0), mu1=mu1)

    @classmethod
    def spikes(cls, k: int, s: int, h: int, mu1: float = 0.0):
        return cls(PriorKind.SPIKES, k=int(k), s=int(s), h=int(h), mu1=mu1)

    @property
    def kappa(self) -> float:
        return self.mu0

    def check(self, n: int) -> None:
        if self.k is not None and self.k > n:
            raise ValueError(f"cardinality k={self.k} exceeds n={n}")
        if self.kind is PriorKind.SPIKES and self.h * self.s > n:
            raise ValueError("spike prior needs h*s <= n")

    def feasible(self, z) -> bool:
        """Whether a binary indicator vector satisfies the prior constraints."""
        z = np.asarray(z, dtype=float)
        tol = 1e-9
        if self.kind in (PriorKind.CARDINALITY, PriorKind.SPIKES) and z.sum() > self.k + tol:
            return False
        if self.kind is PriorKind.SPIKES:
            if np.abs(np.diff(z)).sum() > 2 * self.s + tol:
                return False
            n, h = z.size, self.h
            c = np.concatenate([[0.0], np.cumsum(z)])
            lo = np.maximum(np.arange(n) - h, 0)
            hi = np.minimum(np.arange(n) + h, n - 1)
            if np.any(c[hi + 1] - c[lo] < h * z - tol):
                return False
        return True

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "k": self.k, "s": self.s, "h": self.h,
                "mu0": self.mu0, "mu1": self.mu1}

    @classmethod
    def from_dict(cls, d: dict) -> "SparsityPriors":
        return cls(PriorKind(d.get("kind", "none")), k=d.get("k"), s=d.get("s"),
                   h=d.get("h"), mu0=float(d.get("mu0", 0.0)), mu1=float(d.get("mu1", 0.0)))


@dataclass(frozen=True)
class MMatrixQuadratic:
    """``const + linear'x + x'Qx`` with Q stored as diagonal plus an edge map."""

    diag: np.ndarray
    edges: np.ndarray
    offdiag: np.ndarray
    linear: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "diag", _frozen(self.diag))
        object.__setattr__(self, "edges", _frozen(np.reshape(self.edges, (-1, 2)), dtype=np.int64))
        object.__setattr__(self, "offdiag", _frozen(self.offdiag))
        object.__setattr__(self, "linear", _frozen(self.linear))
        if np.any(self.offdiag > 0):
            raise ValueError("M-matrix off-diagonals must be nonpositive")

    @property
    def n(self) -> int:
        return self.diag.size

    def quad(self, x) -> float:
        x = np.asarray(x, dtype=float)
        i, j = self.edges.T
        return float(self.diag @ (x * x) + 2.0 * self.offdiag @ (x[i] * x[j]))

    def value(self, x) -> float:
        return self.const + float(self.linear @ np.asarray(x, dtype=float)) + self.quad(x)

    def offdiag_of(self, i: int, j: int) -> float:
        i, j = min(i, j), max(i, j)
        hit = np.flatnonzero((self.edges[:, 0] == i) & (self.edges[:, 1] == j))
        return float(self.offdiag[hit[0]]) if hit.size else 0.0

    def to_sparse(self):
        import scipy.sparse as sp

        i, j = self.edges.T
        rows = np.concatenate([np.arange(self.n), i, j])
        cols = np.concatenate([np.arange(self.n), j, i])
        vals = np.concatenate([self.diag, self.offdiag, self.offdiag])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        if self.n > DENSE_LIMIT:
            raise MemoryError(f"refusing dense storage for n={self.n} > {DENSE_LIMIT}")
        return self.to_sparse().toarray()

    def dominance_surplus(self) -> np.ndarray:
        """Q_ii - sum_j |Q_ij| per row."""
        s = np.array(self.diag, dtype=float)
        np.subtract.at(s, self.edges[:, 0], np.abs(self.offdiag))
        np.subtract.at(s, self.edges[:, 1], np.abs(self.offdiag))
        return s


@dataclass(frozen=True)
class ProblemInstance:
    signal: Signal
    graph: AdjacencyGraph
    lam: float
    priors: SparsityPriors = field(default_factory=SparsityPriors)
    big_m: float | None = None

    def __post_init__(self):
        if self.graph.n != self.signal.n:
            raise ValueError(f"graph has {self.graph.n} nodes but signal has {self.signal.n} entries")
        if not self.lam >= 0:
            raise ValueError("smoothness weight must be nonnegative")
        self.priors.check(self.n)
        if self.big_m is None:
            m = float(self.signal.values.max())
            object.__setattr__(self, "big_m", m if m > 0 else 1.0)
        elif not self.big_m > 0:
            raise ValueError("big-M bound must be positive")

    @property
    def n(self) -> int:
        return self.signal.n

    @property
    def y(self) -> np.ndarray:
        return self.signal.values

    def objective(self, x, z=None) -> float:
        """True mixed-integer objective at (x, z); z defaults to the support of x."""
        x = np.asarray(x, dtype=float)
        if z is None:
            z = (x != 0).astype(float)
        y = self.y
        i, j = self.graph.edges.T
        return float(np.sum((y - x) ** 2) + self.lam * np.sum((x[i] - x[j]) ** 2)
                     + self.priors.mu0 * np.sum(z) + self.priors.mu1 * np.sum(x))


def build_instance(y, graph: AdjacencyGraph | None = None, lam: float = 0.0,
                   priors: SparsityPriors | None = None, big_m: float | None = None) -> ProblemInstance:
    signal = y if isinstance(y, Signal) else Signal(y)
    if graph is None:
        graph = AdjacencyGraph.chain(signal.n)
    if lam < 0:
        raise ValueError("smoothness weight must be nonnegative")
    return ProblemInstance(signal, graph, float(lam), priors or SparsityPriors.none(), big_m)


def to_mmatrix(inst: ProblemInstance) -> MMatrixQuadratic:
    y = inst.y
    diag = 1.0 + inst.lam * inst.graph.degrees()
    offdiag = np.full(inst.graph.num_edges, -inst.lam)
    return MMatrixQuadratic(diag, inst.graph.edges, offdiag, -2.0 * y, float(y @ y))


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    ITERATION_LIMIT = "iteration_limit"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SolveReport:
    x_star: np.ndarray
    z_star: np.ndarray
    objective: float
    status: Status = Status.OPTIMAL
    rounded_objective: float | None = None
    gap_percent: float | None = None
    iterations: int = 0
    cuts_added: int = 0
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "status": Status(self.status).value,
            "objective": _num(self.objective),
            "rounded_objective": _num(self.rounded_objective),
            "gap_percent": _num(self.gap_percent),
            "iterations": int(self.iterations),
            "cuts_added": int(self.cuts_added),
            "wall_time": float(self.wall_time),
            "x_star": [float(v) for v in self.x_star],
            "z_star": [float(v) for v in self.z_star],
            **{k: v for k, v in self.extra.items()},
        }


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if np.isfinite(v) else None


def load_instance_json(path) -> tuple[ProblemInstance, dict]:
    """Read the instance bundle ``{n, lambda, priors, y, y_true?, seed}``."""
    import json

    d = json.loads(Path(path).read_text())
    y = np.asarray(d["y"], dtype=float)
    if int(d.get("n", y.size)) != y.size:
        raise ValueError("instance field n disagrees with len(y)")
    priors = SparsityPriors.from_dict(d.get("priors") or {})
    inst = build_instance(y, AdjacencyGraph.chain(y.size), float(d.get("lambda", 0.0)),
                          priors, d.get("big_m"))
    return inst, d
