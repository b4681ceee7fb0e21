"""Standard-form conic programs and an incremental builder.

A :class:`ConeProgram` is

    minimize    c'x + offset
    subject to  A x = b
                h - G x in K

where K is a product of cones laid over consecutive rows of ``G``. Variables
are free; every sign or cone restriction is expressed as a conic row. Cone
kinds:

* ``nonneg``: the slack is nonnegative.
* ``soc``: (t, u) with t >= ||u||.
* ``rsoc``: (s, z, v) with s*z >= ||v||^2 and s, z >= 0 (no factor 2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

CONE_KINDS = ("nonneg", "soc", "rsoc")


class Cone(NamedTuple):
    """``count`` consecutive cones of one kind, each spanning ``dim`` rows."""

    kind: str
    dim: int
    count: int = 1

    @property
    def rows(self) -> int:
        return self.dim * self.count


@dataclass(frozen=True)
class ConeProgram:
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    cones: tuple[Cone, ...]
    offset: float = 0.0
    var_names: tuple[str, ...] | None = None

    def __post_init__(self):
        n = self.c.size
        if self.A.shape != (self.b.size, n) or self.G.shape != (self.h.size, n):
            raise ValueError("inconsistent program dimensions")
        total = 0
        for cone in self.cones:
            if cone.kind not in CONE_KINDS:
                raise ValueError(f"unknown cone kind {cone.kind!r}")
            if cone.kind == "soc" and cone.dim < 2:
                raise ValueError("second-order cones need dim >= 2")
            if cone.kind == "rsoc" and cone.dim < 3:
                raise ValueError("rotated cones need dim >= 3")
            if cone.kind == "nonneg" and cone.dim != 1:
                raise ValueError("nonneg blocks are stored with dim 1")
            total += cone.rows
        if total != self.h.size:
            raise ValueError(f"cones cover {total} rows but G has {self.h.size}")

    @property
    def num_vars(self) -> int:
        return self.c.size

    @property
    def num_eq(self) -> int:
        return self.b.size

    @property
    def num_cone_rows(self) -> int:
        return self.h.size

    def objective_value(self, x) -> float:
        return float(self.c @ x) + self.offset

    def residuals(self, x) -> tuple[float, float]:
        """(equality residual, cone infeasibility) of a candidate point, inf-norms."""
        eq = float(np.max(np.abs(self.A @ x - self.b), initial=0.0))
        return eq, cone_violation(self.cones, self.h - self.G @ x)

    def dump(self, path_or_file) -> None:
        """Write the text format described in :func:`dumps`."""
        text = dumps(self)
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w") as fh:
                fh.write(text)


def cone_violation(cones: Iterable[Cone], slack: np.ndarray) -> float:
    """Largest distance-like violation of ``slack`` in the cone product."""
    worst, pos = 0.0, 0
    for cone in cones:
        blk = slack[pos:pos + cone.rows].reshape(cone.count, cone.dim)
        pos += cone.rows
        if cone.kind == "nonneg":
            v = -blk[:, 0]
        elif cone.kind == "soc":
            v = np.linalg.norm(blk[:, 1:], axis=1) - blk[:, 0]
        else:
            s, z, rest = blk[:, 0], blk[:, 1], blk[:, 2:]
            v = np.maximum.reduce([
                -s, -z,
                0.5 * (np.hypot(s - z, 2 * np.linalg.norm(rest, axis=1)) - (s + z)),
            ])
        if v.size:
            worst = max(worst, float(v.max()))
    return worst


FORMAT_VERSION = 1


def dumps(p: ConeProgram) -> str:
    """Plain-text dump for external verification.

    Layout (version 1), one record per line, whitespace separated::

        l0conic-cone-program 1
        dims <num_vars> <num_eq> <num_cone_rows>
        offset <value>
        c <j> <value>                 (nonzero cost entries)
        A <row> <col> <value>         (equality matrix triplets, 0-based)
        b <row> <value>
        G <row> <col> <value>         (conic rows: h - G x in K)
        h <row> <value>
        cone <kind> <dim> <count>     (in row order)
        name <j> <label>              (optional)
    """
    out = [f"l0conic-cone-program {FORMAT_VERSION}",
           f"dims {p.num_vars} {p.num_eq} {p.num_cone_rows}",
           f"offset {float(p.offset)!r}"]
    for j in np.flatnonzero(p.c):
        out.append(f"c {j} {float(p.c[j])!r}")
    for tag, M, rhs in (("A", p.A, p.b), ("G", p.G, p.h)):
        coo = M.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for r, col, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            out.append(f"{tag} {r} {col} {float(v)!r}")
        lower = "b" if tag == "A" else "h"
        for r in np.flatnonzero(rhs):
            out.append(f"{lower} {r} {float(rhs[r])!r}")
    for cone in p.cones:
        out.append(f"cone {cone.kind} {cone.dim} {cone.count}")
    if p.var_names:
        for j, name in enumerate(p.var_names):
            out.append(f"name {j} {name}")
    return "\n".join(out) + "\n"


def loads(text: str) -> ConeProgram:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if lines[0][:1] != ["l0conic-cone-program"]:
        raise ValueError("not a cone program dump")
    n, p_eq, m = (int(v) for v in lines[1][1:4])
    c, b, h = np.zeros(n), np.zeros(p_eq), np.zeros(m)
    offset = 0.0
    trip = {"A": ([], [], []), "G": ([], [], [])}
    cones, names = [], {}
    for rec in lines[2:]:
        tag = rec[0]
        if tag == "offset":
            offset = float(rec[1])
        elif tag == "c":
            c[int(rec[1])] = float(rec[2])
        elif tag in trip:
            for lst, v in zip(trip[tag], (int(rec[1]), int(rec[2]), float(rec[3]))):
                lst.append(v)
        elif tag == "b":
            b[int(rec[1])] = float(rec[2])
        elif tag == "h":
            h[int(rec[1])] = float(rec[2])
        elif tag == "cone":
            cones.append(Cone(rec[1], int(rec[2]), int(rec[3])))
        elif tag == "name":
            names[int(rec[1])] = rec[2]
    A = sp.csr_matrix((trip["A"][2], (trip["A"][0], trip["A"][1])), shape=(p_eq, n))
    G = sp.csr_matrix((trip["G"][2], (trip["G"][0], trip["G"][1])), shape=(m, n))
    var_names = tuple(names.get(j, f"x{j}") for j in range(n)) if names else None
    return ConeProgram(c, A, b, G, h, tuple(cones), offset, var_names)


# ---------------------------------------------------------------------------
# builder


class Aff:
    """A batch of K affine expressions ``const + sum_t coef_t * x[idx_t]``."""

    __slots__ = ("terms", "const", "size")

    def __init__(self, size: int, terms: Sequence[tuple] = (), const=0.0):
        self.size = int(size)
        self.terms = []
        for idx, coef in terms:
            idx = np.broadcast_to(np.asarray(idx, dtype=np.int64), (self.size,))
            coef = np.broadcast_to(np.asarray(coef, dtype=float), (self.size,))
            self.terms.append((idx, coef))
        self.const = np.broadcast_to(np.asarray(const, dtype=float), (self.size,)).copy()

    @classmethod
    def var(cls, idx, coef=1.0):
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        return cls(idx.size, [(idx, coef)])

    @classmethod
    def constant(cls, values):
        values = np.atleast_1d(np.asarray(values, dtype=float))
        return cls(values.size, [], values)

    def __add__(self, other: "Aff") -> "Aff":
        if not isinstance(other, Aff):
            out = Aff(self.size, self.terms, self.const + other)
            return out
        size = max(self.size, other.size)
        return Aff(size, [*self.terms, *other.terms], self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "Aff":
        return Aff(self.size, [(i, -c) for i, c in self.terms], -self.const)

    def __sub__(self, other) -> "Aff":
        return self + (-other)

    def __mul__(self, scale) -> "Aff":
        scale = np.broadcast_to(np.asarray(scale, dtype=float), (self.size,))
        return Aff(self.size, [(i, c * scale) for i, c in self.terms], self.const * scale)

    __rmul__ = __mul__

    def triplets(self, row0: int):
        rows = np.arange(row0, row0 + self.size)
        if not self.terms:
            return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
        r = np.concatenate([rows] * len(self.terms))
        cidx = np.concatenate([t[0] for t in self.terms])
        v = np.concatenate([t[1] for t in self.terms])
        keep = v != 0
        return r[keep], cidx[keep], v[keep]


class ProgramBuilder:
    """Accumulates variables, equality rows and cone rows; ``build`` snapshots
    a :class:`ConeProgram`. The builder can keep growing after a snapshot."""

    def __init__(self):
        self.num_vars = 0
        self.names: list[str] = []
        self._cost: list[tuple[np.ndarray, np.ndarray]] = []
        self.offset = 0.0
        self._eq = _RowStore()
        self._cone = _RowStore()
        self._cones: list[Cone] = []

    def add_vars(self, count: int, name: str = "v") -> np.ndarray:
        idx = np.arange(self.num_vars, self.num_vars + count)
        self.num_vars += count
        self.names.extend(f"{name}[{k}]" for k in range(count))
        return idx

    def add_cost(self, idx, coef) -> None:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        self._cost.append((idx, np.broadcast_to(np.asarray(coef, dtype=float), idx.shape).copy()))

    def add_eq(self, expr: Aff) -> None:
        """Rows ``expr == 0``."""
        self._eq.append(expr)

    def add_nonneg(self, expr: Aff) -> None:
        """Rows ``expr >= 0``."""
        if expr.size == 0:
            return
        self._cone.append(-expr)
        self._push_cone(Cone("nonneg", 1, expr.size))

    def add_rsoc(self, s: Aff, z: Aff, *v: Aff) -> None:
        """Cones ``s * z >= ||v||^2`` with ``s, z >= 0``, one per batch entry."""
        k = s.size
        if k == 0:
            return
        parts = [s, z, *v]
        _check_batch(parts)
        # interleave so each cone occupies consecutive rows
        dim = len(parts)
        base = self._cone.rows
        for off, part in enumerate(parts):
            self._cone.append_strided(-part, base + off, dim)
        self._cone.rows = base + dim * k
        self._push_cone(Cone("rsoc", dim, k))

    def add_soc(self, t: Aff, *u: Aff) -> None:
        k = t.size
        if k == 0:
            return
        parts = [t, *u]
        _check_batch(parts)
        dim = len(parts)
        base = self._cone.rows
        for off, part in enumerate(parts):
            self._cone.append_strided(-part, base + off, dim)
        self._cone.rows = base + dim * k
        self._push_cone(Cone("soc", dim, k))

    def _push_cone(self, cone: Cone) -> None:
        if self._cones and self._cones[-1].kind == cone.kind and self._cones[-1].dim == cone.dim:
            last = self._cones[-1]
            self._cones[-1] = Cone(last.kind, last.dim, last.count + cone.count)
        else:
            self._cones.append(cone)

    def build(self) -> ConeProgram:
        n = self.num_vars
        c = np.zeros(n)
        for idx, coef in self._cost:
            np.add.at(c, idx, coef)
        A, b = self._eq.matrix(n)
        G, h = self._cone.matrix(n)
        return ConeProgram(c, A, b, G, h, tuple(self._cones), self.offset, tuple(self.names))


def _check_batch(parts) -> None:
    sizes = {part.size for part in parts}
    if len(sizes) != 1:
        raise ValueError(f"cone parts must share one batch size, got {sorted(sizes)}")


class _RowStore:
    """Triplet storage for a stack of affine rows ``g'x + k``.

    ``matrix`` returns ``(M, -k)``. Equality rows are stored as given, so
    ``M x = -k`` means ``expr == 0``; cone rows are stored negated, so the
    program row ``h - G x`` reproduces the original expression.
    """

    def __init__(self):
        self.r: list[np.ndarray] = []
        self.c: list[np.ndarray] = []
        self.v: list[np.ndarray] = []
        self.k: list[tuple[np.ndarray, np.ndarray]] = []
        self.rows = 0

    def append(self, expr: Aff) -> None:
        r, c, v = expr.triplets(self.rows)
        self.r.append(r)
        self.c.append(c)
        self.v.append(v)
        self.k.append((np.arange(self.rows, self.rows + expr.size), expr.const))
        self.rows += expr.size

    def append_strided(self, expr: Aff, start: int, stride: int) -> None:
        rows = start + stride * np.arange(expr.size)
        for idx, coef in expr.terms:
            keep = coef != 0
            self.r.append(rows[keep])
            self.c.append(idx[keep])
            self.v.append(coef[keep])
        self.k.append((rows, expr.const))

    def matrix(self, n: int):
        m = self.rows
        if self.r:
            r = np.concatenate(self.r)
            c = np.concatenate(self.c)
            v = np.concatenate(self.v)
        else:
            r = c = np.empty(0, np.int64)
            v = np.empty(0)
        M = sp.csr_matrix((v, (r, c)), shape=(m, n))
        rhs = np.zeros(m)
        for rows, const in self.k:
            np.add.at(rhs, rows, const)
        return M, -rhs
