"""Reference primal-dual interior-point method for nonnegative and
second-order cone programs.

Homogeneous self-dual embedding with Nesterov-Todd scaling and a Mehrotra
predictor-corrector, in the style of ECOS. The KKT system

    [ reg*I   A'      G'          ]
    [ A      -reg*I   0           ]
    [ G       0      -(W'W+reg*I) ]

is quasi-definite and factored with a sparse LDL' (qdldl, AMD ordering), with
SuperLU as a fallback. Iterative refinement runs against the unregularized
matrix. Rotated cones are mapped to second-order cones internally.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .program import ConeProgram

log = logging.getLogger(__name__)

try:  # pragma: no cover - exercised implicitly
    import qdldl as _qdldl
except ImportError:  # pragma: no cover
    _qdldl = None


@dataclass
class IPMSettings:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    static_reg: float = 1e-8
    refine_steps: int = 20
    step_fraction: float = 0.99
    # every cone's complementarity must stay above this fraction of mu
    centrality: float = 1e-4
    # a stalled solve whose best iterate meets these is reported near_optimal
    reduced_feas_tol: float = 1e-6
    reduced_gap_tol: float = 1e-5
    equilibrate: int = 15
    verbose: bool = False


@dataclass
class IPMResult:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    status: str
    iterations: int
    pcost: float
    dcost: float
    pres: float
    dres: float
    gap: float
    solve_time: float


# ---------------------------------------------------------------------------
# cone algebra on the internal layout: [nonneg | soc groups by dim]


class _Cones:
    def __init__(self, n_lin: int, soc_groups: list[tuple[int, int, int]]):
        # soc_groups: (start_row, dim, count)
        self.l = n_lin
        self.groups = soc_groups
        self.m = n_lin + sum(d * k for _, d, k in soc_groups)
        self.degree = n_lin + sum(k for _, _, k in soc_groups)
        e = np.zeros(self.m)
        e[:n_lin] = 1.0
        for start, d, k in soc_groups:
            e[start:start + d * k:d] = 1.0
        self.e = e

    def blocks(self, v):
        for start, d, k in self.groups:
            yield v[start:start + d * k].reshape(k, d)

    # -- Jordan algebra -----------------------------------------------------
    def circ(self, u, v):
        out = np.empty_like(u)
        out[:self.l] = u[:self.l] * v[:self.l]
        for (start, d, k), U, V in zip(self.groups, self.blocks(u), self.blocks(v)):
            O = out[start:start + d * k].reshape(k, d)
            O[:, 0] = np.einsum("ij,ij->i", U, V)
            O[:, 1:] = U[:, :1] * V[:, 1:] + V[:, :1] * U[:, 1:]
        return out

    def circdiv(self, u, w):
        """Solve u o x = w for x (u interior)."""
        out = np.empty_like(u)
        out[:self.l] = w[:self.l] / u[:self.l]
        for (start, d, k), U, Wb in zip(self.groups, self.blocks(u), self.blocks(w)):
            O = out[start:start + d * k].reshape(k, d)
            u0, u1 = U[:, 0], U[:, 1:]
            det = u0 * u0 - np.einsum("ij,ij->i", u1, u1)
            x0 = (u0 * Wb[:, 0] - np.einsum("ij,ij->i", u1, Wb[:, 1:])) / det
            O[:, 0] = x0
            O[:, 1:] = (Wb[:, 1:] - x0[:, None] * u1) / u0[:, None]
        return out

    def products(self, s, z):
        """Per-cone complementarity: ``s_i z_i`` or ``sqrt(det s det z)``."""
        parts = [s[:self.l] * z[:self.l]]
        for S, Z in zip(self.blocks(s), self.blocks(z)):
            ds = np.maximum(S[:, 0] ** 2 - np.einsum("ij,ij->i", S[:, 1:], S[:, 1:]), 0.0)
            dz = np.maximum(Z[:, 0] ** 2 - np.einsum("ij,ij->i", Z[:, 1:], Z[:, 1:]), 0.0)
            parts.append(np.sqrt(ds * dz))
        return np.concatenate(parts)

    def margin(self, v):
        """Smallest 'eigenvalue' of v per cone, as one array."""
        parts = [v[:self.l]]
        for B in self.blocks(v):
            parts.append(B[:, 0] - np.linalg.norm(B[:, 1:], axis=1))
        return np.concatenate(parts) if parts else np.empty(0)

    def shift_interior(self, v):
        mg = self.margin(v)
        if mg.size == 0:
            return v
        alpha = -mg.min()
        if alpha < 0:
            return v
        return v + (1.0 + alpha) * self.e

    def max_step(self, v, dv):
        """Largest alpha with v + alpha*dv in the cone (v interior)."""
        amax = np.inf
        lin = dv[:self.l]
        neg = lin < 0
        if np.any(neg):
            amax = min(amax, float(np.min(-v[:self.l][neg] / lin[neg])))
        for (start, d, k), V, D in zip(self.groups, self.blocks(v), self.blocks(dv)):
            a = D[:, 0] ** 2 - np.einsum("ij,ij->i", D[:, 1:], D[:, 1:])
            b = V[:, 0] * D[:, 0] - np.einsum("ij,ij->i", V[:, 1:], D[:, 1:])
            c = V[:, 0] ** 2 - np.einsum("ij,ij->i", V[:, 1:], V[:, 1:])
            c = np.maximum(c, 0.0)
            disc = b * b - a * c
            alpha = np.full(k, np.inf)
            with np.errstate(divide="ignore", invalid="ignore"):
                real = disc >= 0
                sq = np.sqrt(np.where(real, disc, 0.0))
                q = -(b + np.where(b >= 0, sq, -sq))
                r1 = np.where(a != 0, q / a, np.inf)
                r2 = np.where(q != 0, c / q, np.inf)
            for r in (r1, r2):
                ok = real & (r > 0) & np.isfinite(r)
                alpha = np.where(ok, np.minimum(alpha, r), alpha)
            # a cone whose axis component runs negative without a real root
            # cannot happen; guard the degenerate linear case a == 0
            lin_case = (a == 0) & (b < 0)
            alpha = np.where(lin_case, np.minimum(alpha, -c / (2 * np.where(lin_case, b, -1.0))), alpha)
            if alpha.size:
                amax = min(amax, float(alpha.min()))
        return amax

    # -- Nesterov-Todd scaling ---------------------------------------------
    def nt_scaling(self, s, z):
        """Return (lambda, scaling) with lambda = W z = W^{-1} s."""
        sc = {}
        sc["lin"] = np.sqrt(s[:self.l] / z[:self.l])
        soc = []
        for S, Z in zip(self.blocks(s), self.blocks(z)):
            sres = np.maximum(S[:, 0] ** 2 - np.einsum("ij,ij->i", S[:, 1:], S[:, 1:]), 1e-300)
            zres = np.maximum(Z[:, 0] ** 2 - np.einsum("ij,ij->i", Z[:, 1:], Z[:, 1:]), 1e-300)
            sb = S / np.sqrt(sres)[:, None]
            zb = Z / np.sqrt(zres)[:, None]
            gam = np.sqrt(np.maximum((1.0 + np.einsum("ij,ij->i", sb, zb)) / 2.0, 1e-300))
            w0 = (sb[:, 0] + zb[:, 0]) / (2 * gam)
            w1 = (sb[:, 1:] - zb[:, 1:]) / (2 * gam)[:, None]
            eta = (sres / zres) ** 0.25
            soc.append((eta, w0, w1))
        sc["soc"] = soc
        lam = self.apply_W(sc, z)
        return lam, sc

    def apply_W(self, sc, v, inverse=False):
        out = np.empty_like(v)
        if inverse:
            out[:self.l] = v[:self.l] / sc["lin"]
        else:
            out[:self.l] = v[:self.l] * sc["lin"]
        for (start, d, k), V, (eta, w0, w1) in zip(self.groups, self.blocks(v), sc["soc"]):
            O = out[start:start + d * k].reshape(k, d)
            sgn = -1.0 if inverse else 1.0
            v0, v1 = V[:, 0], V[:, 1:]
            w1v1 = np.einsum("ij,ij->i", w1, v1)
            O[:, 0] = w0 * v0 + sgn * w1v1
            O[:, 1:] = v1 + (sgn * v0 + w1v1 / (1.0 + w0))[:, None] * w1
            if inverse:
                O /= eta[:, None]
            else:
                O *= eta[:, None]
        return out

    def W2_blocks(self, sc):
        """Dense d x d blocks of W'W per SOC group."""
        mats = []
        for (start, d, k), (eta, w0, w1) in zip(self.groups, sc["soc"]):
            # W'W = eta^2 (2 w w' - J) with w = (w0, w1)
            w = np.concatenate([w0[:, None], w1], axis=1)
            M = 2.0 * w[:, :, None] * w[:, None, :]
            M[:, 0, 0] -= 1.0
            idx = np.arange(1, d)
            M[:, idx, idx] += 1.0
            mats.append(M * (eta ** 2)[:, None, None])
        return mats


# ---------------------------------------------------------------------------


def _rsoc_to_soc(prog: ConeProgram):
    """Rewrite the cone rows into [nonneg | soc...] order. Returns the new
    (G, h), the row permutation/transform needed to map duals back, and the
    internal cone description."""
    G = prog.G.tocsr()
    h = prog.h
    lin_rows, soc_by_dim = [], {}
    T_rows, T_cols, T_vals = [], [], []
    pos = 0
    for cone in prog.cones:
        rows = np.arange(pos, pos + cone.rows)
        pos += cone.rows
        if cone.kind == "nonneg":
            lin_rows.append(rows)
        else:
            soc_by_dim.setdefault(cone.dim, []).append((cone.kind, rows.reshape(cone.count, cone.dim)))
    lin = np.concatenate(lin_rows) if lin_rows else np.empty(0, np.int64)
    n_lin = lin.size
    # transformation matrix T so that internal slack = T @ original slack
    T_rows.append(np.arange(n_lin))
    T_cols.append(lin)
    T_vals.append(np.ones(n_lin))
    groups = []
    r0 = n_lin
    for d in sorted(soc_by_dim):
        start = r0
        count = 0
        for kind, R in soc_by_dim[d]:
            k = R.shape[0]
            base = r0 + d * np.arange(k)
            if kind == "soc":
                for j in range(d):
                    T_rows.append(base + j)
                    T_cols.append(R[:, j])
                    T_vals.append(np.ones(k))
            else:
                # (s, z, v) -> (s + z, s - z, 2 v)
                for (tr, sc_, col) in ((0, 1.0, 0), (0, 1.0, 1), (1, 1.0, 0), (1, -1.0, 1)):
                    T_rows.append(base + tr)
                    T_cols.append(R[:, col])
                    T_vals.append(np.full(k, sc_))
                for j in range(2, d):
                    T_rows.append(base + j)
                    T_cols.append(R[:, j])
                    T_vals.append(np.full(k, 2.0))
            r0 += d * k
            count += k
        groups.append((start, d, count))
    m = prog.h.size
    T = sp.csr_matrix((np.concatenate(T_vals), (np.concatenate(T_rows), np.concatenate(T_cols))),
                      shape=(m, m))
    return (T @ G).tocsr(), T @ h, T, _Cones(n_lin, groups)


def _equilibrate(A, G, cones: _Cones, iters: int):
    n = A.shape[1]
    D = np.ones(n)
    EA = np.ones(A.shape[0])
    EG = np.ones(G.shape[0])
    if iters <= 0:
        return D, EA, EG
    Aw, Gw = A.copy(), G.copy()
    for _ in range(iters):
        Ac, Gc = abs(Aw).tocsc(), abs(Gw).tocsc()
        cn = np.maximum(
            Ac.max(axis=0).toarray().ravel() if Ac.shape[0] else np.zeros(n),
            Gc.max(axis=0).toarray().ravel() if Gc.shape[0] else np.zeros(n),
        )
        cn = np.where(cn > 0, cn, 1.0)
        ra = abs(Aw).max(axis=1).toarray().ravel() if Aw.shape[0] else np.zeros(0)
        rg = abs(Gw).max(axis=1).toarray().ravel() if Gw.shape[0] else np.zeros(0)
        # SOC rows share one factor per cone
        for (start, d, k) in cones.groups:
            blk = rg[start:start + d * k].reshape(k, d)
            blk[:] = blk.max(axis=1, keepdims=True)
        ra = np.where(ra > 0, ra, 1.0)
        rg = np.where(rg > 0, rg, 1.0)
        dc = 1.0 / np.sqrt(cn)
        da, dg = 1.0 / np.sqrt(ra), 1.0 / np.sqrt(rg)
        D *= dc
        EA *= da
        EG *= dg
        Aw = sp.diags(da) @ Aw @ sp.diags(dc)
        Gw = sp.diags(dg) @ Gw @ sp.diags(dc)
        if np.all(np.abs(cn - 1) < 0.1) and np.all(np.abs(rg - 1) < 0.1):
            break
    return D, EA, EG


class _KKT:
    """Factor and solve the quasi-definite KKT system for a fixed pattern."""

    def __init__(self, A, G, cones: _Cones, reg: float):
        self.n, self.p, self.m = A.shape[1], A.shape[0], G.shape[0]
        self.cones = cones
        self.reg = reg
        n, p, m = self.n, self.p, self.m
        N = n + p + m
        # pattern of the (3,3) block: diagonal for nonneg, dense d x d per SOC
        rr, cc = [np.arange(m)], [np.arange(m)]
        for start, d, k in cones.groups:
            base = start + d * np.arange(k)
            ii, jj = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
            rr.append((base[:, None] + ii.ravel()[None, :]).ravel())
            cc.append((base[:, None] + jj.ravel()[None, :]).ravel())
        self._h_rows = np.concatenate(rr) + n + p
        self._h_cols = np.concatenate(cc) + n + p
        At = A.T.tocoo()
        Gt = G.T.tocoo()
        # upper triangle: (1,2) block A', (1,3) block G', diagonals
        rows = [np.arange(n), At.row, Gt.row, n + np.arange(p), self._h_rows]
        cols = [np.arange(n), n + At.col, n + p + Gt.col, n + np.arange(p), self._h_cols]
        vals = [np.zeros(n), At.data, Gt.data, np.zeros(p), np.zeros(self._h_rows.size)]
        self._rows = np.concatenate(rows)
        self._cols = np.concatenate(cols)
        keep = self._rows <= self._cols
        self._keep = keep
        self._vals0 = np.concatenate(vals)
        self.N = N
        self._solver = None
        self._lu = None
        # symmetric unregularized operator pieces for refinement
        self.A, self.G = A, G

    def _assemble(self, w2_lin, w2_blocks, reg_pd):
        n, p = self.n, self.p
        vals = self._vals0.copy()
        off = 0
        vals[off:off + n] = reg_pd
        off += n + self.A.nnz + self.G.nnz
        vals[off:off + p] = -reg_pd
        off += p
        m = self.m
        hv = np.zeros(self._h_rows.size)
        hv[:m] = 0.0
        hv[:self.cones.l] = -w2_lin
        # soc diagonal entries come from the dense blocks; keep diagonal slot
        # for regularization only
        hv[:m] -= reg_pd
        pos = m
        for M in w2_blocks:
            sz = M.shape[0] * M.shape[1] * M.shape[2]
            hv[pos:pos + sz] = -M.reshape(-1)
            pos += sz
        vals[off:] = hv
        rows, cols, vals = self._rows[self._keep], self._cols[self._keep], vals[self._keep]
        K = sp.csc_matrix((vals, (rows, cols)), shape=(self.N, self.N))
        return K

    def factor(self, w2_lin, w2_blocks):
        self.w2_lin, self.w2_blocks = w2_lin, w2_blocks
        K = self._assemble(w2_lin, w2_blocks, self.reg)
        if _qdldl is not None:
            try:
                if self._solver is None:
                    self._solver = _qdldl.Solver(K, upper=True)
                else:
                    self._solver.update(K, upper=True)
                return
            except Exception as exc:  # pragma: no cover - numerical breakdown
                log.debug("qdldl failed (%s); falling back to SuperLU", exc)
                self._solver = None
        from scipy.sparse.linalg import splu

        full = K + sp.triu(K, 1).T
        self._lu = splu(full.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                        options={"SymmetricMode": True})

    def _raw_solve(self, r):
        if self._solver is not None:
            return self._solver.solve(r)
        return self._lu.solve(r)

    def _apply(self, v):
        """Unregularized KKT operator."""
        n, p = self.n, self.p
        x, y, z = v[:n], v[n:n + p], v[n + p:]
        out = np.empty_like(v)
        out[:n] = self.A.T @ y + self.G.T @ z
        out[n:n + p] = self.A @ x
        hz = np.empty_like(z)
        hz[:self.cones.l] = self.w2_lin * z[:self.cones.l]
        for (start, d, k), M in zip(self.cones.groups, self.w2_blocks):
            Z = z[start:start + d * k].reshape(k, d)
            hz[start:start + d * k] = np.einsum("kij,kj->ki", M, Z).ravel()
        out[n + p:] = self.G @ x - hz
        return out

    def solve(self, rhs, steps: int):
        """Regularized solve refined against the exact operator; stops once
        a step fails to halve the residual."""
        sol = self._raw_solve(rhs)
        nrm = max(1.0, np.max(np.abs(rhs)))
        err = np.max(np.abs(rhs - self._apply(sol)))
        for _ in range(steps):
            if err <= 1e-14 * nrm:
                break
            cand = sol + self._raw_solve(rhs - self._apply(sol))
            cerr = np.max(np.abs(rhs - self._apply(cand)))
            if not cerr < err:
                break
            sol, done, err = cand, cerr > 0.5 * err, cerr
            if done:
                break
        return sol


def solve_ipm(prog: ConeProgram, settings: IPMSettings | None = None) -> IPMResult:
    st = settings or IPMSettings()
    t0 = time.perf_counter()
    G0, h0, T, cones = _rsoc_to_soc(prog)
    A0 = prog.A.tocsr()
    b0, c0 = prog.b.astype(float), prog.c.astype(float)
    n, p, m = c0.size, b0.size, h0.size

    D, EA, EG = _equilibrate(A0, G0, cones, st.equilibrate)
    A = (sp.diags(EA) @ A0 @ sp.diags(D)).tocsr()
    G = (sp.diags(EG) @ G0 @ sp.diags(D)).tocsr()
    b, h, c = EA * b0, EG * h0, D * c0
    cscale = max(1.0, np.max(np.abs(c), initial=0.0))
    c = c / cscale

    kkt = _KKT(A, G, cones, st.static_reg)
    nb, nh, nc = (max(1.0, _inf(v)) for v in (b0, h0, c0))

    def unscale(x, y, z, s, tau):
        xu = D * x / tau
        yu = EA * y / tau * cscale
        zu = EG * z / tau * cscale
        su = s / EG / tau
        return xu, yu, zu, su

    def metrics(x, y, z, s, tau):
        xu, yu, zu, su = unscale(x, y, z, s, tau)
        pres = max(_inf(A0 @ xu - b0) / nb if p else 0.0,
                   _inf(G0 @ xu + su - h0) / nh if m else 0.0)
        dres = _inf(A0.T @ yu + G0.T @ zu + c0) / nc
        pcost = float(c0 @ xu)
        dcost = float(-(b0 @ yu) - (h0 @ zu))
        gap = float(su @ zu)
        return xu, yu, zu, su, pres, dres, pcost, dcost, gap

    # initialization: two least-squares style solves with W = I
    kkt.factor(np.ones(cones.l), [np.broadcast_to(np.eye(d), (k, d, d)).copy() for _, d, k in cones.groups])
    sol = kkt.solve(np.concatenate([np.zeros(n), b, h]), st.refine_steps)
    x = sol[:n]
    s = cones.shift_interior(-sol[n + p:])
    sol = kkt.solve(np.concatenate([-c, np.zeros(p), np.zeros(m)]), st.refine_steps)
    y = sol[n:n + p]
    z = cones.shift_interior(sol[n + p:])
    tau, kap = 1.0, 1.0
    status = "max_iter"
    best = None
    it = 0
    for it in range(st.max_iter + 1):
        xu, yu, zu, su, pres, dres, pcost, dcost, gap = metrics(x, y, z, s, tau)
        relgap = abs(pcost - dcost) / (1.0 + abs(pcost))
        if st.verbose:
            log.info("it %3d pcost % .8e dcost % .8e pres %.2e dres %.2e gap %.2e tau %.2e kap %.2e",
                     it, pcost, dcost, pres, dres, relgap, tau, kap)
        score = max(pres, dres, relgap)
        if best is None or score < best[0]:
            best = (score, (xu, yu, zu, su, pres, dres, pcost, dcost, relgap))
        if pres <= st.feas_tol and dres <= st.feas_tol and relgap <= st.gap_tol:
            status = "optimal"
            break
        # infeasibility certificates (unnormalized by tau)
        hz_by = float(h @ z + b @ y)
        if hz_by < 0:
            r = _inf(A.T @ y + G.T @ z)
            if r <= st.feas_tol * -hz_by and tau < kap:
                status = "infeasible"
                break
        cx = float(c @ x)
        if cx < 0:
            r = max(_inf(A @ x) if p else 0.0, _inf(G @ x + s))
            if r <= st.feas_tol * -cx and tau < kap:
                status = "unbounded"
                break
        if it == st.max_iter:
            break

        lam, sc = cones.nt_scaling(s, z)
        w2_blocks = cones.W2_blocks(sc)
        try:
            kkt.factor(sc["lin"] ** 2, w2_blocks)
        except Exception as exc:  # pragma: no cover
            log.warning("KKT factorization failed: %s", exc)
            status = "numerical_failure"
            break
        mu = (s @ z + kap * tau) / (cones.degree + 1)

        R1 = A.T @ y + G.T @ z + c * tau
        R2 = -(A @ x) + b * tau
        R3 = -(G @ x) + h * tau - s
        R4 = -(c @ x) - (b @ y) - (h @ z) - kap

        u1 = kkt.solve(np.concatenate([-c, b, h]), st.refine_steps)
        x1, y1, z1 = u1[:n], u1[n:n + p], u1[n + p:]
        den = c @ x1 + b @ y1 + h @ z1 - kap / tau

        def direction(rhs_s, rhs_k, rfac):
            q = cones.circdiv(lam, rhs_s)
            Wq = cones.apply_W(sc, q)
            u0 = kkt.solve(np.concatenate([-rfac * R1, rfac * R2, rfac * R3 - Wq]), st.refine_steps)
            x0, y0, z0 = u0[:n], u0[n:n + p], u0[n + p:]
            dtau = (rfac * R4 - (c @ x0 + b @ y0 + h @ z0) - rhs_k / tau) / den
            dx, dy, dz = x0 + dtau * x1, y0 + dtau * y1, z0 + dtau * z1
            # slack step from the linearized primal rows keeps residuals in check
            ds = rfac * R3 - G @ dx + h * dtau
            dkap = (rhs_k - kap * dtau) / tau
            return dx, dy, dz, ds, dtau, dkap

        # predictor
        aff = direction(-cones.circ(lam, lam), -kap * tau, 1.0)
        a_aff = _step(cones, s, z, tau, kap, aff, 1.0)
        sigma = min(1.0, max(0.0, (1.0 - a_aff) ** 3))
        # corrector
        dx_a, dy_a, dz_a, ds_a, dtau_a, dkap_a = aff
        corr = cones.circ(cones.apply_W(sc, ds_a, inverse=True), cones.apply_W(sc, dz_a))
        rhs_s = -cones.circ(lam, lam) - corr + sigma * mu * cones.e
        rhs_k = -kap * tau - dkap_a * dtau_a + sigma * mu
        dirn = direction(rhs_s, rhs_k, 1.0 - sigma)
        alpha = _step(cones, s, z, tau, kap, dirn, st.step_fraction)
        alpha = _keep_central(cones, s, z, tau, kap, dirn, alpha, st.centrality)
        dx, dy, dz, ds, dtau, dkap = dirn
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kap = kap + alpha * dkap
        if alpha < 1e-10 or not np.isfinite(tau) or tau <= 0:
            status = "numerical_failure"
            break

    if status in ("numerical_failure", "max_iter"):
        _, (_, _, _, _, bp, bd, _, _, bg) = best
        if bp <= st.reduced_feas_tol and bd <= st.reduced_feas_tol and bg <= st.reduced_gap_tol:
            status = "near_optimal"
    if status in ("infeasible", "unbounded"):
        xu, yu, zu, su, pres, dres, pcost, dcost, relgap = unscale(x, y, z, s, 1.0) + (np.nan,) * 5
    else:
        xu, yu, zu, su, pres, dres, pcost, dcost, relgap = best[1]
    # dual of the user's cone rows: internal slack = T @ original slack
    z_user = T.T @ zu if m else zu
    return IPMResult(xu, yu, z_user, np.asarray(sp.linalg.spsolve(T.tocsc(), su)) if m else su,
                     status, it, pcost, dcost, pres, dres, relgap, time.perf_counter() - t0)


def _inf(v) -> float:
    return float(np.max(np.abs(v), initial=0.0))


def _step(cones: _Cones, s, z, tau, kap, dirn, frac):
    dx, dy, dz, ds, dtau, dkap = dirn
    a = min(cones.max_step(s, ds), cones.max_step(z, dz))
    if dtau < 0:
        a = min(a, -tau / dtau)
    if dkap < 0:
        a = min(a, -kap / dkap)
    return min(1.0, frac * a)


def _keep_central(cones: _Cones, s, z, tau, kap, dirn, alpha, beta, shrink=0.8, tries=40):
    """Shorten ``alpha`` until no cone pair falls far below the average
    complementarity; the full step is kept when no shortened step qualifies."""
    dx, dy, dz, ds, dtau, dkap = dirn
    a = alpha
    for _ in range(tries):
        s1, z1 = s + a * ds, z + a * dz
        t1, k1 = tau + a * dtau, kap + a * dkap
        mu = (s1 @ z1 + t1 * k1) / (cones.degree + 1)
        prod = cones.products(s1, z1)
        if np.min(prod, initial=np.inf) >= beta * mu and t1 * k1 >= beta * mu:
            return a
        a *= shrink
    return alpha

