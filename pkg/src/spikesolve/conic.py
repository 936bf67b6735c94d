"""First-order solver for cone programs.

Problems are stated as::

    minimize    c^T x
    subject to  A x = b,   x in K_1 x K_2 x ... x K_p

where each block ``K_j`` is one of ``free``, ``nonneg``, ``soc`` (second-order
cone ``{(t, z): ||z|| <= t}``) or ``psd`` (symmetric positive semidefinite
matrices stored as packed vectors). The associated dual is::

    maximize    b^T y
    subject to  c - A^T y in K^*

with ``K^*`` equal to ``K`` except that free blocks dualize to ``{0}``.

The solver applies ADMM to the homogeneous self-dual embedding of the
problem (the operator-splitting scheme popularised by SCS) with Ruiz
equilibration, over-relaxation, and certificate-based infeasibility
detection. Everything is deterministic.

Packed storage of a symmetric ``side x side`` matrix lists the upper
triangle row by row, ``(0,0), (0,1), ..., (0,side-1), (1,1), ...``, with
off-diagonal entries multiplied by ``sqrt(2)`` so that the Euclidean inner
product of packed vectors equals the trace inner product.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

SQRT2 = math.sqrt(2.0)
BLOCK_KINDS = ("free", "nonneg", "soc", "psd")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITER = "max-iter"
# problems with at most this many variables plus rows use an explicit inverse
DENSE_LIMIT = 3000


# ---------------------------------------------------------------------------
# packing helpers
# ---------------------------------------------------------------------------

def svec_dim(side: int) -> int:
    return side * (side + 1) // 2


def side_from_dim(dim: int) -> int:
    side = int(round((math.sqrt(8 * dim + 1) - 1) / 2))
    if svec_dim(side) != dim:
        raise ValueError(f"{dim} is not a triangular number")
    return side


@lru_cache(maxsize=None)
def _tri(side: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(side)
    scale = np.where(iu == ju, 1.0, SQRT2)
    for a in (iu, ju, scale):
        a.setflags(write=False)
    return iu, ju, scale


def svec(M: np.ndarray) -> np.ndarray:
    """Pack a symmetric matrix (or a stack of them) into scaled vectors."""
    M = np.asarray(M, dtype=float)
    iu, ju, scale = _tri(M.shape[-1])
    return M[..., iu, ju] * scale


def smat(v: np.ndarray, side: int | None = None) -> np.ndarray:
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=float)
    side = side_from_dim(v.shape[-1]) if side is None else side
    iu, ju, scale = _tri(side)
    M = np.zeros(v.shape[:-1] + (side, side))
    vals = v / scale
    M[..., iu, ju] = vals
    M[..., ju, iu] = vals
    return M


def svec_index(side: int, i: int, j: int) -> int:
    """Position of entry ``(i, j)`` in the packed vector."""
    if i > j:
        i, j = j, i
    return i * side - i * (i - 1) // 2 + (j - i)


def svec_scale(i: int, j: int) -> float:
    return 1.0 if i == j else SQRT2


# ---------------------------------------------------------------------------
# problem / solution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    kind: str
    size: int  # side for psd, vector dimension otherwise

    def __post_init__(self):
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("block size must be positive")

    @property
    def dim(self) -> int:
        return svec_dim(self.size) if self.kind == "psd" else self.size

    def __str__(self) -> str:
        return f"{self.kind} {self.size}"


def as_block(spec) -> Block:
    if isinstance(spec, Block):
        return spec
    kind, size = spec
    return Block(str(kind), int(size))


@dataclass(frozen=True)
class ConicProblem:
    """``min c^T x  s.t.  A x = b,  x in K``; see the module docstring."""

    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    blocks: tuple[Block, ...]
    warm_start: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        blocks = tuple(as_block(bk) for bk in self.blocks)
        c = np.array(self.c, dtype=float).reshape(-1)
        b = np.array(self.b, dtype=float).reshape(-1)
        A = sp.csr_matrix(self.A, dtype=float)
        nvar = sum(bk.dim for bk in blocks)
        if c.shape[0] != nvar:
            raise ValueError(f"objective has length {c.shape[0]}, blocks need {nvar}")
        if A.shape != (b.shape[0], nvar):
            raise ValueError(f"constraint matrix has shape {A.shape}, expected ({b.shape[0]}, {nvar})")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b)) and np.all(np.isfinite(A.data))):
            raise ValueError("problem data must be finite")
        for arr in (c, b):
            arr.setflags(write=False)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_constraints(self) -> int:
        return self.b.shape[0]

    def offsets(self) -> list[int]:
        out, pos = [], 0
        for bk in self.blocks:
            out.append(pos)
            pos += bk.dim
        return out

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        """Cut a variable vector into per-block pieces."""
        return [x[o:o + bk.dim] for o, bk in zip(self.offsets(), self.blocks)]


@dataclass
class ConicSolution:
    status: str
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    primal_objective: float
    dual_objective: float
    residuals: tuple[float, float, float]
    iterations: int
    blocks: tuple[Block, ...] = field(default=(), repr=False)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def block(self, index: int, dual: bool = False) -> np.ndarray:
        """Primal (or dual slack) values of one block; PSD blocks come back as matrices."""
        pos = sum(bk.dim for bk in self.blocks[:index])
        bk = self.blocks[index]
        vec = (self.s if dual else self.x)[pos:pos + bk.dim]
        return smat(vec, bk.size) if bk.kind == "psd" else vec


@dataclass(frozen=True)
class SolverOptions:
    eps: float = 1e-7
    max_iter: int = 200_000
    alpha: float = 1.5
    check_every: int = 10
    scale: bool = True
    ruiz_passes: int = 25
    rho_x: float = 1e-3
    anderson: int = 0
    scale_b: float = 1.0
    scale_c: float = 1.0
    adaptive: bool = True
    aa_safeguard: float = 1.0
    adapt_ratio: float = 10.0
    adapt_every: int = 100


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------

def project_cone(block, v: np.ndarray, dual: bool = False) -> np.ndarray:
    """Euclidean projection of ``v`` onto a block cone (or its dual)."""
    bk = as_block(block)
    v = np.asarray(v, dtype=float)
    if v.shape != (bk.dim,):
        raise ValueError(f"vector of length {v.shape} does not match block {bk}")
    if bk.kind == "free":
        return np.zeros_like(v) if dual else v.copy()
    if bk.kind == "nonneg":
        return np.maximum(v, 0.0)
    if bk.kind == "soc":
        return _proj_soc(v)
    return _proj_psd(v, bk.size)


def _proj_soc(v: np.ndarray) -> np.ndarray:
    t, z = v[0], v[1:]
    nz = float(np.linalg.norm(z))
    if nz <= t:
        return v.copy()
    if nz <= -t:
        return np.zeros_like(v)
    a = 0.5 * (t + nz)
    out = np.empty_like(v)
    out[0] = a
    out[1:] = (a / nz) * z
    return out


def _proj_psd(v: np.ndarray, side: int) -> np.ndarray:
    if side == 1:
        return np.maximum(v, 0.0)
    M = smat(v, side)
    w, Q = np.linalg.eigh(M)
    pos = w > 0
    if not pos.any():
        return np.zeros_like(v)
    if pos.all():
        return v.copy()
    Qp = Q[:, pos] * np.sqrt(w[pos])
    return svec(Qp @ Qp.T)


def _proj_psd_batch(V: np.ndarray, side: int) -> np.ndarray:
    """Project a stack of packed symmetric matrices (rows of ``V``) onto the PSD cone."""
    w, Q = np.linalg.eigh(smat(V, side))
    Qp = Q * np.sqrt(np.maximum(w, 0.0))[..., None, :]
    return svec(Qp @ np.swapaxes(Qp, -1, -2))


# ---------------------------------------------------------------------------
# solver
# ---------------------------------------------------------------------------

class _Embedding:
    """Scaled data of the self-dual embedding and its cached linear solver."""

    def __init__(self, prob: ConicProblem, opts: SolverOptions):
        self.prob = prob
        self.opts = opts
        N, m = prob.num_vars, prob.num_constraints
        # cone rows: one per non-free variable; free variables are unconstrained
        nonfree = []
        cone_blocks = []
        for off, bk in zip(prob.offsets(), prob.blocks):
            if bk.kind != "free":
                nonfree.extend(range(off, off + bk.dim))
                cone_blocks.append(bk)
        self.nonfree = np.array(nonfree, dtype=np.int64)
        self.cone_blocks = cone_blocks
        p = len(nonfree)
        sel = sp.csr_matrix((-np.ones(p), (np.arange(p), self.nonfree)), shape=(p, N))
        As = sp.vstack([prob.A, sel], format="csr")
        bs = np.concatenate([prob.b, np.zeros(p)])
        cs = np.array(prob.c)
        self.N, self.m, self.p = N, m, p
        self.M = m + p

        D = np.ones(self.M)
        E = np.ones(N)
        if opts.scale and As.nnz:
            D, E = self._ruiz(As, opts.ruiz_passes)
        As = sp.diags(D) @ As @ sp.diags(E)
        As = sp.csr_matrix(As)
        bs = D * bs
        cs = E * cs
        nb = float(np.linalg.norm(bs))
        nc = float(np.linalg.norm(cs))
        self.sigma_b = nb if nb > 1e-12 else 1.0
        self.sigma_c = nc if nc > 1e-12 else 1.0
        if not opts.scale:
            self.sigma_b = self.sigma_c = 1.0
        self.D, self.E = D, E
        self.As = As
        self.AsT = sp.csr_matrix(As.T)
        self.sigma_b /= opts.scale_b
        self.sigma_c /= opts.scale_c
        self.bs = bs / self.sigma_b
        self.cs = cs / self.sigma_c
        self._factor()

    # -- equilibration -----------------------------------------------------
    def _ruiz(self, As: sp.csr_matrix, passes: int) -> tuple[np.ndarray, np.ndarray]:
        M, N = As.shape
        D = np.ones(M)
        E = np.ones(N)
        groups = self._row_groups()
        work = sp.csr_matrix(As, copy=True)
        for _ in range(passes):
            absw = abs(work)
            rmax = np.asarray(absw.max(axis=1).todense()).ravel()
            cmax = np.asarray(absw.max(axis=0).todense()).ravel()
            # rows of one SOC/PSD block share a factor so the cone is preserved
            for lo, hi in groups:
                rmax[lo:hi] = rmax[lo:hi].max()
            rmax[rmax < 1e-8] = 1.0
            cmax[cmax < 1e-8] = 1.0
            dr = 1.0 / np.sqrt(rmax)
            dc = 1.0 / np.sqrt(cmax)
            D *= dr
            E *= dc
            work = sp.csr_matrix(sp.diags(dr) @ work @ sp.diags(dc))
            if np.all(np.abs(rmax - 1) < 1e-3) and np.all(np.abs(cmax - 1) < 1e-3):
                break
        np.clip(D, 1e-4, 1e4, out=D)
        np.clip(E, 1e-4, 1e4, out=E)
        return D, E

    def _row_groups(self) -> list[tuple[int, int]]:
        groups = []
        pos = self.m
        for bk in self.cone_blocks:
            if bk.kind in ("soc", "psd"):
                groups.append((pos, pos + bk.dim))
            pos += bk.dim
        return groups

    # -- linear system ---------------------------------------------------------
    def _factor(self):
        N = self.N
        rho = self.opts.rho_x
        K = (self.AsT @ self.As).tocsc() + rho * sp.identity(N, format="csc")
        self.rho = rho
        if N <= 2500:
            self._chol = sla.cho_factor(K.toarray(), lower=True, check_finite=False)
            self._sparse = None
        else:
            self._chol = None
            self._sparse = spla.splu(K)
        self._build_dense()
        self._update_h()

    def _update_h(self):
        h_x, h_y = self.cs, self.bs
        px, py = self._solve_M(h_x, h_y)
        self.p_x, self.p_y = px, py
        self.hp = float(h_x @ px + h_y @ py)
        if self._dense is not None:
            self._h = np.concatenate([h_x, h_y])
            self._p = np.concatenate([px, py])

    def _build_dense(self):
        """Explicit inverse of the quasi-definite system for small problems."""
        N, M = self.N, self.M
        self._dense = None
        if N + M > DENSE_LIMIT or self._chol is None:
            return
        A = self.As.toarray()
        Kinv = sla.cho_solve(self._chol, np.eye(N), check_finite=False)
        KA = Kinv @ A.T
        R = np.empty((N + M, N + M))
        R[:N, :N] = Kinv
        R[:N, N:] = -KA
        R[N:, :N] = A @ Kinv
        R[N:, N:] = np.eye(M) - A @ KA
        self._dense = R

    def rescale_c(self, f: float):
        """Multiply the scaled objective by ``f`` (the iterate must follow)."""
        self.sigma_c /= f
        self.cs = self.cs * f
        self._update_h()

    def _solve_M(self, a1: np.ndarray, a2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # [[rho I, A^T], [-A, I]] [zx; zy] = [a1; a2]
        rhs = a1 - self.AsT @ a2
        if self._chol is not None:
            zx = sla.cho_solve(self._chol, rhs, check_finite=False)
        else:
            zx = self._sparse.solve(rhs)
        zy = a2 + self.As @ zx
        return zx, zy

    def solve_IQ(self, w: np.ndarray) -> np.ndarray:
        N, M = self.N, self.M
        out = np.empty_like(w)
        if self._dense is not None:
            r = self._dense @ w[:N + M]
            zt = (w[-1] + self._h @ r) / (1.0 + self.hp)
            out[:N + M] = r - zt * self._p
            out[-1] = zt
            return out
        rx, ry = self._solve_M(w[:N], w[N:N + M])
        zt = (w[-1] + self.cs @ rx + self.bs @ ry) / (1.0 + self.hp)
        out[:N] = rx - zt * self.p_x
        out[N:N + M] = ry - zt * self.p_y
        out[-1] = zt
        return out

    # -- cone projection on u = (x, y, tau) -----------------------------------
    def _projection_plan(self):
        """Index arrays grouping the cone rows by kind (PSD blocks by side)."""
        pos = self.N + self.m  # y for equality rows is free
        nonneg, soc, psd = [], [], {}
        for bk in self.cone_blocks:
            idx = np.arange(pos, pos + bk.dim)
            if bk.kind == "nonneg" or (bk.kind == "psd" and bk.size == 1):
                nonneg.append(idx)
            elif bk.kind == "soc":
                soc.append(idx)
            else:
                psd.setdefault(bk.size, []).append(idx)
            pos += bk.dim
        self._nonneg = np.concatenate(nonneg) if nonneg else np.zeros(0, dtype=np.int64)
        self._soc = soc
        self._psd = {side: np.stack(rows) for side, rows in psd.items()}

    def project(self, u: np.ndarray) -> np.ndarray:
        if not hasattr(self, "_psd"):
            self._projection_plan()
        out = u.copy()
        if self._nonneg.size:
            out[self._nonneg] = np.maximum(out[self._nonneg], 0.0)
        for idx in self._soc:
            out[idx] = _proj_soc(out[idx])
        for side, idx in self._psd.items():
            out[idx] = _proj_psd_batch(out[idx], side)
        out[-1] = max(out[-1], 0.0)
        return out

    # -- unscaling ---------------------------------------------------------------
    def unscale(self, x_s, y_s, s_s):
        x = self.E * x_s * self.sigma_b
        y = self.D * y_s * self.sigma_c
        s = s_s / self.D * self.sigma_b
        return x, y, s


def _residuals(prob: ConicProblem, x: np.ndarray, y_eq: np.ndarray, z: np.ndarray):
    """Residuals in the caller's form: primal ``Ax=b``, dual ``c - A^T y = z``."""
    A, b, c = prob.A, prob.b, prob.c
    rp = float(np.linalg.norm(A @ x - b)) / (1.0 + float(np.linalg.norm(b)))
    rd = float(np.linalg.norm(c - A.T @ y_eq - z)) / (1.0 + float(np.linalg.norm(c)))
    pobj = float(c @ x)
    dobj = float(b @ y_eq)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    return rp, rd, gap, pobj, dobj


def _cone_distance(prob: ConicProblem, v: np.ndarray, dual: bool) -> float:
    out = 0.0
    for off, bk in zip(prob.offsets(), prob.blocks):
        seg = v[off:off + bk.dim]
        out += float(np.sum((seg - project_cone(bk, seg, dual=dual)) ** 2))
    return math.sqrt(out)


def solve(prob: ConicProblem, opts: SolverOptions | None = None, **overrides) -> ConicSolution:
    """Solve a :class:`ConicProblem`.

    Parameters
    ----------
    prob : ConicProblem
    opts : SolverOptions, optional
        Tolerance ``eps`` applies to relative primal residual, dual residual,
        and duality gap.
    **overrides
        Individual option fields, e.g. ``eps=1e-9``.

    Returns
    -------
    ConicSolution
        On ``optimal`` the primal ``x`` lies in ``K`` and the dual slack
        ``s = c - A^T y`` lies in ``K^*`` exactly (both are projected); the
        residuals quantify the remaining equality violation. On ``max-iter``
        the best iterate seen is returned.
    """
    opts = opts or SolverOptions()
    if overrides:
        opts = SolverOptions(**{**opts.__dict__, **overrides})
    emb = _Embedding(prob, opts)
    N, M = emb.N, emb.M
    L = N + M + 1
    u = np.zeros(L)
    v = np.zeros(L)
    u[-1] = 1.0
    v[-1] = 1.0
    if prob.warm_start is not None:
        x0, y0 = prob.warm_start
        u[:N] = np.asarray(x0) / emb.E / emb.sigma_b
        u[N:N + emb.m] = -np.asarray(y0) / emb.D[:emb.m] / emb.sigma_c
    alpha = opts.alpha
    rho = emb.rho

    def fixed_point(u, v):
        """One ADMM step written as a map of the pre-projection point ``z``."""
        w = u + v
        w[:N] *= rho  # the x-block of the system carries rho_x
        ut = emb.solve_IQ(w)
        return alpha * ut + (1.0 - alpha) * u - v

    def split(z):
        # Moreau decomposition: u in the cone, v = u - z in the polar side
        u = emb.project(z)
        return u, u - z

    best = None
    best_score = math.inf
    it = 0
    status = MAX_ITER
    aa = _Anderson(opts.anderson) if opts.anderson > 0 else None
    c_scale = 1.0
    z = fixed_point(u, v)
    u, v = split(z)
    fz = fixed_point(u, v)
    res_z = float(np.linalg.norm(fz - z))
    for it in range(1, opts.max_iter + 1):
        cand = aa.extrapolate(z, fz) if aa is not None else fz
        u, v = split(cand)
        fc = fixed_point(u, v)
        res_c = float(np.linalg.norm(fc - cand))
        if aa is not None and cand is not fz and res_c > opts.aa_safeguard * res_z:
            # reject the extrapolation and fall back to the plain step
            aa.reset()
            cand = fz
            u, v = split(cand)
            fc = fixed_point(u, v)
            res_c = float(np.linalg.norm(fc - cand))
        z, fz, res_z = cand, fc, res_c
        # residuals are measured on u = proj(z), whose y and s parts lie
        # exactly in their cones
        check = it % opts.check_every == 0 or it == opts.max_iter
        if check:
            res = _evaluate(prob, emb, u, v)
            if res is not None:
                kind, payload = res
                if kind == "cert":
                    status = payload[0]
                    best = payload[1:]
                    break
                rp, rd, gap, pobj, dobj, x, y_eq, zd = payload
                score = max(rp, rd, gap)
                if score < best_score:
                    best_score = score
                    best = (x, y_eq, zd, pobj, dobj, (rp, rd, gap))
                if score <= opts.eps:
                    status = OPTIMAL
                    break
                if opts.adaptive and it % opts.adapt_every == 0 and rp > 0 and rd > 0:
                    # rebalance primal against dual progress by rescaling c;
                    # y and kappa carry the objective scale and follow it
                    ratio = rd / rp
                    if ratio > opts.adapt_ratio or ratio < 1.0 / opts.adapt_ratio:
                        f = min(max(math.sqrt(ratio), 0.01), 100.0)
                        f = min(max(f, 1e-4 / c_scale), 1e4 / c_scale)
                        if f != 1.0:
                            c_scale *= f
                            emb.rescale_c(f)
                            u = u.copy()
                            v = v.copy()
                            u[N:N + M] *= f
                            v[-1] *= f
                            z = u - v
                            fz = fixed_point(u, v)
                            res_z = float(np.linalg.norm(fz - z))
                            if aa is not None:
                                aa.reset()
    if best is None:
        x = np.zeros(N)
        y_eq = np.zeros(emb.m)
        z = np.array(prob.c)
        rp, rd, gap, pobj, dobj = _residuals(prob, x, y_eq, z)
        best = (x, y_eq, z, pobj, dobj, (rp, rd, gap))
    x, y_eq, z, pobj, dobj, resid = best
    return ConicSolution(status, x, y_eq, z, pobj, dobj, resid, it, prob.blocks)


def _evaluate(prob: ConicProblem, emb: _Embedding, u: np.ndarray, v: np.ndarray):
    N, m = emb.N, emb.m
    tau = u[-1]
    kappa = v[-1]
    xs = u[:N]
    ys = u[N:N + emb.M]
    ss = v[N:N + emb.M]
    if tau > 1e-10 * max(1.0, kappa):
        x, y, s = emb.unscale(xs / tau, ys / tau, ss / tau)
        # x: the cone variables equal the slack of the selector rows; use the
        # projected slack to return a point exactly in K
        x_k = np.array(x)
        x_k[emb.nonfree] = s[m:]
        y_eq = -y[:m]
        z = np.zeros(N)
        z[emb.nonfree] = y[m:]
        rp, rd, gap, pobj, dobj = _residuals(prob, x_k, y_eq, z)
        return "iter", (rp, rd, gap, pobj, dobj, x_k, y_eq, z)
    # certificates of infeasibility / unboundedness
    x, y, s = emb.unscale(xs, ys, ss)
    by = float(np.concatenate([prob.b, np.zeros(emb.p)]) @ y)
    cx = float(prob.c @ x)
    eps = emb.opts.eps
    if by < 0:
        y_eq = -y[:m]
        z = np.zeros(N)
        z[emb.nonfree] = y[m:]
        # A^T y_eq + z = 0 and b^T y_eq > 0 certify primal infeasibility
        r = float(np.linalg.norm(prob.A.T @ y_eq + z)) / (-by)
        if r <= eps * 10:
            y_c = y_eq / (-by)
            return "cert", (INFEASIBLE, np.full(N, np.nan), y_c, z / (-by), math.inf, math.inf, (math.inf, r, math.inf))
    if cx < 0:
        r = float(np.linalg.norm(prob.A @ x)) / (-cx)
        dist = _cone_distance(prob, x / (-cx), dual=False)
        if r <= eps * 10 and dist <= eps * 10:
            return "cert", (UNBOUNDED, x / (-cx), np.full(m, np.nan), np.full(N, np.nan), -math.inf, -math.inf, (r, math.inf, math.inf))
    return None


class _Anderson:
    """Type-II Anderson acceleration of a fixed-point map ``z -> F(z)``."""

    def __init__(self, mem: int):
        self.mem = mem
        self.reset()

    def reset(self):
        self.dG: list[np.ndarray] = []
        self.dF: list[np.ndarray] = []
        self.prev_g = None
        self.prev_f = None

    def extrapolate(self, z: np.ndarray, g: np.ndarray) -> np.ndarray:
        f = g - z
        if self.prev_g is not None:
            self.dG.append(g - self.prev_g)
            self.dF.append(f - self.prev_f)
            if len(self.dG) > self.mem:
                self.dG.pop(0)
                self.dF.pop(0)
        self.prev_g, self.prev_f = g, f
        if not self.dF:
            return g
        F = np.stack(self.dF, axis=1)
        G = np.stack(self.dG, axis=1)
        gamma, *_ = np.linalg.lstsq(F, f, rcond=1e-12)
        cand = g - G @ gamma
        return cand if np.all(np.isfinite(cand)) else g


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

class ProblemBuilder:
    """Incremental assembly of a :class:`ConicProblem` from named blocks."""

    def __init__(self):
        self.blocks: list[Block] = []
        self.offsets: list[int] = []
        self.nvar = 0
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []
        self.rhs: list[float] = []
        self.c: dict[int, float] = {}

    def add_block(self, kind: str, size: int) -> int:
        bk = Block(kind, size)
        self.blocks.append(bk)
        self.offsets.append(self.nvar)
        self.nvar += bk.dim
        return len(self.blocks) - 1

    def var(self, block: int, i: int = 0) -> int:
        return self.offsets[block] + i

    def psd_var(self, block: int, i: int, j: int) -> tuple[int, float]:
        """Column and coefficient such that ``coef * x[col]`` equals matrix entry ``(i, j)``."""
        side = self.blocks[block].size
        return self.offsets[block] + svec_index(side, i, j), 1.0 / svec_scale(i, j)

    def add_constraint(self, terms: Iterable[tuple[int, float]], rhs: float) -> int:
        row = len(self.rhs)
        for col, val in terms:
            if val != 0.0:
                self.rows.append(row)
                self.cols.append(int(col))
                self.vals.append(float(val))
        self.rhs.append(float(rhs))
        return row

    def new_rows(self, count: int, rhs: Sequence[float]) -> int:
        first = len(self.rhs)
        self.rhs.extend(float(r) for r in rhs)
        assert len(rhs) == count
        return first

    def add_entries(self, rows, cols, vals) -> None:
        self.rows.extend(int(r) for r in rows)
        self.cols.extend(int(c) for c in cols)
        self.vals.extend(float(v) for v in vals)

    def set_cost(self, col: int, val: float) -> None:
        self.c[int(col)] = self.c.get(int(col), 0.0) + float(val)

    def build(self) -> ConicProblem:
        c = np.zeros(self.nvar)
        for k, v in self.c.items():
            c[k] = v
        A = sp.csr_matrix(
            (np.array(self.vals, dtype=float), (np.array(self.rows, dtype=np.int64), np.array(self.cols, dtype=np.int64))),
            shape=(len(self.rhs), self.nvar),
        )
        A.sum_duplicates()
        return ConicProblem(c, A, np.array(self.rhs), tuple(self.blocks))


# ---------------------------------------------------------------------------
# interchange format
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return "%.17g" % v


def write_problem(prob: ConicProblem, stream) -> None:
    """Serialize in the ``CONIC v1`` text format.

    Layout (whitespace separated)::

        CONIC v1
        <num_vars> <num_constraints> <nnz> <num_blocks>
        <kind> <size>            (one line per block; psd size is the side)
        <row> <col> <value>      (nnz lines, zero-based COO of A)
        <b_0> ... <b_{m-1}>      (one line)
        <c_0> ... <c_{N-1}>      (one line)
    """
    A = sp.coo_matrix(prob.A)
    order = np.lexsort((A.col, A.row))
    out = [
        "CONIC v1",
        f"{prob.num_vars} {prob.num_constraints} {A.nnz} {len(prob.blocks)}",
    ]
    out.extend(str(bk) for bk in prob.blocks)
    out.extend(f"{A.row[k]} {A.col[k]} {_fmt(A.data[k])}" for k in order)
    out.append(" ".join(_fmt(v) for v in prob.b))
    out.append(" ".join(_fmt(v) for v in prob.c))
    stream.write("\n".join(out) + "\n")


def read_problem(stream) -> ConicProblem:
    lines = [ln.strip() for ln in stream.read().splitlines()]
    if not lines or lines[0] != "CONIC v1":
        raise ValueError("missing 'CONIC v1' header")
    try:
        nvar, ncons, nnz, nblk = (int(t) for t in lines[1].split())
        pos = 2
        blocks = []
        for _ in range(nblk):
            kind, size = lines[pos].split()
            blocks.append(Block(kind, int(size)))
            pos += 1
        rows, cols, vals = [], [], []
        for _ in range(nnz):
            r, c, v = lines[pos].split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
            pos += 1
        b = [float(t) for t in lines[pos].split()] if ncons else []
        pos += 1
        c = [float(t) for t in lines[pos].split()]
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed CONIC v1 file: {exc}") from None
    if len(b) != ncons or len(c) != nvar:
        raise ValueError("CONIC v1 vector lengths disagree with the header")
    A = sp.csr_matrix((vals, (rows, cols)), shape=(ncons, nvar))
    return ConicProblem(np.array(c), A, np.array(b), tuple(blocks))


def dumps(prob: ConicProblem) -> str:
    buf = io.StringIO()
    write_problem(prob, buf)
    return buf.getvalue()


def loads(text: str) -> ConicProblem:
    return read_problem(io.StringIO(text))
