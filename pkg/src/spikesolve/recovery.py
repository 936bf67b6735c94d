"""Exact recovery of atomic measures from their moments.

Two steps:

1. Support. Minimize ``L(psi^T A psi)`` over PSD matrices ``A`` with unit
   trace, where ``L`` is the moment functional and ``psi`` a basis of
   polynomials of degree ``<= d``. The optimal sum of squares
   ``H* = psi^T A* psi`` vanishes on the support; its zeros are located by a
   grid scan and refined by projected Newton steps.
2. Weights. Nonnegative least squares on the moment equations, followed by
   an optional joint least-squares polish of points and weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import ndimage
from scipy.optimize import least_squares, nnls

from . import conic
from .measure import DiscreteMeasure, MomentData
from .polybasis import (
    MONOMIAL,
    ORTHONORMAL,
    PolyBasis,
    Polynomial,
    basis_size,
    box_diameter,
    box_grid,
    gauss_legendre_box,
    sum_index_table,
)

DEFAULT_GRID = {1: 400, 2: 150, 3: 40, 4: 20}

# The optimal face of the moment SDP is separated from the rest of the cone
# by the second smallest eigenvalue of the moment matrix, which drops below
# 1e-7 for clustered atoms; recovery therefore asks for a tighter solve than
# the generic solver default.
RECOVERY_SOLVER = conic.SolverOptions(eps=1e-9)

STAGE_ASSEMBLE = "assemble"
STAGE_SOLVE = "solve"
STAGE_EXTRACT = "extract"
STAGE_FIT = "fit"

FLAG_NON_DISCRETE = "non-discrete-optimum-suspected"


class RecoveryError(RuntimeError):
    """Raised by pipeline stages; ``stage`` names where it happened."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def default_grid(n: int) -> int:
    return DEFAULT_GRID.get(n, max(4, int(round(2e5 ** (1.0 / n)))))


# ---------------------------------------------------------------------------
# sums of squares as Gram forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GramPolynomial:
    """``H(z) = psi(z)^T G psi(z)`` for a basis ``psi`` and symmetric ``G``."""

    basis: PolyBasis
    gram: np.ndarray

    def __call__(self, z) -> np.ndarray:
        V = self.basis.evaluate(z)
        if V.ndim == 1:
            return float(V @ self.gram @ V)
        return np.einsum("ij,jk,ik->i", V, self.gram, V)

    def derivatives(self, z: np.ndarray):
        """Value, gradient, and Hessian at a single point."""
        v, G, Hs = self.basis.evaluate(np.asarray(z, dtype=float), order=2)
        Av = self.gram @ v
        val = float(v @ Av)
        grad = 2.0 * G.T @ Av
        hess = 2.0 * (G.T @ self.gram @ G + np.einsum("t,tij->ij", Av, Hs))
        return val, grad, hess

    def monomial_coeffs(self) -> np.ndarray:
        """Coefficients of ``H`` in monomials of degree ``<= 2 d``."""
        C = self.basis.monomial_coeffs
        B = C.T @ self.gram @ C
        n, d = self.basis.n, self.basis.d
        out = np.zeros(basis_size(n, 2 * d))
        np.add.at(out, sum_index_table(n, d, d).ravel(), B.ravel())
        return out

    def as_polynomial(self) -> Polynomial:
        return Polynomial(PolyBasis(self.basis.n, 2 * self.basis.d, MONOMIAL), self.monomial_coeffs())


# ---------------------------------------------------------------------------
# moment matrices
# ---------------------------------------------------------------------------

def truncate_moments(data: MomentData, degree: int) -> np.ndarray:
    """Moments of the basis elements of degree ``<= degree`` (graded bases nest)."""
    if data.degree < degree:
        raise RecoveryError(
            STAGE_ASSEMBLE,
            f"moment data of degree {data.degree} cannot cover degree {degree}",
        )
    return np.asarray(data.y[: basis_size(data.n, degree)])


def moment_matrix(data: MomentData, psi: PolyBasis) -> np.ndarray:
    """``M[i, j] = L(psi_i psi_j)`` for the moment functional ``L`` of ``data``."""
    d = psi.d
    y = truncate_moments(data, 2 * d)
    basis = data.basis.with_degree(2 * d)
    if basis.kind == ORTHONORMAL and psi.kind != MONOMIAL and psi.box == basis.box:
        # L(f) = int f rho dU with rho = sum y_i phi_i; exact Gauss-Legendre rule
        nodes, w = gauss_legendre_box(basis.box, 2 * d + 1, probability=True)
        rho = basis.evaluate(nodes) @ y
        P = psi.evaluate(nodes)
        M = (P * (w * rho)[:, None]).T @ P
        return 0.5 * (M + M.T)
    if basis.kind == MONOMIAL:
        m = y
    else:
        # y = C m with C the basis-to-monomial table
        m = np.linalg.solve(basis.monomial_coeffs, y)
    H = m[sum_index_table(data.n, d, d)]
    if psi.kind == MONOMIAL:
        return H
    C = psi.monomial_coeffs
    M = C @ H @ C.T
    return 0.5 * (M + M.T)


def sdp_basis(data: MomentData, d: int, kind: str | None = None) -> PolyBasis:
    """Basis of the Gram matrix; orthonormal on the data box unless asked otherwise."""
    return PolyBasis(data.n, d, kind or ORTHONORMAL, data.box)


def assemble_moment_sdp(
    data: MomentData,
    d: int,
    normalization: str = "trace",
    kind: str | None = None,
) -> tuple[conic.ConicProblem, PolyBasis, np.ndarray]:
    """Build ``min <M, A>  s.t.  A PSD, tr A = 1``.

    ``normalization="leading"`` instead fixes the trace of the block of
    ``A`` belonging to the basis elements of top degree ``d``.

    Returns the problem, the Gram basis, and the moment matrix.
    """
    if d < 0:
        raise RecoveryError(STAGE_ASSEMBLE, "half-degree must be nonnegative")
    if normalization not in ("trace", "leading"):
        raise ValueError(f"unknown normalization {normalization!r}")
    psi = sdp_basis(data, d, kind)
    M = moment_matrix(data, psi)
    T = psi.size
    if normalization == "trace":
        mask = np.ones(T)
    else:
        mask = (psi.exponents.sum(axis=1) == d).astype(float)
    norm_row = conic.svec(np.diag(mask))
    A = norm_row[None, :]
    prob = conic.ConicProblem(conic.svec(M), A, np.array([1.0]), (conic.Block("psd", T),))
    return prob, psi, M


# ---------------------------------------------------------------------------
# support extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtractOptions:
    theta: float = 1e-4
    screen: float = 1e-2
    grid: int | None = None
    dedup: float = 1e-3
    newton_steps: int = 60
    isolation_factor: float = 10.0
    isolation_floor: float = 1e-15
    isolation_radius: float = 2.0  # in grid spacings

    def grid_size(self, n: int) -> int:
        return self.grid if self.grid else default_grid(n)


@dataclass
class Extraction:
    points: np.ndarray
    values: np.ndarray
    isolated: np.ndarray
    grid_minima: np.ndarray
    grid_values: np.ndarray
    grid_max: float

    @property
    def all_isolated(self) -> bool:
        return bool(np.all(self.isolated))


def _grid_local_minima(vals: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    G = vals.reshape(shape)
    filt = ndimage.minimum_filter(G, size=3, mode="nearest")
    return np.flatnonzero((G <= filt).ravel())


def refine_minimum(H, z0: np.ndarray, box, steps: int = 60) -> tuple[np.ndarray, float]:
    """Projected damped Newton descent on ``H`` from ``z0`` inside ``box``."""
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    diam = box_diameter(box)
    z = np.clip(np.asarray(z0, dtype=float), lo, hi)
    val, g, Hs = H.derivatives(z)
    for _ in range(steps):
        try:
            w, Q = np.linalg.eigh(Hs)
            w = np.maximum(w, 1e-12 * max(1.0, np.abs(w).max()))
            step = -(Q @ ((Q.T @ g) / w))
        except np.linalg.LinAlgError:
            step = -g
        moved = False
        t = 1.0
        for _ in range(40):
            cand = np.clip(z + t * step, lo, hi)
            cval = H(cand)
            if cval < val:
                moved = True
                break
            t *= 0.5
        if not moved:
            break
        delta = float(np.linalg.norm(cand - z))
        z = cand
        val, g, Hs = H.derivatives(z)
        if delta <= 1e-15 * diam:
            break
    return z, val


def _sphere_directions(n: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        th = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    # axis directions plus all sign patterns of the diagonal, normalized
    axes = np.concatenate([np.eye(n), -np.eye(n)])
    signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * n), indexing="ij")).reshape(n, -1).T
    signs = signs / math.sqrt(n)
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            for a in (-1.0, 1.0):
                for b in (-1.0, 1.0):
                    v = np.zeros(n)
                    v[i], v[j] = a, b
                    pairs.append(v / math.sqrt(2))
    return np.concatenate([axes, signs, np.array(pairs)])


def _ring_minimum(H, z: np.ndarray, ring: np.ndarray, lo: np.ndarray, hi: np.ndarray, steps: int = 30) -> float:
    """Minimum of ``H`` on the sphere through ``ring`` centred at ``z``.

    The sampled minimum is refined by projected gradient steps on the sphere
    so that a valley of zeros crossing the sphere between samples is found.
    """
    vals = H(ring)
    best = int(np.argmin(vals))
    p = ring[best]
    val = float(vals[best])
    if z.shape[0] == 1:
        return val
    r = float(np.linalg.norm(p - z))
    step = 0.25 * r
    for _ in range(steps):
        _, g, _ = H.derivatives(p)
        radial = (p - z) / r
        g = g - radial * (g @ radial)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            break
        improved = False
        while step > 1e-12 * r:
            q = p - step * g / gn
            q = z + r * (q - z) / np.linalg.norm(q - z)
            if np.all(q >= lo - 1e-12) and np.all(q <= hi + 1e-12):
                qv = H(q)
                if qv < val:
                    p, val = q, float(qv)
                    improved = True
                    step *= 2.0
                    break
            step *= 0.5
        if not improved:
            break
    return val


def extract_support(H, box, opts: ExtractOptions | None = None) -> Extraction:
    """Locate the zeros of a nonnegative polynomial ``H`` on ``box``.

    Raises
    ------
    RecoveryError
        When no grid minimum falls below ``theta`` times the grid maximum.
    """
    opts = opts or ExtractOptions()
    n = len(box)
    m = opts.grid_size(n)
    grid = box_grid(box, m)
    vals = np.asarray(H(grid))
    hmax = float(vals.max())
    if not np.isfinite(hmax) or hmax <= 0:
        raise RecoveryError(STAGE_EXTRACT, "polynomial is not positive anywhere on the grid")
    # A grid node can sit a half spacing away from a zero, where H is still
    # of order curvature * spacing^2; screen grid minima loosely and apply
    # the threshold to the refined minima.
    cand = _grid_local_minima(vals, (m,) * n)
    cand = cand[vals[cand] <= opts.screen * hmax]
    order = np.argsort(vals[cand], kind="stable")
    cand = cand[order]
    diam = box_diameter(box)
    radius = opts.dedup * diam
    pts: list[np.ndarray] = []
    pvals: list[float] = []
    shape = (m,) * n
    offsets = np.array(np.meshgrid(*([[-1, 0, 1]] * n), indexing="ij")).reshape(n, -1).T
    seen: set[int] = set()
    for idx in cand:
        # a second zero closer than the grid spacing has no grid minimum of
        # its own, so the neighbours of every candidate seed refinements too
        base = np.array(np.unravel_index(idx, shape))
        for off in offsets:
            nb = base + off
            if np.any(nb < 0) or np.any(nb >= m):
                continue
            j = int(np.ravel_multi_index(tuple(nb), shape))
            if j in seen:
                continue
            seen.add(j)
            z, v = refine_minimum(H, grid[j], box, opts.newton_steps)
            if v > opts.theta * hmax:
                continue
            if any(np.linalg.norm(z - q) <= radius for q in pts):
                continue
            pts.append(z)
            pvals.append(float(v))
    if not pts:
        raise RecoveryError(STAGE_EXTRACT, "no sub-threshold minima found")
    points = np.array(pts)
    values = np.array(pvals)
    # isolation: compare H on a small sphere around each zero with the zero itself
    spacing = max((hi - lo) / (m - 1) for lo, hi in box)
    rho = opts.isolation_radius * spacing
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    dirs = _sphere_directions(n)
    isolated = np.ones(len(points), dtype=bool)
    for i, z in enumerate(points):
        # stay clear of the other zeros: a ring reaching a neighbouring zero
        # would mistake a close pair for a continuum
        others = np.delete(points, i, axis=0)
        gap = float(np.min(np.linalg.norm(others - z, axis=1))) if len(others) else math.inf
        ring = z + min(rho, 0.25 * gap) * dirs
        inside = np.all((ring >= lo - 1e-12) & (ring <= hi + 1e-12), axis=1)
        ring = ring[inside]
        if ring.shape[0] == 0:
            continue
        ring_min = _ring_minimum(H, z, ring, lo, hi)
        isolated[i] = ring_min >= max(opts.isolation_factor * max(values[i], 0.0), opts.isolation_floor * hmax)
    return Extraction(points, values, isolated, grid[cand], vals[cand], hmax)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------

def weight_floor(data: MomentData, rel: float = 1e-6) -> float:
    return rel * float(np.linalg.norm(data.y))


def fit_weights(points, data: MomentData, w_min: float | None = None) -> tuple[np.ndarray, np.ndarray, float]:
    """Nonnegative least squares for the weights of candidate atoms.

    Atoms with weight below ``w_min`` (default ``1e-6 * ||y||``) are pruned
    and the remaining weights refitted.

    Returns
    -------
    points, weights, residual
        The surviving atoms and the residual ``||V^T c - y||_2``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, data.n)
    if pts.shape[0] == 0:
        raise RecoveryError(STAGE_FIT, "empty support")
    w_min = weight_floor(data) if w_min is None else w_min
    y = np.asarray(data.y)
    V = data.basis.evaluate(pts)
    c, res = nnls(V.T, y)
    keep = c >= w_min
    if not keep.all() and keep.any():
        pts = pts[keep]
        c, res = nnls(V[keep].T, y)
    elif not keep.any():
        return pts[:0], c[:0], float(np.linalg.norm(y))
    return pts, c, float(res)


def polish(points: np.ndarray, weights: np.ndarray, data: MomentData, max_move: float) -> tuple[np.ndarray, np.ndarray, float] | None:
    """Joint least-squares refinement of atoms against the moments.

    Returns ``None`` when the fit wanders more than ``max_move`` from the
    starting points or fails to reduce the residual.
    """
    k, n = points.shape
    lo = np.array([b[0] for b in data.box])
    hi = np.array([b[1] for b in data.box])
    y = np.asarray(data.y)

    def resid(theta):
        p = theta[: k * n].reshape(k, n)
        w = theta[k * n:]
        return data.basis.evaluate(p).T @ w - y

    def jac(theta):
        p = theta[: k * n].reshape(k, n)
        w = theta[k * n:]
        V, G = data.basis.evaluate(p, order=1)
        J = np.empty((y.shape[0], k * n + k))
        for i in range(k):
            J[:, i * n:(i + 1) * n] = G[i] * w[i]
        J[:, k * n:] = V.T
        return J

    x0 = np.concatenate([points.ravel(), weights])
    lb = np.concatenate([np.tile(lo, k), np.zeros(k)])
    ub = np.concatenate([np.tile(hi, k), np.full(k, np.inf)])
    x0 = np.clip(x0, lb, ub)
    r0 = float(np.linalg.norm(resid(x0)))
    try:
        sol = least_squares(resid, x0, jac=jac, bounds=(lb, ub), method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
    except (ValueError, np.linalg.LinAlgError):
        return None
    p = sol.x[: k * n].reshape(k, n)
    w = sol.x[k * n:]
    r = float(np.linalg.norm(sol.fun))
    if not np.isfinite(r) or r > r0:
        return None
    if np.max(np.linalg.norm(p - points, axis=1)) > max_move:
        return None
    return p, w, r


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

@dataclass
class RecoveryReport:
    """Outcome of a recovery run.

    ``stage`` is ``None`` on success and otherwise names the failing step.
    """

    measure: DiscreteMeasure
    success: bool
    stage: str | None = None
    message: str = ""
    flags: list[str] = field(default_factory=list)
    H: GramPolynomial | None = None
    sdp_status: str | None = None
    sdp_objective: float | None = None
    sdp_iterations: int = 0
    extraction: Extraction | None = None
    residual: float = math.inf
    delta: float = 0.0
    diagnostics: Any = None
    extra: dict = field(default_factory=dict)

    def to_json(self, include_h: bool = True) -> dict:
        doc: dict[str, Any] = {
            "success": self.success,
            "stage": self.stage,
            "message": self.message,
            "flags": list(self.flags),
            "sdp_status": self.sdp_status,
            "sdp_objective": self.sdp_objective,
            "sdp_iterations": self.sdp_iterations,
            "residual": self.residual,
            "delta": self.delta,
            "measure": self.measure.to_json(),
        }
        if include_h and self.H is not None:
            doc["H_monomial_coeffs"] = [float(v) for v in self.H.monomial_coeffs()]
            doc["H_degree"] = 2 * self.H.basis.d
        if self.extraction is not None:
            ex = self.extraction
            doc["zeros"] = [
                {"point": [float(v) for v in p], "value": float(v), "isolated": bool(iso)}
                for p, v, iso in zip(ex.points, ex.values, ex.isolated)
            ]
            doc["grid_max"] = ex.grid_max
        if self.diagnostics is not None:
            doc["diagnostics"] = self.diagnostics.to_json()
        for key, val in self.extra.items():
            doc[key] = val.to_json() if hasattr(val, "to_json") else val
        return doc


def _fail(n: int, stage: str, message: str, **kw) -> RecoveryReport:
    return RecoveryReport(DiscreteMeasure.empty(n), False, stage, message, **kw)


def recover_exact(
    data: MomentData,
    d: int | None = None,
    opts: ExtractOptions | None = None,
    solver: conic.SolverOptions | None = None,
    normalization: str = "trace",
    kind: str | None = None,
    polish_fit: bool = True,
    residual_rtol: float = 1e-6,
    delta: float | None = None,
) -> RecoveryReport:
    """Support via the moment SDP, then weights.

    Parameters
    ----------
    data : MomentData
        Moments of degree at least ``2 d``.
    d : int, optional
        Half-degree; defaults to ``data.degree // 2``.
    delta : float, optional
        Residual budget added to the consistency check; defaults to
        ``data.delta``.

    Returns
    -------
    RecoveryReport
        ``success`` requires isolated zeros and a moment residual at most
        ``delta + residual_rtol * (1 + ||y||)``.
    """
    opts = opts or ExtractOptions()
    d = data.degree // 2 if d is None else d
    delta = data.delta if delta is None else delta
    try:
        prob, psi, _ = assemble_moment_sdp(data, d, normalization, kind)
    except RecoveryError as exc:
        return _fail(data.n, exc.stage, str(exc), delta=delta)
    sol = conic.solve(prob, solver or RECOVERY_SOLVER)
    A = sol.block(0)
    w, Q = np.linalg.eigh(A)
    A = (Q * np.maximum(w, 0.0)) @ Q.T
    H = GramPolynomial(psi, A)
    base = dict(H=H, sdp_status=sol.status, sdp_objective=sol.primal_objective, sdp_iterations=sol.iterations, delta=delta)
    if sol.status not in (conic.OPTIMAL, conic.MAX_ITER):
        return _fail(data.n, STAGE_SOLVE, f"moment SDP reported {sol.status}", **base)
    flags: list[str] = []
    if sol.status == conic.MAX_ITER:
        flags.append("solver-max-iter")
    try:
        ex = extract_support(H, data.box, opts)
    except RecoveryError as exc:
        return _fail(data.n, exc.stage, str(exc), flags=flags, **base)
    if not ex.all_isolated:
        flags.append(FLAG_NON_DISCRETE)
    try:
        pts, wts, res = fit_weights(ex.points, data)
    except RecoveryError as exc:
        return _fail(data.n, exc.stage, str(exc), flags=flags, extraction=ex, **base)
    if pts.shape[0] == 0:
        return _fail(data.n, STAGE_FIT, "all candidate weights fell below the floor", flags=flags, extraction=ex, **base)
    if polish_fit and ex.all_isolated:
        out = polish(pts, wts, data, max_move=opts.isolation_radius * box_diameter(data.box) / max(opts.grid_size(data.n) - 1, 1))
        if out is not None:
            ppts, pwts, pres = out
            # the polished points must stay in the sub-threshold region of H*
            if np.all(H(ppts) <= opts.theta * ex.grid_max):
                keep = pwts >= weight_floor(data)
                pts, wts, res = ppts[keep], pwts[keep], pres
                if not keep.all():
                    pts, wts, res = fit_weights(pts, data)
    mu = DiscreteMeasure(pts, wts).sorted()
    tol = delta + residual_rtol * (1.0 + float(np.linalg.norm(data.y)))
    if mu.k > basis_size(data.n, data.degree) + 1:
        flags.append("too-many-atoms")
    if not ex.all_isolated:
        return RecoveryReport(mu, False, STAGE_EXTRACT, "zero set of H* is not discrete", flags, extraction=ex, residual=res, **base)
    if res > tol:
        return RecoveryReport(mu, False, STAGE_FIT, f"moment residual {res:.3e} exceeds {tol:.3e}", flags, extraction=ex, residual=res, **base)
    return RecoveryReport(mu, True, None, "ok", flags, extraction=ex, residual=res, **base)
