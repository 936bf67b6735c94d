"""Approximate recovery by total-variation minimization with noisy moments.

The dual of ``min ||nu||_TV  s.t.  ||(int phi_i dnu - y_i)_i||_2 <= delta``
is ``max <a, y> - b delta`` over certificates ``P = <a, phi>`` with
``|P| <= 1`` on ``K`` and ``||a||_2 <= b``. On a semialgebraic ``K`` the
condition ``|P| <= 1`` is relaxed to membership of ``1 - P`` and ``1 + P``
in a truncated quadratic module, which gives a semidefinite program per
level ``s``.

All polynomial identities are matched coefficient-wise in the tensor
Chebyshev basis of the domain's bounding box (rescaled to ``[-1, 1]^n``),
and the Gram matrices of the sums of squares are indexed by the same basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import nnls

from . import conic
from .measure import DiscreteMeasure, MomentData
from .polybasis import CHEBYSHEV, MONOMIAL, PolyBasis, Polynomial, as_box, basis_size, box_diameter, box_grid, monomial_index
from .recovery import (
    ExtractOptions,
    RecoveryReport,
    STAGE_FIT,
    STAGE_SOLVE,
    polish,
    recover_exact,
)

FLAG_ZERO_CERTIFICATE = "zero-certificate"
FLAG_INFEASIBLE_OUTPUT = "output-not-delta-feasible"
BLASSO_SOLVER = conic.SolverOptions(eps=1e-8, max_iter=60_000)
REFIT_SOLVER = conic.SolverOptions(eps=1e-10)


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SemialgebraicDomain:
    """``K = {x : g_1(x) >= 0, ..., g_t(x) >= 0}`` with a bounding box.

    ``generators`` are polynomials in the ambient coordinates. ``N`` and
    ``e`` record that ``N - ||x||^2`` lies in the degree-``e`` quadratic
    module of the generators.
    """

    n: int
    generators: tuple[Polynomial, ...]
    box: tuple
    N: float
    e: int

    @classmethod
    def from_box(cls, box=None, n: int | None = None) -> "SemialgebraicDomain":
        """Box ``prod [l_i, u_i]`` cut out by ``g_i = (u_i - x_i)(x_i - l_i)``.

        ``N - ||x||^2 = sum_i 2 g_i + sum_i (x_i - l_i - u_i)^2 + (N - sum_i (l_i^2 + u_i^2))``
        with ``N = sum_i (l_i^2 + u_i^2)`` certifies explicit boundedness
        with ``e = 1``.
        """
        box = as_box(box, n)
        n = len(box)
        basis = PolyBasis(n, 2, MONOMIAL)
        idx = monomial_index(n, 2)
        gens = []
        for i, (lo, hi) in enumerate(box):
            c = np.zeros(basis.size)
            unit = [0] * n
            c[0] = -lo * hi
            unit[i] = 1
            c[idx[tuple(unit)]] = lo + hi
            unit[i] = 2
            c[idx[tuple(unit)]] = -1.0
            gens.append(Polynomial(basis, c))
        N = float(sum(lo * lo + hi * hi for lo, hi in box))
        return cls(n, tuple(gens), box, N, 1)

    def contains(self, z, tol: float = 0.0) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(z, dtype=float))
        ok = np.ones(Z.shape[0], dtype=bool)
        for g in self.generators:
            ok &= np.atleast_1d(g(Z)) >= -tol
        return ok

    def boundedness_residual(self) -> float:
        """Largest coefficient mismatch of the certificate for box domains."""
        n = self.n
        basis = PolyBasis(n, 2, MONOMIAL)
        idx = monomial_index(n, 2)
        lhs = np.zeros(basis.size)
        lhs[0] = self.N
        for i in range(n):
            unit = [0] * n
            unit[i] = 2
            lhs[idx[tuple(unit)]] -= 1.0
        rhs = np.zeros(basis.size)
        for i, ((lo, hi), g) in enumerate(zip(self.box, self.generators)):
            rhs += 2.0 * g.coeffs
            c = lo + hi
            unit = [0] * n
            unit[i] = 2
            rhs[idx[tuple(unit)]] += 1.0
            unit[i] = 1
            rhs[idx[tuple(unit)]] -= 2.0 * c
            rhs[0] += c * c
        rhs[0] += self.N - sum(lo * lo + hi * hi for lo, hi in self.box)
        return float(np.abs(lhs - rhs).max())


# ---------------------------------------------------------------------------
# Chebyshev coefficient algebra
# ---------------------------------------------------------------------------

def _cheb_nodes(box, q: int) -> np.ndarray:
    t = np.cos((2.0 * np.arange(q) + 1.0) * np.pi / (2.0 * q))
    axes = [0.5 * (lo + hi) + 0.5 * (hi - lo) * t for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def chebyshev_expansion(values_fn, n: int, degree: int, box) -> np.ndarray:
    """Coefficients in ``PolyBasis(n, degree, CHEBYSHEV, box)`` of a polynomial
    of total degree ``<= degree`` given by its values.

    Uses interpolation at tensor Chebyshev nodes, which is exact for such
    polynomials and well conditioned.
    """
    target = PolyBasis(n, degree, CHEBYSHEV, box)
    nodes = _cheb_nodes(box, degree + 1)
    V = target.evaluate(nodes)
    F = values_fn(nodes)
    coef, *_ = np.linalg.lstsq(V, F, rcond=None)
    return coef


@lru_cache(maxsize=None)
def _product_table(n: int, d1: int, d2: int):
    """Sparse table of ``T_alpha T_beta`` in the Chebyshev-product basis.

    Returns arrays ``(i, j, k, w)`` meaning ``T_{E1[i]} T_{E2[j]}`` contains
    ``w T_{E[k]}`` with ``E`` the exponents of degree ``<= d1 + d2``.
    """
    E1 = PolyBasis(n, d1).exponents
    E2 = PolyBasis(n, d2).exponents
    idx = monomial_index(n, d1 + d2)
    I, J, K, W = [], [], [], []
    for i, a in enumerate(E1):
        for j, b in enumerate(E2):
            terms = {(): 1.0}
            for q in range(n):
                up, dn = a[q] + b[q], abs(int(a[q]) - int(b[q]))
                nxt = {}
                for key, w in terms.items():
                    if up == dn:
                        nxt[key + (up,)] = nxt.get(key + (up,), 0.0) + w
                    else:
                        nxt[key + (up,)] = nxt.get(key + (up,), 0.0) + 0.5 * w
                        nxt[key + (dn,)] = nxt.get(key + (dn,), 0.0) + 0.5 * w
                terms = nxt
            for key, w in terms.items():
                I.append(i)
                J.append(j)
                K.append(idx[key])
                W.append(w)
    return np.array(I), np.array(J), np.array(K), np.array(W)


def _gram_map(n: int, e: int, g: np.ndarray | None, dg: int, top: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Linear map from the svec of a Gram matrix ``Q`` (basis degree ``e``) to
    the Chebyshev coefficients (degree ``<= top``) of ``g * sum Q_ab T_a T_b``.

    Returns COO triplets ``(row, col, val)``.
    """
    side = basis_size(n, e)
    I, J, K, W = _product_table(n, e, e)
    keep = I <= J
    I, J, K, W = I[keep], J[keep], K[keep], W[keep]
    # Q_ab and Q_ba both appear; svec stores sqrt(2) Q_ab off the diagonal
    scale = np.where(I == J, 1.0, math.sqrt(2.0))
    cols = np.array([conic.svec_index(side, int(a), int(b)) for a, b in zip(I, J)], dtype=int)
    vals = W * scale
    rows = K
    if g is None:
        return rows, cols, vals
    gI, gJ, gK, gW = _product_table(n, dg, 2 * e)
    lookup: dict[int, list[tuple[int, float]]] = {}
    for a, b, k, w in zip(gI, gJ, gK, gW):
        if g[a] != 0.0:
            lookup.setdefault(int(b), []).append((int(k), float(w * g[a])))
    R, C, V = [], [], []
    for r, c, v in zip(rows, cols, vals):
        for k, w in lookup.get(int(r), ()):
            R.append(k)
            C.append(c)
            V.append(v * w)
    R = np.array(R, dtype=int)
    keep = R < basis_size(n, top)
    return R[keep], np.array(C, dtype=int)[keep], np.array(V)[keep]


# ---------------------------------------------------------------------------
# hierarchy
# ---------------------------------------------------------------------------

def default_level(d: int) -> int:
    """Smallest even level admitting a degree-``d`` basis."""
    return 2 * ((d + 1) // 2)


@dataclass
class HierarchyLayout:
    """Block and degree bookkeeping of one hierarchy SDP."""

    level: int
    top: int
    T: int
    gram_degrees: list[int]
    phi_cheb: np.ndarray
    gen_cheb: list[np.ndarray]


def assemble_hierarchy_sdp(
    data: MomentData,
    delta: float,
    domain: SemialgebraicDomain,
    s: int,
) -> tuple[conic.ConicProblem, HierarchyLayout]:
    """Cone program for level ``s`` of the dual hierarchy.

    Variables: one second-order cone block ``(b, a)``, then for each sign
    ``+`` / ``-`` one PSD block for ``sigma_0`` and one per generator. The
    equality constraints state ``1 -+ <a, phi> = sigma_0 + sum g_i sigma_i``
    coefficient by coefficient up to degree ``2 ceil(s / 2)``. The objective
    is ``-<a, y> + b delta``.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    d = data.degree
    if s < d:
        raise ValueError(f"level {s} cannot express a basis of degree {d}")
    if domain.n != data.n:
        raise ValueError("domain and data have different dimensions")
    n = data.n
    top = 2 * ((s + 1) // 2)
    box = domain.box
    T = data.basis.size
    Tt = basis_size(n, top)
    phi = chebyshev_expansion(lambda Z: data.basis.evaluate(Z), n, d, box)  # (T_d, T)
    gen_cheb = []
    gdeg = []
    for g in domain.generators:
        dg = g.degree
        gen_cheb.append(chebyshev_expansion(lambda Z, g=g: np.atleast_1d(g(Z)), n, dg, box))
        gdeg.append(dg)
    e0 = top // 2
    gram = [e0] + [(top - dg) // 2 for dg in gdeg]
    if any(e < 0 for e in gram):
        raise ValueError(f"level {s} is too small for a generator of degree {max(gdeg)}")

    B = conic.ProblemBuilder()
    soc = B.add_block("soc", T + 1)
    blocks = {}
    for sign in (1, -1):
        for i, e in enumerate(gram):
            blocks[sign, i] = B.add_block("psd", basis_size(n, e))
    B.set_cost(B.var(soc, 0), delta)
    for i in range(T):
        if data.y[i] != 0.0:
            B.set_cost(B.var(soc, 1 + i), -float(data.y[i]))
    for sign in (1, -1):
        rhs = np.zeros(Tt)
        rhs[0] = 1.0
        first = B.new_rows(Tt, rhs)
        # sign * <a, phi> moves to the right-hand side as +sign * a
        rr, cc, vv = [], [], []
        for i in range(T):
            col = phi[:, i]
            nz = np.nonzero(np.abs(col) > 0)[0]
            rr.extend(first + nz)
            cc.extend([B.var(soc, 1 + i)] * len(nz))
            vv.extend(sign * col[nz])
        B.add_entries(rr, cc, vv)
        for i, e in enumerate(gram):
            g = None if i == 0 else gen_cheb[i - 1]
            dg = 0 if i == 0 else gdeg[i - 1]
            r, c, v = _gram_map(n, e, g, dg, top)
            B.add_entries(first + r, B.var(blocks[sign, i]) + c, v)
    layout = HierarchyLayout(s, top, T, gram, phi, gen_cheb)
    return B.build(), layout


@dataclass
class DualSolution:
    """Optimal certificate of one hierarchy level."""

    level: int
    a: np.ndarray
    b: float
    alpha: float
    status: str
    multipliers_plus: list[np.ndarray] = field(repr=False)
    multipliers_minus: list[np.ndarray] = field(repr=False)
    residuals: tuple[float, float, float] = (math.nan, math.nan, math.nan)
    iterations: int = 0
    basis: PolyBasis | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == conic.OPTIMAL

    def certificate(self) -> Polynomial:
        """``P* = <a*, phi>`` in the data basis."""
        return Polynomial(self.basis, self.a)

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "alpha": self.alpha,
            "b": self.b,
            "a": [float(v) for v in self.a],
            "status": self.status,
            "residuals": list(self.residuals),
            "iterations": self.iterations,
        }


def _solve_level(data, delta, domain, s, solver) -> DualSolution:
    prob, layout = assemble_hierarchy_sdp(data, delta, domain, s)
    sol = conic.solve(prob, solver or BLASSO_SOLVER)
    sb = sol.block(0)
    b, a = float(sb[0]), np.array(sb[1:])
    k = len(layout.gram_degrees)
    plus = [sol.block(1 + i) for i in range(k)]
    minus = [sol.block(1 + k + i) for i in range(k)]
    alpha = float(a @ data.y - b * delta)
    return DualSolution(s, a, b, alpha, sol.status, plus, minus, sol.residuals, sol.iterations, data.basis)


def solve_hierarchy(
    data: MomentData,
    delta: float,
    domain: SemialgebraicDomain,
    levels: Sequence[int] | int,
    solver: conic.SolverOptions | None = None,
) -> list[DualSolution]:
    """Solve the hierarchy at each requested level (increasing order)."""
    if isinstance(levels, int):
        levels = [levels]
    return [_solve_level(data, delta, domain, int(s), solver) for s in sorted(levels)]


# ---------------------------------------------------------------------------
# primal extraction
# ---------------------------------------------------------------------------

def optimal_moments(dual: DualSolution, y: np.ndarray, delta: float) -> np.ndarray:
    """``L* = y - delta a* / ||a*||``: the point of the moment ball minimizing ``<a*, L>``."""
    y = np.asarray(y, dtype=float)
    na = float(np.linalg.norm(dual.a))
    if delta == 0.0:
        return y.copy()
    if na == 0.0:
        raise ValueError("zero certificate")
    return y - delta * dual.a / na


def moment_residual(mu: DiscreteMeasure, data: MomentData) -> float:
    return float(np.linalg.norm(mu.moments(data.basis) - data.y))


def refit_weights(points: np.ndarray, data: MomentData, delta: float, solver: conic.SolverOptions | None = None):
    """Smallest total mass on fixed atoms whose moments lie in the ``delta`` ball.

    Solves ``min sum(w)  s.t.  ||V^T w - y||_2 <= delta, w >= 0``. Returns
    ``None`` when the ball cannot be reached from these atoms, which is
    detected by nonnegative least squares before the cone program runs.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, data.n)
    y = np.asarray(data.y, dtype=float)
    V = data.basis.evaluate(pts)
    k, T = V.shape
    _, res = nnls(V.T, y)
    if res > delta:
        return None
    # variables: w (k), then the cone point (t, r) with t = delta, r = V^T w - y
    A = sp.bmat([
        [sp.csr_matrix((1, k)), sp.csr_matrix(([1.0], ([0], [0])), shape=(1, T + 1))],
        [sp.csr_matrix(-V.T), sp.hstack([sp.csr_matrix((T, 1)), sp.identity(T)])],
    ]).tocsr()
    b = np.concatenate([[delta], -y])
    c = np.concatenate([np.ones(k), np.zeros(T + 1)])
    prob = conic.ConicProblem(c, A, b, (("nonneg", k), ("soc", T + 1)))
    sol = conic.solve(prob, solver or REFIT_SOLVER)
    if sol.status not in (conic.OPTIMAL, conic.MAX_ITER):
        return None
    w = np.maximum(sol.x[:k], 0.0)
    return w, float(np.linalg.norm(V.T @ w - y))


def extract_measure(
    dual: DualSolution,
    data: MomentData,
    delta: float,
    d: int | None = None,
    opts: ExtractOptions | None = None,
    solver: conic.SolverOptions | None = None,
    normalization: str = "trace",
    refit: bool = True,
) -> RecoveryReport:
    """Recover the atoms of an optimal measure from the dual optimum.

    The optimal moments ``L*`` are handed to exact recovery, which yields
    the support. The weights are then refitted against ``y`` as the least
    total mass inside the ``delta`` ball, after a joint least-squares polish
    of atoms and weights when the support found is slightly off. With
    ``refit=False`` the atoms and weights of exact recovery are kept as they
    are. The report carries the level, ``alpha_s`` and the residual with
    respect to ``y``.
    """
    n = data.n
    extra = {"level": dual.level, "alpha": dual.alpha, "certificate_norm": float(np.linalg.norm(dual.a))}
    try:
        L = optimal_moments(dual, data.y, delta)
    except ValueError:
        return RecoveryReport(
            DiscreteMeasure.empty(n), False, STAGE_SOLVE, "dual certificate is zero",
            [FLAG_ZERO_CERTIFICATE], delta=delta, extra=extra,
        )
    Ldata = MomentData(data.basis, L, 0.0, "exact")
    rep = recover_exact(Ldata, d, opts, solver, normalization=normalization, polish_fit=refit, delta=delta)
    rep.delta = delta
    rep.extra.update(extra)
    rep.extra["moments_L"] = [float(v) for v in L]
    rep.extra["residual_to_L"] = rep.residual
    tol = delta + 1e-6 * (1.0 + float(np.linalg.norm(data.y)))
    if refit and rep.measure.k and rep.stage in (None, STAGE_FIT):
        pts = rep.measure.points
        fit = refit_weights(pts, data, delta)
        if fit is None:
            out = polish(pts, rep.measure.weights, data, max_move=0.01 * box_diameter(data.box))
            if out is not None:
                pts = out[0][out[1] > 0.0]
                fit = refit_weights(pts, data, delta)
        if fit is not None:
            keep = fit[0] > 0.0
            rep.measure = DiscreteMeasure(pts[keep], fit[0][keep]).sorted()
            if rep.stage == STAGE_FIT:
                rep.success, rep.stage, rep.message = True, None, "ok"
    res = moment_residual(rep.measure, data) if rep.measure.k else float(np.linalg.norm(data.y))
    rep.residual = res
    if rep.measure.k:
        rep.extra["total_variation"] = rep.measure.total_variation
        rep.extra["duality_gap"] = abs(dual.alpha - rep.measure.total_variation)
    if res > tol:
        if rep.success:
            rep.success, rep.stage = False, STAGE_FIT
            rep.message = f"moment residual {res:.3e} exceeds {tol:.3e}"
        rep.flags.append(FLAG_INFEASIBLE_OUTPUT)
    return rep


def recover_noisy(
    data: MomentData,
    delta: float | None = None,
    domain: SemialgebraicDomain | None = None,
    d: int | None = None,
    s: int | None = None,
    truth: DiscreteMeasure | None = None,
    witness=None,
    opts: ExtractOptions | None = None,
    solver: conic.SolverOptions | None = None,
    per_axis: int | None = None,
    normalization: str = "trace",
    refit: bool = True,
) -> RecoveryReport:
    """Total-variation minimization over the moment ball of radius ``delta``.

    Parameters
    ----------
    data : MomentData
        Observed moments; ``delta`` defaults to ``data.delta``.
    domain : SemialgebraicDomain, optional
        Defaults to the data box.
    d : int, optional
        Half-degree used by the support extraction.
    s : int, optional
        Hierarchy level, default ``2 ceil(degree / 2)``.
    truth : DiscreteMeasure, optional
        Ground truth; when given, the report carries localization diagnostics.
    witness : QicWitness, optional
        Witness used by the diagnostics; built from the truth when omitted.
    solver : SolverOptions, optional
        Options for the hierarchy SDP.
    normalization, refit
        Passed to :func:`extract_measure`.
    """
    from . import certify

    delta = data.delta if delta is None else float(delta)
    domain = domain or SemialgebraicDomain.from_box(data.box)
    s = default_level(data.degree) if s is None else int(s)
    (dual,) = solve_hierarchy(data, delta, domain, [s], solver)
    if dual.status not in (conic.OPTIMAL, conic.MAX_ITER):
        return RecoveryReport(
            DiscreteMeasure.empty(data.n), False, STAGE_SOLVE, f"hierarchy SDP reported {dual.status}",
            delta=delta, extra={"level": s, "alpha": dual.alpha},
        )
    rep = extract_measure(dual, data, delta, d, opts, normalization=normalization, refit=refit)
    rep.extra["dual"] = dual
    if dual.status == conic.MAX_ITER:
        rep.flags.append("solver-max-iter")
    if truth is not None and truth.k:
        if witness is None:
            witness = certify.sos_witness(truth.points, domain.box, per_axis=per_axis)
        rep.diagnostics = certify.diagnose(rep.measure, truth, delta, witness)
        rep.extra["witness"] = witness
    return rep


def certificate_sup(dual: DualSolution, box, per_axis: int = 200) -> float:
    """Grid estimate of ``sup_K |P*|``."""
    from .certify import grid_per_axis

    Z = box_grid(as_box(box, dual.basis.n), grid_per_axis(dual.basis.n, per_axis))
    return float(np.abs(dual.basis.evaluate(Z) @ dual.a).max())
