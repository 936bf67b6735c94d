"""Dual certificates, quadratic isolation witnesses and recovery diagnostics.

A quadratic isolation witness for a finite set ``X`` inside a box ``K`` is a
polynomial ``P`` with ``|P| <= 1`` on ``K``, ``P = 1`` on ``X`` and

    1 - P(z) >= min(C_a d(z, X)^2, C_b)        for every z in K.

Two constructions are provided: ``1 - sum f_i^2 / M`` built from generators
of the vanishing ideal, and the average of helper polynomials ``H_m``
composed with normalized generators. Constants that have no closed form
(sup-norms, ``D``, ``D_1``) are estimated on dense grids with local
refinement; they are reported as grid-verified rather than proven.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from scipy import optimize
from scipy.spatial import cKDTree

from .measure import DiscreteMeasure
from .pointalg import Generators, IdealProfile, PointSet, generator_degrees
from .polybasis import (
    MONOMIAL,
    Polynomial,
    PolyBasis,
    as_box,
    basis_size,
    box_diameter,
    box_grid,
    compose_univariate,
    embed_coeffs,
    poly_mul,
)

DEFAULT_GRID = 200
GRID_CAP = 1_000_000
CHUNK = 50_000
# grid-estimated constants are shrunk by this factor so that the inequalities
# keep a margin between grid nodes
SAFETY = 0.9
WITNESS_SLACK = 1e-7
SOS = "sos-generators"
CHEBYSHEV_HELPER = "chebyshev-helper"


# ---------------------------------------------------------------------------
# helper polynomial H_m
# ---------------------------------------------------------------------------

def _check_m(m: int) -> int:
    if int(m) != m or m < 2 or m % 2:
        raise ValueError(f"m must be an even integer >= 2, got {m!r}")
    return int(m)


def helper_cheb(m: int) -> np.ndarray:
    """Chebyshev-series coefficients of ``H_m = (1/m) sum_{k<m} (-1)^k T_{2k}``."""
    m = _check_m(m)
    c = np.zeros(2 * m - 1)
    c[0::2] = [(-1.0) ** k / m for k in range(m)]
    return c


def _chebyshev_int_coeffs(k: int) -> list[int]:
    """Exact integer monomial coefficients of ``T_k``."""
    prev, cur = [1], [0, 1]
    if k == 0:
        return prev
    for _ in range(k - 1):
        nxt = [0] + [2 * v for v in cur]
        for i, v in enumerate(prev):
            nxt[i] -= v
        prev, cur = cur, nxt
    return cur


def helper_poly(m: int) -> Polynomial:
    """``H_m`` as a univariate polynomial in the monomial basis (degree ``2(m-1)``).

    The integer coefficients of the Chebyshev polynomials are summed exactly
    and divided by ``m`` once, so every coefficient is correctly rounded and
    the odd ones are exactly zero. The coefficients grow like ``2^(2m)``, so
    for ``m`` beyond about 10 their rounding alone spoils monomial
    evaluation; use :func:`helper_eval` for values.
    """
    m = _check_m(m)
    deg = 2 * (m - 1)
    acc = [0] * (deg + 1)
    for k in range(m):
        sign = -1 if k % 2 else 1
        for i, v in enumerate(_chebyshev_int_coeffs(2 * k)):
            acc[i] += sign * v
    coeffs = np.array([v / m for v in acc])  # int / int is correctly rounded
    return Polynomial(PolyBasis(1, deg, MONOMIAL), coeffs)


def helper_eval(m: int, x) -> np.ndarray:
    """Stable evaluation of ``H_m`` by Clenshaw's recurrence."""
    return npcheb.chebval(np.asarray(x, dtype=float), helper_cheb(m))


def helper_inequalities(m: int, x) -> dict[str, float]:
    """Largest violation of each bound on ``H_m`` over the sample ``x`` in ``[-1, 1]``.

    A value ``<= 0`` means the bound holds at every sample. The bounds are
    ``|H_m| <= 1``; ``|H_m| <= 3/4`` where ``|arcsin x| >= 2/m``;
    ``|H_m(x)| <= 1 - m^2 x^2 / 12`` where ``|arcsin x| <= 2/m``;
    ``H_m(x) >= 1 - pi^2 m^2 x^2 / 2``; and evenness ``H_m(x) = H_m(-x)``.
    """
    m = _check_m(m)
    x = np.asarray(x, dtype=float)
    h = helper_eval(m, x)
    a = np.abs(h)
    z = np.abs(np.arcsin(np.clip(x, -1.0, 1.0)))
    far, near = z >= 2.0 / m, z <= 2.0 / m

    def worst(v):
        return float(v.max()) if v.size else -math.inf

    return {
        "boundedness": worst(a - 1.0),
        "far": worst(a[far] - 0.75),
        "near": worst(a[near] - (1.0 - m * m * x[near] ** 2 / 12.0)),
        "lower": worst((1.0 - 0.5 * math.pi ** 2 * m * m * x * x) - h),
        "evenness": worst(np.abs(h - helper_eval(m, -x))),
    }


# ---------------------------------------------------------------------------
# grids and sup-norms
# ---------------------------------------------------------------------------

def grid_per_axis(n: int, per_axis: int | None = None, cap: int = GRID_CAP) -> int:
    """Points per axis: ``per_axis`` (default 200) reduced so the total stays below ``cap``."""
    per_axis = DEFAULT_GRID if per_axis is None else int(per_axis)
    if per_axis < 2:
        raise ValueError("grid needs at least 2 points per axis")
    limit = int(math.floor(cap ** (1.0 / n) + 1e-9))
    return max(2, min(per_axis, limit))


def verification_grid(box, per_axis: int | None = None) -> np.ndarray:
    box = as_box(box)
    return box_grid(box, grid_per_axis(len(box), per_axis))


def _eval(poly: Polynomial, Z: np.ndarray) -> np.ndarray:
    out = np.empty(Z.shape[0])
    for s in range(0, Z.shape[0], CHUNK):
        out[s:s + CHUNK] = poly(Z[s:s + CHUNK])
    return out


def _refine_max(fun, grad, z0: np.ndarray, box) -> tuple[np.ndarray, float]:
    """Local maximization of ``fun`` on the box from ``z0``."""
    res = optimize.minimize(
        lambda z: -fun(z[None, :])[0],
        z0,
        jac=lambda z: -grad(z[None, :])[0],
        method="L-BFGS-B",
        bounds=list(box),
        options={"maxiter": 200},
    )
    z = np.clip(res.x, [b[0] for b in box], [b[1] for b in box])
    return z, float(fun(z[None, :])[0])


def _sup(fun, grad, Z: np.ndarray, vals: np.ndarray, box, starts: int = 5) -> float:
    best = float(vals.max())
    for idx in np.argsort(vals)[::-1][:starts]:
        _, v = _refine_max(fun, grad, Z[idx], box)
        best = max(best, v)
    return best


def sup_abs(poly: Polynomial, box, per_axis: int | None = None, Z: np.ndarray | None = None) -> float:
    """Estimate ``sup_K |f|`` by a grid scan plus local ascent from the best nodes."""
    box = as_box(box, poly.n)
    Z = verification_grid(box, per_axis) if Z is None else Z
    vals = _eval(poly, Z)

    def f2(z):
        return _eval(poly, z) ** 2

    def g2(z):
        v = _eval(poly, z)
        return 2.0 * v[:, None] * poly.gradient(z).reshape(z.shape[0], -1)

    return math.sqrt(_sup(f2, g2, Z, vals ** 2, box))


def _distances(points: np.ndarray, Z: np.ndarray) -> np.ndarray:
    return cKDTree(points).query(Z)[0]


def support_eta(X: PointSet, box) -> float:
    """Half the smallest distance between support points or from a support
    point to the boundary of the box.

    Points lying on the boundary are ignored in the boundary term (their
    distance is zero), and the value is capped at half the box diameter.
    """
    box = as_box(box, X.n)
    P = X.points
    cands = [0.5 * box_diameter(box)]
    if X.k > 1:
        diff = P[:, None, :] - P[None, :, :]
        dist = np.sqrt((diff ** 2).sum(-1))
        cands.append(0.5 * float(dist[np.triu_indices(X.k, 1)].min()))
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    gaps = np.concatenate([(P - lo).ravel(), (hi - P).ravel()])
    gaps = gaps[gaps > 0]
    if gaps.size:
        cands.append(0.5 * float(gaps.min()))
    return min(cands)


def separation_radius(X: PointSet, box) -> float:
    """Half the minimum separation of ``X`` (half the box diameter for one point)."""
    box = as_box(box, X.n)
    rho = 0.5 * box_diameter(box)
    if X.k > 1:
        diff = X.points[:, None, :] - X.points[None, :, :]
        dist = np.sqrt((diff ** 2).sum(-1))
        rho = min(rho, 0.5 * float(dist[np.triu_indices(X.k, 1)].min()))
    return rho


# ---------------------------------------------------------------------------
# constants of the generators
# ---------------------------------------------------------------------------

def _polys_of(gens) -> tuple[Polynomial, ...]:
    if isinstance(gens, IdealProfile):
        return gens.generators.polynomials
    if isinstance(gens, Generators):
        return gens.polynomials
    return tuple(gens)


@dataclass(frozen=True)
class DEstimate:
    """Grid estimates of the local-growth constants of ``h = sum (f_i / M_i)^2``.

    ``D`` bounds ``h(z) / d(z, X)^2`` from below on ``N(X, eta)``; ``D1``
    bounds ``max_j |f_j / M_j|`` from below on ``F(X, eta)`` (``inf`` when
    the far region is empty).
    """

    eta: float
    D: float
    D1: float
    D_jacobian: float
    D_grid: float
    M: tuple[float, ...]

    def to_json(self) -> dict:
        return {
            "eta": self.eta,
            "D": self.D,
            "D1": None if math.isinf(self.D1) else self.D1,
            "D_jacobian": self.D_jacobian,
            "D_grid": None if math.isinf(self.D_grid) else self.D_grid,
            "M": list(self.M),
            "verified": "grid",
        }


def estimate_D(X, K, generators, per_axis: int | None = None) -> DEstimate:
    """Estimate ``eta``, ``D`` and ``D1`` for generators cutting out ``X``.

    Raises
    ------
    ValueError
        If the normalized Jacobian is singular at a support point, which
        means the generators do not define ``X`` as a reduced set.
    """
    X = X if isinstance(X, PointSet) else PointSet(X)
    box = as_box(K, X.n)
    polys = _polys_of(generators)
    if not polys:
        raise ValueError("no generators given")
    Z = verification_grid(box, per_axis)
    vals = np.stack([_eval(p, Z) for p in polys])
    M = []
    for p in polys:
        Mi = sup_abs(p, box, Z=Z)
        if not Mi > 0:
            raise ValueError("a generator vanishes identically on the box")
        M.append(Mi)
    M = np.array(M)
    t = vals / M[:, None]
    h = (t ** 2).sum(0)

    D_jac = math.inf
    for x in X.points:
        J = np.stack([np.atleast_1d(p.gradient(x)) / Mi for p, Mi in zip(polys, M)])
        lam = float(np.linalg.eigvalsh(0.5 * J.T @ J).min())
        if lam <= 1e-14 * max(1.0, float(np.abs(J).max()) ** 2):
            raise ValueError(f"singular Jacobian of the generators at {x.tolist()}")
        D_jac = min(D_jac, lam)

    eta = support_eta(X, box)
    dist = _distances(X.points, Z)
    near = (dist < eta) & (dist > 0)
    D_grid = float((h[near] / dist[near] ** 2).min()) if near.any() else math.inf
    far = dist >= eta
    D1 = float(np.abs(t[:, far]).max(axis=0).min()) if far.any() else math.inf
    return DEstimate(eta, min(D_jac, D_grid), D1, D_jac, D_grid, tuple(float(v) for v in M))


def grid_generators(grids: Sequence[Sequence[float]]) -> list[Polynomial]:
    """Generators ``prod_{a in A_i} (x_i - a)`` of the grid ``A_1 x ... x A_n``."""
    n = len(grids)
    out = []
    for i, A in enumerate(grids):
        coeffs = np.ones(1)
        deg = 0
        lin = np.zeros(basis_size(n, 1))
        for a in A:
            lin[:] = 0.0
            lin[0] = -float(a)
            lin[1 + i] = 1.0
            coeffs = poly_mul(coeffs, deg, lin, 1, n)
            deg += 1
        out.append(Polynomial(PolyBasis(n, deg, MONOMIAL), coeffs))
    return out


def grid_constant_D(grids: Sequence[Sequence[float]]) -> float:
    """``(d_min / 2)^(2 (s - 1))`` for a grid ``A_1 x ... x A_n`` in ``[0, 1]^n``.

    ``d_min`` is the smallest gap within any ``A_i`` joined with ``{0, 1}``
    and ``s`` is the largest ``|A_i|``.
    """
    if not grids:
        raise ValueError("need at least one coordinate grid")
    sizes = [len(set(map(float, A))) for A in grids]
    if min(sizes) <= 1:
        raise ValueError("every coordinate grid needs at least two values")
    d_min = math.inf
    for A in grids:
        vals = np.array(sorted(set(map(float, A)) | {0.0, 1.0}))
        if vals[0] < 0 or vals[-1] > 1:
            raise ValueError("grid values must lie in [0, 1]")
        d_min = min(d_min, float(np.diff(vals).min()))
    s = max(sizes)
    return (d_min / 2.0) ** (2 * (s - 1))


# ---------------------------------------------------------------------------
# witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QicWitness:
    """A grid-checked quadratic isolation witness.

    ``P`` is evaluated through its generators (numerically stable); the
    monomial coefficients are available through :meth:`monomial_coeffs`.
    """

    kind: str
    points: np.ndarray
    box: tuple
    generators: tuple[Polynomial, ...]
    M: tuple[float, ...]
    C_a: float
    C_b: float
    s: int
    degree: int
    m: int | None = None
    D: float | None = None
    eta: float | None = None
    c0_published: float | None = None
    grid_verified: bool = False
    max_violation: float = math.nan
    sup_norm: float = math.nan
    min_on_support: float = math.nan
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def c0(self) -> float:
        return math.sqrt(self.C_b / self.C_a)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1 and (self.n > 1 or z.size == 1)
        Z = z.reshape(-1, self.n)
        vals = np.stack([_eval(f, Z) for f in self.generators])
        if self.kind == SOS:
            out = 1.0 - (vals ** 2).sum(0) / self.M[0]
        else:
            t = np.clip(vals / np.asarray(self.M)[:, None], -1.0, 1.0)
            out = helper_eval(self.m, t).mean(0)
        return out[0] if single else out

    def monomial_coeffs(self) -> np.ndarray:
        n = self.n
        mono = [f.to_monomial() for f in self.generators]
        out = np.zeros(basis_size(n, self.degree))
        if self.kind == SOS:
            for f in mono:
                g = f.basis.d
                sq = poly_mul(f.coeffs, g, f.coeffs, g, n)
                out -= embed_coeffs(sq, n, 2 * g, self.degree) / self.M[0]
            out[0] += 1.0
            return out
        h = helper_poly(self.m).coeffs
        for f, Mi in zip(mono, self.M):
            c, deg = compose_univariate(h, f.coeffs / Mi, n, f.basis.d)
            out += embed_coeffs(c, n, deg, self.degree)
        return out / self.s

    def to_json(self, coefficients: bool = True) -> dict:
        doc = {
            "kind": self.kind,
            "m": self.m,
            "degree": self.degree,
            "s": self.s,
            "C_a": self.C_a,
            "C_b": self.C_b,
            "c0": self.c0,
            "c0_published": self.c0_published,
            "D": self.D,
            "eta": self.eta,
            "M": list(self.M),
            "grid_verified": self.grid_verified,
            "max_violation": self.max_violation,
            "sup_norm": self.sup_norm,
            "min_on_support": self.min_on_support,
        }
        if coefficients:
            doc["monomial_coeffs"] = [float(v) for v in self.monomial_coeffs()]
        return doc


def check_witness(w: QicWitness, Z: np.ndarray | None = None, per_axis: int | None = None) -> QicWitness:
    """Check the isolation inequality, ``|P| <= 1`` and ``P = 1`` on ``X`` on a grid."""
    Z = verification_grid(w.box, per_axis) if Z is None else Z
    P = w(Z)
    d = _distances(w.points, Z)
    bound = np.maximum(1.0 - w.C_a * d ** 2, 1.0 - w.C_b)
    viol = float((P - bound).max())
    sup = float(np.abs(P).max())
    on = float(np.min(w(w.points)))
    ok = viol <= WITNESS_SLACK and sup <= 1.0 + 1e-8 and on >= 1.0 - 1e-8
    return _replace(w, grid_verified=bool(ok), max_violation=viol, sup_norm=sup, min_on_support=on)


def _replace(w: QicWitness, **kw) -> QicWitness:
    return replace(w, **kw)


def sos_witness(X, K, profile=None, per_axis: int | None = None) -> QicWitness:
    """``P = 1 - sum f_i^2 / M`` with ``M = sup_K sum f_i^2``.

    ``C_a`` is the smaller of the curvature of ``1 - P`` at the support
    points and the grid minimum of ``(1 - P) / d^2`` within half the minimum
    separation of ``X``; ``C_b`` is the grid minimum of ``1 - P`` outside
    that radius. Both are multiplied by a safety factor before the grid
    check.
    """
    X = X if isinstance(X, PointSet) else PointSet(X)
    box = as_box(K, X.n)
    polys = _polys_of(profile if profile is not None else generator_degrees(X))
    if not polys:
        raise ValueError("no generators available")
    Z = verification_grid(box, per_axis)
    vals = np.stack([_eval(p, Z) for p in polys])
    Hvals = (vals ** 2).sum(0)

    def Hf(z):
        return sum(_eval(p, z) ** 2 for p in polys)

    def Hg(z):
        g = 0.0
        for p in polys:
            v = _eval(p, z)
            g = g + 2.0 * v[:, None] * p.gradient(z).reshape(z.shape[0], -1)
        return g

    M = _sup(Hf, Hg, Z, Hvals, box)
    if not M > 0:
        raise ValueError("sup of the sum of squares is not positive (degenerate generators)")
    r = Hvals / M
    eta = support_eta(X, box)
    rho = separation_radius(X, box)
    d = _distances(X.points, Z)
    near = (d < rho) & (d > 0)
    far = d >= rho
    curv = math.inf
    for x in X.points:
        J = np.stack([np.atleast_1d(p.gradient(x)) for p in polys])
        curv = min(curv, float(np.linalg.eigvalsh(J.T @ J).min()) / M)
    C_a = min(curv, float((r[near] / d[near] ** 2).min()) if near.any() else math.inf)
    C_b = float(r[far].min()) if far.any() else C_a * rho ** 2
    C_a *= SAFETY
    C_b = min(C_b * SAFETY, 1.0 - 1e-12)
    if not (C_a > 0 and C_b > 0):
        raise ValueError("isolation constants are not positive; generators may be degenerate")
    g = max(p.degree for p in polys)
    w = QicWitness(SOS, X.points, box, polys, (M,), C_a, C_b, len(polys), 2 * g, eta=eta)
    return check_witness(w, Z)


def chebyshev_witness(
    X,
    K,
    profile=None,
    m: int = 4,
    degree: int | None = None,
    per_axis: int | None = None,
    D_est: DEstimate | None = None,
) -> QicWitness:
    """``P_m = (1/s) sum H_m(f_i / M_i)`` with the constants

    ``C_a = m^2 D / (12 s)``, ``C_b = 1 / (4 s)`` and ``c0 = sqrt(C_b / C_a)``.

    The witness is grid-checked; ``grid_verified`` is false when ``m`` is
    too small for the inequalities to hold.
    """
    m = _check_m(m)
    X = X if isinstance(X, PointSet) else PointSet(X)
    box = as_box(K, X.n)
    polys = _polys_of(profile if profile is not None else generator_degrees(X))
    g = max(p.degree for p in polys)
    deg = 2 * (m - 1) * g
    if degree is not None and degree < deg:
        raise ValueError(f"degree budget {degree} is below 2(m-1)g = {deg}")
    est = D_est or estimate_D(X, box, polys, per_axis)
    if not est.D > 0:
        raise ValueError("D estimate is not positive")
    s = len(polys)
    C_a = m * m * est.D / (12.0 * s)
    C_b = 1.0 / (4.0 * s)
    published = math.sqrt(6.0 / est.D) / m
    w = QicWitness(
        CHEBYSHEV_HELPER, X.points, box, polys, est.M, C_a, C_b, s, deg,
        m=m, D=est.D, eta=est.eta, c0_published=published,
        extra={"D1": est.D1, "m_far": None if math.isinf(est.D1) else math.sqrt(3.0) / est.D1},
    )
    return check_witness(w, per_axis=per_axis)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Bound:
    lhs: float
    rhs: float
    slack: float = 1e-12

    @property
    def ok(self) -> bool:
        return bool(self.lhs <= self.rhs + self.slack)

    def to_json(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "ok": self.ok}


@dataclass(frozen=True)
class RecoveryDiagnostics:
    """Localization and mass bounds for a recovered measure against the truth."""

    distances: np.ndarray
    near_mass: float
    far_mass: float
    negative_mass: float
    total_variation: float
    weight_errors: np.ndarray
    c0: float
    bounds: dict
    witness_verified: bool

    @property
    def passed(self) -> bool:
        return all(b.ok for b in self.bounds.values())

    def to_json(self) -> dict:
        return {
            "c0": self.c0,
            "distances": [float(v) for v in self.distances],
            "near_mass": self.near_mass,
            "far_mass": self.far_mass,
            "negative_mass": self.negative_mass,
            "total_variation": self.total_variation,
            "weight_errors": [float(v) for v in self.weight_errors],
            "bounds": {k: b.to_json() for k, b in self.bounds.items()},
            "witness_grid_verified": self.witness_verified,
            "passed": self.passed,
        }


def diagnose(est: DiscreteMeasure, mu: DiscreteMeasure, delta: float, witness: QicWitness, slack: float = 1e-12) -> RecoveryDiagnostics:
    """Evaluate the localization, mass and certificate bounds.

    Bounds reported (``lhs <= rhs``):

    * ``spike_localization``: atoms heavier than ``2 delta / C_b`` lie within ``c0`` of the support;
    * ``near_moment``: positive mass in ``N(X, c0)`` weighted by ``d^2`` is at most ``2 delta / C_a``;
    * ``far_mass``: positive mass in ``F(X, c0)`` is at most ``2 delta / C_b``;
    * ``negative_mass``: total negative mass is at most ``2 delta``;
    * ``certificate``: ``|int P d est - int P d mu| <= 2 delta``;
    * ``weights`` (helper witnesses only): for every true atom, the mass of
      the estimated atoms within ``c0`` that are closest to it differs from its weight by at most
      ``||mu||/m + (2(s+1) + 12 s pi^2 / (diam(K)^2 D)) delta``.
    """
    if est.n != mu.n:
        raise ValueError("measures live in different dimensions")
    c0 = witness.c0
    w = est.weights
    if est.k:
        dist = _distances(mu.points, est.points) if mu.k else np.full(est.k, np.inf)
    else:
        dist = np.zeros(0)
    pos = w > 0
    near = pos & (dist <= c0)
    far = pos & (dist > c0)
    near_mass = float(w[near].sum())
    far_mass = float(w[far].sum())
    neg = float(-w[w < 0].sum()) + 0.0
    tv = float(np.abs(w).sum())

    bounds: dict[str, Bound] = {}
    heavy = w > 2.0 * delta / witness.C_b
    bounds["spike_localization"] = Bound(float(dist[heavy].max()) if heavy.any() else 0.0, c0, slack)
    bounds["near_moment"] = Bound(float((w[near] * dist[near] ** 2).sum()), 2.0 * delta / witness.C_a, slack)
    bounds["far_mass"] = Bound(far_mass, 2.0 * delta / witness.C_b, slack)
    bounds["negative_mass"] = Bound(neg, 2.0 * delta, slack)
    P_est = float(witness(est.points) @ w) if est.k else 0.0
    P_mu = float(witness(mu.points) @ mu.weights) if mu.k else 0.0
    bounds["certificate"] = Bound(abs(P_est - P_mu), 2.0 * delta, slack)

    # each estimated atom counts towards its nearest true atom
    errs = np.array(mu.weights, dtype=float)
    if est.k and mu.k:
        owner = np.argmin(((est.points[:, None, :] - mu.points[None, :, :]) ** 2).sum(-1), axis=1)
        for i in range(mu.k):
            errs[i] = abs(mu.weights[i] - float(w[(owner == i) & (dist <= c0)].sum()))
    if witness.kind == CHEBYSHEV_HELPER and witness.D:
        diam = box_diameter(witness.box)
        rhs = mu.total_variation / witness.m + (
            2.0 * (witness.s + 1) + 12.0 * witness.s * math.pi ** 2 / (diam ** 2 * witness.D)
        ) * delta
        bounds["weights"] = Bound(float(errs.max()) if errs.size else 0.0, rhs, slack)
    return RecoveryDiagnostics(dist, near_mass, far_mass, neg, tv, errs, c0, bounds, witness.grid_verified)
