"""Multivariate polynomial bases on boxes.

Three families are supported, all indexed by multi-indices in graded
lexicographic order:

``monomial``
    plain monomials ``x**alpha`` in the ambient coordinates.
``orthonormal-uniform-box``
    tensor products of normalized Legendre polynomials, orthonormal under the
    uniform probability measure on the box.
``chebyshev-product``
    tensor products of Chebyshev polynomials of the first kind in the
    coordinates rescaled to ``[-1, 1]``.

Evaluation always goes through three-term recurrences in the rescaled
coordinates, never through monomial coefficients, so high degrees stay
accurate. Monomial coefficient tables are available for algebra
(products, change of basis, coefficient matching).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly
from scipy.special import beta as beta_fn

MONOMIAL = "monomial"
ORTHONORMAL = "orthonormal-uniform-box"
CHEBYSHEV = "chebyshev-product"
KINDS = (MONOMIAL, ORTHONORMAL, CHEBYSHEV)

Box = tuple[tuple[float, float], ...]


# ---------------------------------------------------------------------------
# multi-indices
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def enumerate_basis(n: int, d: int) -> tuple[tuple[int, ...], ...]:
    """All exponent tuples of total degree ``<= d`` in graded-lex order.

    Within one total degree the tuples are sorted in decreasing
    lexicographic order, so for ``n=2`` the order is ``1, x, y, x^2, xy, y^2``.
    """
    if n < 1 or d < 0:
        raise ValueError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    out: list[tuple[int, ...]] = []
    for t in range(d + 1):
        block = [c for c in _compositions(t, n)]
        block.sort(reverse=True)
        out.extend(block)
    return tuple(out)


def _compositions(t: int, n: int):
    # stars and bars
    for bars in itertools.combinations(range(t + n - 1), n - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(t + n - 1 - prev - 1)
        yield tuple(parts)


def basis_size(n: int, d: int) -> int:
    return math.comb(n + d, d)


@lru_cache(maxsize=None)
def exponent_array(n: int, d: int) -> np.ndarray:
    arr = np.array(enumerate_basis(n, d), dtype=np.int64).reshape(-1, n)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def monomial_index(n: int, d: int) -> dict[tuple[int, ...], int]:
    return {a: i for i, a in enumerate(enumerate_basis(n, d))}


@lru_cache(maxsize=None)
def sum_index_table(n: int, d1: int, d2: int) -> np.ndarray:
    """``table[i, j]`` is the index of ``alpha_i + beta_j`` in the degree ``d1+d2`` basis."""
    idx = monomial_index(n, d1 + d2)
    e1 = enumerate_basis(n, d1)
    e2 = enumerate_basis(n, d2)
    table = np.empty((len(e1), len(e2)), dtype=np.int64)
    for i, a in enumerate(e1):
        for j, b in enumerate(e2):
            table[i, j] = idx[tuple(p + q for p, q in zip(a, b))]
    table.setflags(write=False)
    return table


def total_degree(alpha: Sequence[int]) -> int:
    return int(sum(alpha))


# ---------------------------------------------------------------------------
# boxes
# ---------------------------------------------------------------------------

def as_box(box, n: int | None = None) -> Box:
    """Normalize box input to a tuple of ``(lo, hi)`` pairs.

    ``None`` means ``[-1, 1]^n``.
    """
    if box is None:
        if n is None:
            raise ValueError("dimension required for the default box")
        return tuple((-1.0, 1.0) for _ in range(n))
    arr = np.asarray(box, dtype=float)
    if arr.ndim == 1 and arr.shape == (2,):
        arr = np.tile(arr, (n or 1, 1))
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"box must be a list of [lo, hi] pairs, got {box!r}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"box has {arr.shape[0]} coordinates, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("box bounds must be finite")
    if np.any(arr[:, 1] <= arr[:, 0]):
        raise ValueError(f"degenerate box {arr.tolist()}: every coordinate needs lo < hi")
    return tuple((float(lo), float(hi)) for lo, hi in arr)


def to_unit(box: Box, z: np.ndarray) -> np.ndarray:
    """Map points of ``box`` affinely onto ``[-1, 1]^n``."""
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return (2.0 * z - lo - hi) / (hi - lo)


def from_unit(box: Box, u: np.ndarray) -> np.ndarray:
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return 0.5 * (u * (hi - lo) + lo + hi)


def box_diameter(box: Box) -> float:
    return float(math.sqrt(sum((hi - lo) ** 2 for lo, hi in box)))


def box_grid(box: Box, per_axis: int | Sequence[int]) -> np.ndarray:
    """Tensor grid of the box, shape ``(prod(per_axis), n)``, last axis fastest."""
    n = len(box)
    if np.isscalar(per_axis):
        per_axis = [int(per_axis)] * n
    axes = [np.linspace(lo, hi, int(m)) for (lo, hi), m in zip(box, per_axis)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


# ---------------------------------------------------------------------------
# univariate families
# ---------------------------------------------------------------------------

def _family_1d(kind: str, x: np.ndarray, d: int, lo: float, hi: float, order: int) -> list[np.ndarray]:
    """Values and derivatives (w.r.t. ``x``) of the 1-D family up to degree ``d``.

    Returns ``order + 1`` arrays of shape ``(len(x), d + 1)``.
    """
    x = np.asarray(x, dtype=float)
    N = x.shape[0]
    out = [np.zeros((N, d + 1)) for _ in range(order + 1)]
    if kind == MONOMIAL:
        t, dt = x, 1.0
    else:
        t = (2.0 * x - lo - hi) / (hi - lo)
        dt = 2.0 / (hi - lo)
    out[0][:, 0] = 1.0
    if d == 0:
        return out
    out[0][:, 1] = t
    if order >= 1:
        out[1][:, 1] = 1.0
    for k in range(1, d):
        # p_{k+1} = (a t) p_k - c p_{k-1}
        if kind == MONOMIAL:
            a, c = 1.0, 0.0
        elif kind == CHEBYSHEV:
            a, c = 2.0, 1.0
        else:
            a, c = (2 * k + 1) / (k + 1), k / (k + 1)
        out[0][:, k + 1] = a * t * out[0][:, k] - c * out[0][:, k - 1]
        if order >= 1:
            out[1][:, k + 1] = a * out[0][:, k] + a * t * out[1][:, k] - c * out[1][:, k - 1]
        if order >= 2:
            out[2][:, k + 1] = 2 * a * out[1][:, k] + a * t * out[2][:, k] - c * out[2][:, k - 1]
    if kind == ORTHONORMAL:
        scale = np.sqrt(2.0 * np.arange(d + 1) + 1.0)
        for arr in out:
            arr *= scale
    for q in range(1, order + 1):
        out[q] *= dt ** q
    return out


def _coeffs_1d(kind: str, d: int, lo: float, hi: float) -> np.ndarray:
    """Row ``k``: monomial coefficients (in ``x``) of the degree-``k`` family member."""
    C = np.zeros((d + 1, d + 1))
    if kind == MONOMIAL:
        return np.eye(d + 1)
    # u = a x + b
    a = 2.0 / (hi - lo)
    b = -(lo + hi) / (hi - lo)
    for k in range(d + 1):
        e = np.zeros(k + 1)
        e[k] = 1.0
        cu = npcheb.cheb2poly(e) if kind == CHEBYSHEV else npleg.leg2poly(e) * math.sqrt(2 * k + 1)
        # substitute u = a x + b
        acc = np.zeros(1)
        for coef in cu[::-1]:
            acc = nppoly.polyadd(nppoly.polymul(acc, [b, a]), [coef])
        C[k, : len(acc)] = acc[: d + 1]
    return C


# ---------------------------------------------------------------------------
# bases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolyBasis:
    """Indexed polynomial basis of ``V_{<=d}`` on ``R^n``.

    Immutable; derived tables are computed lazily and cached.
    """

    n: int
    d: int
    kind: str = MONOMIAL
    box: Box = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.n < 1 or self.d < 0:
            raise ValueError("need n >= 1 and d >= 0")
        object.__setattr__(self, "box", as_box(self.box, self.n))

    @property
    def size(self) -> int:
        return basis_size(self.n, self.d)

    def __len__(self) -> int:
        return self.size

    @property
    def exponents(self) -> np.ndarray:
        return exponent_array(self.n, self.d)

    def with_degree(self, d: int) -> "PolyBasis":
        return PolyBasis(self.n, d, self.kind, self.box)

    def with_kind(self, kind: str) -> "PolyBasis":
        return PolyBasis(self.n, self.d, kind, self.box)

    @cached_property
    def monomial_coeffs(self) -> np.ndarray:
        """``(T, T)`` matrix; row ``i`` holds the monomial coefficients of ``phi_i``."""
        T = self.size
        if self.kind == MONOMIAL:
            return np.eye(T)
        tables = [_coeffs_1d(self.kind, self.d, lo, hi) for lo, hi in self.box]
        E = self.exponents
        C = np.zeros((T, T))
        for i, alpha in enumerate(E):
            # coefficient of x^beta is prod_j table_j[alpha_j, beta_j]
            prod = np.ones(T)
            for j in range(self.n):
                prod = prod * tables[j][alpha[j], E[:, j]]
            C[i] = prod
        C.setflags(write=False)
        return C

    def evaluate(self, z, order: int = 0):
        """Basis values (and derivatives) at one point or a batch of points.

        Returns ``V`` of shape ``(N, T)``; with ``order >= 1`` also the gradient
        ``(N, T, n)``; with ``order == 2`` also the Hessian ``(N, T, n, n)``.
        A single point of shape ``(n,)`` gives ``(T,)``-shaped values.
        """
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        Z = z.reshape(1, -1) if single else z
        if Z.shape[1] != self.n:
            raise ValueError(f"point dimension {Z.shape[1]} does not match basis dimension {self.n}")
        E = self.exponents
        fams = [_family_1d(self.kind, Z[:, j], self.d, *self.box[j], order) for j in range(self.n)]
        # per-coordinate factors gathered at the exponents: (order+1, N, T)
        g = [np.stack([f[q][:, E[:, j]] for q in range(order + 1)]) for j, f in enumerate(fams)]
        V = np.ones((Z.shape[0], E.shape[0]))
        for j in range(self.n):
            V = V * g[j][0]
        if order == 0:
            return V[0] if single else V
        n = self.n
        G = np.empty(V.shape + (n,))
        for k in range(n):
            acc = np.ones_like(V)
            for j in range(n):
                acc = acc * (g[j][1] if j == k else g[j][0])
            G[..., k] = acc
        if order == 1:
            return (V[0], G[0]) if single else (V, G)
        H = np.empty(V.shape + (n, n))
        for k in range(n):
            for l in range(k, n):
                acc = np.ones_like(V)
                for j in range(n):
                    if j == k == l:
                        acc = acc * g[j][2]
                    elif j == k or j == l:
                        acc = acc * g[j][1]
                    else:
                        acc = acc * g[j][0]
                H[..., k, l] = acc
                H[..., l, k] = acc
        return (V[0], G[0], H[0]) if single else (V, G, H)


def eval_basis(basis: PolyBasis, z) -> np.ndarray:
    """Vector ``(phi_1(z), ..., phi_T(z))``; rows for a batch of points."""
    return basis.evaluate(z)


def orthonormalize(n: int, d: int, box=None) -> PolyBasis:
    """Basis of ``V_{<=d}`` orthonormal under the uniform probability measure on ``box``."""
    return PolyBasis(n, d, ORTHONORMAL, as_box(box, n))


def change_of_basis(src: PolyBasis, dst: PolyBasis) -> np.ndarray:
    """Matrix ``R`` with ``src_i = sum_j R[i, j] dst_j``.

    Both bases need the same dimension and degree.
    """
    if src.n != dst.n or src.d != dst.d:
        raise ValueError("change_of_basis needs bases of equal dimension and degree")
    Cs = src.monomial_coeffs
    if dst.kind == MONOMIAL:
        return np.array(Cs)
    if dst.kind == ORTHONORMAL and src.kind != MONOMIAL:
        # exact projection by quadrature, no monomial round trip
        nodes, weights = gauss_legendre_box(dst.box, src.d // 2 + dst.d // 2 + 2, probability=True)
        Vs = src.evaluate(nodes)
        Vd = dst.evaluate(nodes)
        return (Vs * weights[:, None]).T @ Vd
    Cd = dst.monomial_coeffs
    return np.linalg.solve(Cd.T, Cs.T).T


# ---------------------------------------------------------------------------
# polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Polynomial:
    """``sum_i coeffs[i] * basis_i``."""

    basis: PolyBasis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).copy()
        if c.shape != (self.basis.size,):
            raise ValueError(f"expected {self.basis.size} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.basis.n

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if self.basis.kind == MONOMIAL and self.n == 1:
            x = z.reshape(-1)
            vals = horner_compensated(self.coeffs, x)
            return vals[0] if z.ndim <= 1 and z.size == 1 else vals
        return self.basis.evaluate(z) @ self.coeffs

    def gradient(self, z):
        _, G = self.basis.evaluate(z, order=1)
        return np.einsum("...ti,t->...i", G, self.coeffs)

    @property
    def degree(self) -> int:
        nz = np.nonzero(np.abs(self.coeffs) > 0)[0]
        if nz.size == 0:
            return 0
        return int(self.basis.exponents[nz].sum(axis=1).max())

    def to_monomial(self) -> "Polynomial":
        if self.basis.kind == MONOMIAL:
            return self
        return Polynomial(self.basis.with_kind(MONOMIAL), self.basis.monomial_coeffs.T @ self.coeffs)

    def in_basis(self, target: PolyBasis) -> "Polynomial":
        """Re-express in ``target`` (same dimension, degree at least ours)."""
        mono = self.to_monomial().coeffs
        mono = embed_coeffs(mono, self.n, self.basis.d, target.d)
        if target.kind == MONOMIAL:
            return Polynomial(target, mono)
        return Polynomial(target, np.linalg.solve(target.monomial_coeffs.T, mono))


def chebyshev_coeffs(k: int) -> Polynomial:
    """``T_k`` as a univariate polynomial in the monomial basis."""
    if k < 0:
        raise ValueError("order must be nonnegative")
    prev, cur = np.zeros(k + 1), np.zeros(k + 1)
    prev[0] = 1.0
    if k == 0:
        return Polynomial(PolyBasis(1, 0), prev[:1])
    cur[1] = 1.0
    for _ in range(1, k):
        nxt = -prev.copy()
        nxt[1:] += 2.0 * cur[:-1]
        prev, cur = cur, nxt
    return Polynomial(PolyBasis(1, k), cur)


def horner_compensated(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Univariate evaluation with error-free transformations.

    Accurate to roughly ``eps + cond * eps**2`` for the stored coefficients.
    It cannot undo the rounding of the coefficients themselves, which
    dominates for high-degree Chebyshev polynomials written in monomials.
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(coeffs, dtype=float)
    s = np.full_like(x, c[-1])
    err = np.zeros_like(x)
    for a in c[-2::-1]:
        p, pe = _two_prod(s, x)
        s, se = _two_sum(p, a)
        err = err * x + (pe + se)
    return s + err


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


_SPLIT = 134217729.0  # 2**27 + 1


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, al * bl - (((p - ah * bh) - al * bh) - ah * bl)


# ---------------------------------------------------------------------------
# monomial-coefficient algebra
# ---------------------------------------------------------------------------

def embed_coeffs(c: np.ndarray, n: int, d_from: int, d_to: int) -> np.ndarray:
    """Pad monomial coefficients of degree ``d_from`` into the degree ``d_to`` layout."""
    if d_to == d_from:
        return np.asarray(c, dtype=float)
    if d_to < d_from:
        tail = np.asarray(c)[basis_size(n, d_to):]
        if np.any(tail != 0):
            raise ValueError("cannot truncate a polynomial with nonzero high-degree terms")
        return np.asarray(c, dtype=float)[: basis_size(n, d_to)]
    out = np.zeros(basis_size(n, d_to))
    out[: basis_size(n, d_from)] = c
    return out


def poly_mul(a: np.ndarray, da: int, b: np.ndarray, db: int, n: int) -> np.ndarray:
    """Product of monomial coefficient vectors; result has degree ``da + db``."""
    table = sum_index_table(n, da, db)
    out = np.zeros(basis_size(n, da + db))
    np.add.at(out, table.ravel(), np.outer(a, b).ravel())
    return out


def compose_univariate(h: np.ndarray, f: np.ndarray, n: int, df: int) -> tuple[np.ndarray, int]:
    """Monomial coefficients of ``h(f(x))`` for univariate ``h`` and ``n``-variate ``f``."""
    deg_h = len(h) - 1
    acc = np.array([h[-1]])
    acc_deg = 0
    for coef in h[-2::-1]:
        acc = poly_mul(acc, acc_deg, f, df, n)
        acc_deg += df
        acc[0] += coef
    return embed_coeffs(acc, n, acc_deg, deg_h * df), deg_h * df


def affine_substitute(c: np.ndarray, n: int, d: int, scale, shift) -> np.ndarray:
    """Coefficients of ``p(scale * x + shift)`` where ``p`` has monomial coefficients ``c``."""
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (n,))
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (n,))
    E = exponent_array(n, d)
    idx = monomial_index(n, d)
    # binomial expansions of (s x + t)^k per coordinate
    tables = []
    for j in range(n):
        T = np.zeros((d + 1, d + 1))
        for k in range(d + 1):
            for r in range(k + 1):
                T[k, r] = math.comb(k, r) * scale[j] ** r * shift[j] ** (k - r)
        tables.append(T)
    out = np.zeros(basis_size(n, d))
    for i, alpha in enumerate(E):
        if c[i] == 0:
            continue
        ranges = [range(a + 1) for a in alpha]
        for beta in itertools.product(*ranges):
            w = c[i]
            for j in range(n):
                w *= tables[j][alpha[j], beta[j]]
            out[idx[beta]] += w
    return out


def box_to_unit_coeffs(c: np.ndarray, n: int, d: int, box: Box) -> np.ndarray:
    """Coefficients in ``u`` of ``p(x(u))`` where ``x = from_unit(box, u)``."""
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return affine_substitute(c, n, d, 0.5 * (hi - lo), 0.5 * (hi + lo))


def unit_to_box_coeffs(c: np.ndarray, n: int, d: int, box: Box) -> np.ndarray:
    """Coefficients in ``x`` of ``q(u(x))`` where ``u = to_unit(box, x)``."""
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return affine_substitute(c, n, d, 2.0 / (hi - lo), -(lo + hi) / (hi - lo))


# ---------------------------------------------------------------------------
# quadrature and moments
# ---------------------------------------------------------------------------

def gauss_legendre_box(box: Box, q: int, probability: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre rule with ``q`` nodes per axis (exact to degree ``2q-1``)."""
    t, w = npleg.leggauss(q)
    axes, wts = [], []
    for lo, hi in box:
        axes.append(0.5 * (hi - lo) * t + 0.5 * (hi + lo))
        wts.append(0.5 * w if probability else 0.5 * (hi - lo) * w)
    nodes = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    weights = np.ones(nodes.shape[0])
    for m in np.meshgrid(*wts, indexing="ij"):
        weights = weights * m.ravel()
    return nodes, weights


def _chebyshev_rule(weight: str, q: int) -> tuple[np.ndarray, np.ndarray]:
    i = np.arange(1, q + 1)
    if weight == "cheb2":
        # int f / sqrt(1-x^2)
        return np.cos((2 * i - 1) * np.pi / (2 * q)), np.full(q, np.pi / q)
    th = i * np.pi / (q + 1)
    return np.cos(th), np.pi / (q + 1) * np.sin(th) ** 2


def monomial_moments(n: int, d: int, box=None, weight: str = "uniform", normalized: bool = False) -> np.ndarray:
    """Closed-form monomial moments of a box density."""
    box = as_box(box, n)
    E = exponent_array(n, d)
    if weight == "uniform":
        out = np.ones(E.shape[0])
        for j, (lo, hi) in enumerate(box):
            a = E[:, j]
            out = out * (hi ** (a + 1) - lo ** (a + 1)) / (a + 1)
        if normalized:
            out = out / math.prod(hi - lo for lo, hi in box)
        return out
    if weight in ("cheb1", "cheb2"):
        if n != 1 or box != ((-1.0, 1.0),):
            raise ValueError(f"{weight} weight is only supported for n=1 on [-1, 1]")
        a = E[:, 0]
        second = 1.5 if weight == "cheb1" else 0.5
        out = np.where(a % 2 == 0, beta_fn((a + 1) / 2.0, second), 0.0)
        if normalized:
            out = out / beta_fn(0.5, second)
        return out
    raise ValueError(f"unsupported weight {weight!r}")


def box_moments(
    n: int,
    d: int,
    box=None,
    weight: str | Callable = "uniform",
    kind: str = MONOMIAL,
    normalized: bool = False,
) -> np.ndarray:
    """Exact moments ``int phi_i dmu`` of a density on the box against a basis.

    ``weight`` is ``"uniform"`` (Lebesgue on the box), ``"cheb1"``
    (``sqrt(1-x^2)``), ``"cheb2"`` (``1/sqrt(1-x^2)``), or a callable density
    ``w(points) -> values`` integrated by a high-order Gauss-Legendre rule.
    """
    box = as_box(box, n)
    basis = PolyBasis(n, d, kind, box)
    if callable(weight):
        nodes, wts = gauss_legendre_box(box, max(64, d + 32))
        dens = np.asarray(weight(nodes), dtype=float)
        out = basis.evaluate(nodes).T @ (wts * dens)
        if normalized:
            out = out / float(wts @ dens)
        return out
    if kind == MONOMIAL:
        return monomial_moments(n, d, box, weight, normalized)
    q = d // 2 + 2
    if weight == "uniform":
        nodes, wts = gauss_legendre_box(box, q, probability=normalized)
    elif weight in ("cheb1", "cheb2"):
        if n != 1 or box != ((-1.0, 1.0),):
            raise ValueError(f"{weight} weight is only supported for n=1 on [-1, 1]")
        t, wts = _chebyshev_rule(weight, q)
        nodes = t[:, None]
        if normalized:
            wts = wts / wts.sum()
    else:
        raise ValueError(f"unsupported weight {weight!r}")
    return basis.evaluate(nodes).T @ wts
