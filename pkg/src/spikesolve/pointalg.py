"""Linear algebra on the vanishing ideal of a finite point set.

Every rank below is computed from evaluation matrices in a tensor Chebyshev
basis on the bounding box of the points (rescaled to ``[-1, 1]^n``). The span
of polynomials of degree ``<= t`` does not depend on the basis, so ranks and
kernel dimensions are the same as for monomials, but the matrices are far
better conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .polybasis import CHEBYSHEV, MONOMIAL, PolyBasis, Polynomial, basis_size, monomial_index

RANK_RTOL = 1e-9


@dataclass(frozen=True)
class PointSet:
    """Finite set of pairwise distinct points, stored as a ``(k, n)`` array."""

    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        if p.ndim == 1:
            p = p.reshape(-1, 1)
        if p.ndim != 2 or p.shape[0] < 1:
            raise ValueError("a point set needs at least one point")
        if not np.all(np.isfinite(p)):
            raise ValueError("points must be finite")
        if p.shape[0] > 1:
            diff = p[:, None, :] - p[None, :, :]
            dist = np.sqrt((diff ** 2).sum(-1))
            iu = np.triu_indices(p.shape[0], 1)
            if dist[iu].min() <= 0.0:
                raise ValueError("duplicate points in point set")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def k(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.k

    @cached_property
    def frame(self) -> tuple[tuple[float, float], ...]:
        """Box used to rescale the points before rank computations."""
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        half = np.where(half > 1e-12 * (1.0 + np.abs(mid)), half, 1.0)
        return tuple((float(m - h), float(m + h)) for m, h in zip(mid, half))

    def basis(self, t: int) -> PolyBasis:
        return PolyBasis(self.n, t, CHEBYSHEV, self.frame)


def _as_pointset(X) -> PointSet:
    return X if isinstance(X, PointSet) else PointSet(X)


def _rank(M: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _null_space(M: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the kernel as columns."""
    T = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(T)
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    r = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    return Vt[r:].T.copy()


def vandermonde(X, d: int) -> np.ndarray:
    """``k x T`` matrix of monomials of degree ``<= d`` evaluated at the points."""
    X = _as_pointset(X)
    if d < 0:
        raise ValueError("degree must be nonnegative")
    return PolyBasis(X.n, d, MONOMIAL).evaluate(X.points)


def hilbert_function(X, t: int, rtol: float = RANK_RTOL) -> int:
    """Rank of the degree-``t`` evaluation matrix (dimension of ``A_t``)."""
    X = _as_pointset(X)
    if t < 0:
        raise ValueError("t must be nonnegative")
    return _rank(X.basis(t).evaluate(X.points), rtol)


def hilbert_table(X, tmax: int) -> list[int]:
    return [hilbert_function(X, t) for t in range(tmax + 1)]


def interpolation_degree(X) -> int:
    """Smallest ``t`` with ``HF(t) = k``."""
    X = _as_pointset(X)
    for t in range(X.k):
        if hilbert_function(X, t) == X.k:
            return t
    # the Hilbert function reaches k by t = k - 1 in exact arithmetic
    return X.k - 1


def _times_coordinate(coeffs: np.ndarray, n: int, t_from: int, j: int) -> np.ndarray:
    """Multiply a Chebyshev-product expansion by the rescaled coordinate ``u_j``.

    Uses ``u T_a(u) = (T_{a+1}(u) + T_{|a-1|}(u)) / 2``.
    """
    src = PolyBasis(n, t_from, CHEBYSHEV).exponents
    idx = monomial_index(n, t_from + 1)
    out = np.zeros(basis_size(n, t_from + 1))
    for c, alpha in zip(coeffs, src):
        if c == 0.0:
            continue
        a = alpha[j]
        up = list(alpha)
        up[j] = a + 1
        if a == 0:
            out[idx[tuple(up)]] += c
        else:
            dn = list(alpha)
            dn[j] = a - 1
            out[idx[tuple(up)]] += 0.5 * c
            out[idx[tuple(dn)]] += 0.5 * c
    return out


@dataclass(frozen=True)
class Generators:
    degrees: dict[int, int]
    polynomials: tuple[Polynomial, ...]

    @property
    def max_degree(self) -> int:
        return max(self.degrees) if self.degrees else 0

    @property
    def count(self) -> int:
        return len(self.polynomials)

    def monomial_coeffs(self) -> list[np.ndarray]:
        """Monomial coefficients (ambient coordinates), each normalized to unit norm."""
        out = []
        for p in self.polynomials:
            c = p.to_monomial().coeffs
            out.append(c / np.linalg.norm(c))
        return out


def generator_degrees(X) -> Generators:
    """Degrees and representatives of a minimal generating set of ``I(X)``.

    In each degree ``t`` the kernel of the evaluation matrix is compared with
    the span of ``f`` and ``u_j f`` for ``f`` in the degree ``t-1`` kernel (the
    affine picture of multiplying by the homogenizing variables). A complement
    of that span inside the kernel gives the new generators.
    """
    X = _as_pointset(X)
    n = X.n
    alpha = interpolation_degree(X) + 1
    degrees: dict[int, int] = {}
    polys: list[Polynomial] = []
    prev_kernel = np.zeros((1, 0))  # degree-0 kernel is trivial
    for t in range(1, alpha + 1):
        basis = X.basis(t)
        Nt = _null_space(basis.evaluate(X.points))
        T_prev = basis_size(n, t - 1)
        T = basis.size
        spans = []
        for col in prev_kernel.T:
            emb = np.zeros(T)
            emb[:T_prev] = col
            spans.append(emb)
            for j in range(n):
                spans.append(_times_coordinate(col, n, t - 1, j))
        if spans:
            W = np.stack(spans, axis=1)
            # express W inside the kernel, orthonormalize
            Wk = Nt.T @ W
            U, s, _ = np.linalg.svd(Wk, full_matrices=True)
            r = int(np.sum(s > RANK_RTOL * max(s[0], 1e-300))) if s.size else 0
            new = Nt @ U[:, r:]
        else:
            new = Nt
        if new.shape[1] > 0:
            degrees[t] = new.shape[1]
            for col in new.T:
                polys.append(Polynomial(basis, col / np.linalg.norm(col)))
        prev_kernel = Nt
    return Generators(degrees, tuple(polys))


def singular_degree(X) -> int:
    """Least degree of a nonzero polynomial singular at every point of ``X``.

    The value-and-gradient conditions become extremely ill-conditioned as
    the degree grows (Hermite interpolation at scattered nodes), so floating
    point ranks are unreliable here. The points are binary floating-point
    numbers, hence rationals, and the rank is computed exactly modulo a
    large prime instead.
    """
    X = _as_pointset(X)
    ell = 1
    while True:
        T = basis_size(X.n, ell)
        if (X.n + 1) * X.k < T or _modular_rank(_singular_rows(X, ell)) < T:
            return ell
        ell += 1


_PRIME = (1 << 61) - 1


def _to_field(v: float) -> int:
    num, den = float(v).as_integer_ratio()
    return (num % _PRIME) * pow(den, -1, _PRIME) % _PRIME


def _singular_rows(X: PointSet, ell: int) -> list[list[int]]:
    """Value and gradient conditions on monomials of degree ``<= ell``, reduced mod the prime."""
    E = PolyBasis(X.n, ell).exponents
    rows = []
    for point in X.points:
        coords = [_to_field(v) for v in point]
        powers = [[pow(c, a, _PRIME) for a in range(ell + 1)] for c in coords]
        vals = []
        for alpha in E:
            acc = 1
            for j, a in enumerate(alpha):
                acc = acc * powers[j][a] % _PRIME
            vals.append(acc)
        rows.append(vals)
        for j in range(X.n):
            grad = []
            for alpha in E:
                a = int(alpha[j])
                if a == 0:
                    grad.append(0)
                    continue
                acc = a
                for i, b in enumerate(alpha):
                    acc = acc * powers[i][b - 1 if i == j else b] % _PRIME
                grad.append(acc)
            rows.append(grad)
    return rows


def _modular_rank(rows: list[list[int]]) -> int:
    rows = [list(r) for r in rows]
    if not rows:
        return 0
    ncol = len(rows[0])
    rank = 0
    for col in range(ncol):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col]), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        inv = pow(rows[rank][col], -1, _PRIME)
        prow = [v * inv % _PRIME for v in rows[rank]]
        rows[rank] = prow
        for r in range(len(rows)):
            if r != rank and rows[r][col]:
                f = rows[r][col]
                rows[r] = [(a - f * b) % _PRIME for a, b in zip(rows[r], prow)]
        rank += 1
        if rank == len(rows):
            break
    return rank


def generic_bounds(n: int, k: int) -> tuple[int, int]:
    """``(upper, lower)`` bounds on the uniqueness degree of ``k`` generic points."""
    if n < 1 or k < 1:
        raise ValueError("need n >= 1 and k >= 1")
    e = 0
    while math.comb(n + e, e) < k:
        e += 1
    ell = 0
    while k * (n + 1) > math.comb(n + ell, n):
        ell += 1
    return 2 * (e + 1), ell


@dataclass(frozen=True)
class IdealProfile:
    """Summary of the algebraic invariants of a point set."""

    hilbert: tuple[int, ...]
    interpolation_degree: int
    generators: Generators
    singular_degree: int
    n: int
    k: int

    @property
    def regularity(self) -> int:
        return self.interpolation_degree + 1

    @property
    def generator_degree(self) -> int:
        return self.generators.max_degree

    @property
    def safe_degree(self) -> int:
        return max(2 * self.generator_degree, self.interpolation_degree + 1)

    @property
    def stated_degree(self) -> int:
        return max(2 * self.generator_degree, self.interpolation_degree)

    def to_json(self) -> dict:
        upper, lower = generic_bounds(self.n, self.k)
        return {
            "n": self.n,
            "k": self.k,
            "hilbert_function": list(self.hilbert),
            "interpolation_degree": self.interpolation_degree,
            "regularity": self.regularity,
            "generator_degree": self.generator_degree,
            "generator_degrees": {str(t): c for t, c in sorted(self.generators.degrees.items())},
            "generators": [[float(v) for v in c] for c in self.generators.monomial_coeffs()],
            "singular_degree": self.singular_degree,
            "safe_degree": self.safe_degree,
            "stated_degree": self.stated_degree,
            "generic_bounds": {"upper": upper, "lower": lower},
        }


def analyze(X) -> IdealProfile:
    X = _as_pointset(X)
    i = interpolation_degree(X)
    gens = generator_degrees(X)
    hf = tuple(hilbert_table(X, i + 1))
    return IdealProfile(hf, i, gens, singular_degree(X), X.n, X.k)


def safe_degree(X) -> int:
    """Moment degree certified to give unique recovery on ``X``: ``max(2 g, i + 1)``."""
    X = _as_pointset(X)
    return max(2 * generator_degrees(X).max_degree, interpolation_degree(X) + 1)
