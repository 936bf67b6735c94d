"""Atomic measures and moment data."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .polybasis import PolyBasis, as_box

PROVENANCE = ("exact", "noisy", "density")


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite combination of Dirac masses ``sum_i w_i delta_{x_i}``.

    ``points`` has shape ``(k, n)``; ``weights`` has shape ``(k,)``. Weights
    are allowed to be negative so that signed recovery outputs can be
    diagnosed, but :meth:`check_positive` enforces the usual contract.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if p.ndim == 1:
            p = p.reshape(-1, 1) if w.size != 1 or p.size == 1 else p.reshape(1, -1)
        if p.ndim != 2 or p.shape[0] != w.shape[0]:
            raise ValueError(f"points {p.shape} and weights {w.shape} disagree")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(w))):
            raise ValueError("measure has non-finite entries")
        p.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    @classmethod
    def empty(cls, n: int) -> "DiscreteMeasure":
        return cls(np.zeros((0, n)), np.zeros(0))

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def k(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.k

    @property
    def total_variation(self) -> float:
        return float(np.abs(self.weights).sum())

    @property
    def negative_mass(self) -> float:
        return float(-self.weights[self.weights < 0].sum())

    def moments(self, basis: PolyBasis) -> np.ndarray:
        """``(int phi_i d mu)_i`` for every element of ``basis``."""
        if self.k == 0:
            return np.zeros(basis.size)
        return basis.evaluate(self.points).T @ self.weights

    def check_positive(self) -> None:
        if np.any(self.weights < 0):
            raise ValueError("measure has negative weights")

    def sorted(self) -> "DiscreteMeasure":
        """Atoms in lexicographic point order."""
        if self.k == 0:
            return self
        order = np.lexsort(self.points.T[::-1])
        return DiscreteMeasure(self.points[order], self.weights[order])

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.points, self.weights * factor)

    def largest(self, k: int) -> "DiscreteMeasure":
        """The ``k`` atoms of largest weight; ties broken by lexicographic point order."""
        if self.k <= k:
            return self.sorted()
        keys = [tuple(-self.weights[i:i + 1]) + tuple(self.points[i]) for i in range(self.k)]
        order = sorted(range(self.k), key=lambda i: keys[i])[:k]
        return DiscreteMeasure(self.points[order], self.weights[order]).sorted()

    def min_separation(self) -> float:
        if self.k < 2:
            return float("inf")
        diff = self.points[:, None, :] - self.points[None, :, :]
        dist = np.sqrt((diff ** 2).sum(-1))
        return float(dist[np.triu_indices(self.k, 1)].min())

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "atoms": [
                {"point": [float(v) for v in p], "weight": float(w)}
                for p, w in zip(self.points, self.weights)
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "DiscreteMeasure":
        try:
            n = int(doc["n"])
            atoms = doc["atoms"]
            pts = [list(map(float, a["point"])) for a in atoms]
            wts = [float(a["weight"]) for a in atoms]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed measure document: {exc}") from None
        if n < 1 or any(len(p) != n for p in pts):
            raise ValueError("every atom point must have length n")
        if any(w < 0 for w in wts):
            raise ValueError("measure weights must be nonnegative")
        return cls(np.array(pts, dtype=float).reshape(-1, n), np.array(wts, dtype=float))


def match_atoms(estimate: DiscreteMeasure, truth: DiscreteMeasure) -> tuple[np.ndarray, np.ndarray]:
    """Pair each true atom with its nearest estimated atom.

    Returns per-true-atom position errors and weight errors (``inf`` when the
    estimate is empty). Pairing is greedy on sorted distances and one-to-one.
    """
    kt = truth.k
    if estimate.k == 0:
        return np.full(kt, np.inf), np.full(kt, np.inf)
    diff = truth.points[:, None, :] - estimate.points[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    pos = np.full(kt, np.inf)
    wer = np.full(kt, np.inf)
    used_t, used_e = set(), set()
    for flat in np.argsort(dist, axis=None, kind="stable"):
        i, j = np.unravel_index(flat, dist.shape)
        if i in used_t or j in used_e:
            continue
        used_t.add(i)
        used_e.add(j)
        pos[i] = dist[i, j]
        wer[i] = abs(truth.weights[i] - estimate.weights[j])
    return pos, wer


@dataclass(frozen=True)
class MomentData:
    """Observed moments ``y_i = int phi_i d mu + eps_i`` with ``||eps||_2 <= delta``."""

    basis: PolyBasis
    y: np.ndarray
    delta: float = 0.0
    provenance: str = "exact"
    note: str = field(default="", compare=False)

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        if y.shape[0] != self.basis.size:
            raise ValueError(f"moment vector has length {y.shape[0]}, basis needs {self.basis.size}")
        if not np.all(np.isfinite(y)):
            raise ValueError("moment vector has non-finite entries")
        if self.provenance not in PROVENANCE:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        delta = float(self.delta)
        if delta < 0 or not np.isfinite(delta):
            raise ValueError("delta must be finite and nonnegative")
        if self.provenance == "exact" and delta != 0.0:
            raise ValueError("exact moment data must have delta = 0")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "delta", delta)

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def degree(self) -> int:
        return self.basis.d

    @property
    def box(self):
        return self.basis.box

    @classmethod
    def of_measure(cls, mu: DiscreteMeasure, basis: PolyBasis) -> "MomentData":
        return cls(basis, mu.moments(basis), 0.0, "exact")

    def with_values(self, y, delta: float | None = None, provenance: str | None = None) -> "MomentData":
        return MomentData(
            self.basis,
            y,
            self.delta if delta is None else delta,
            self.provenance if provenance is None else provenance,
        )

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "degree": self.degree,
            "basis": self.basis.kind,
            "box": [[lo, hi] for lo, hi in self.basis.box],
            "values": [float(v) for v in self.y],
            "delta": self.delta,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MomentData":
        try:
            n = int(doc["n"])
            d = int(doc["degree"])
            kind = str(doc["basis"])
            box = as_box(doc.get("box"), n)
            values = [float(v) for v in doc["values"]]
            delta = float(doc.get("delta", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed moment document: {exc}") from None
        basis = PolyBasis(n, d, kind, box)
        prov = "exact" if delta == 0.0 else "noisy"
        return cls(basis, values, delta, prov)
