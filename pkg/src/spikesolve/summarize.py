"""Summarization of general measures by a few atoms from exact moments.

A ``(delta, k)``-summary of a positive measure ``mu`` is a positive measure
with at most ``k`` atoms whose moments are within ``delta`` of those of
``mu``. The procedure solves the noisy recovery problem with ``y`` the exact
moments of ``mu`` and keeps the ``k`` heaviest atoms of the result.

For densities on an interval the extraction polynomial is normalized on its
top-degree block, so that its zeros are those of the degree-``d`` orthogonal
polynomial of the moment functional (Gauss nodes). The weights of the
atoms are then fitted to the moments of degree at most ``d``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import conic
from .blasso import SemialgebraicDomain, recover_noisy
from .measure import DiscreteMeasure, MomentData
from .polybasis import ORTHONORMAL, PolyBasis, as_box, box_grid, box_moments
from .recovery import FLAG_NON_DISCRETE, STAGE_EXTRACT, STAGE_SOLVE, ExtractOptions, RecoveryReport, fit_weights

DENSITIES = ("uniform", "cheb1", "cheb2", "user")
DEFAULT_DELTA_REL = 1e-6
FLAG_TRUNCATED = "truncated"


@dataclass(frozen=True)
class SummarySpec:
    """What to summarize and how.

    Parameters
    ----------
    density : str
        ``"uniform"`` (Lebesgue on the box), ``"cheb1"`` (``sqrt(1-x^2)``),
        ``"cheb2"`` (``1/sqrt(1-x^2)``) or ``"user"``.
    d : int
        Half-degree; moments up to degree ``2 d`` are used.
    k : int, optional
        Target atom count, default ``d ** n``.
    delta : float, optional
        Moment tolerance, default ``1e-6 ||y||_2``.
    n : int
        Dimension for the built-in densities.
    box : sequence, optional
        Box of the built-in densities, default ``[-1, 1]^n``.
    moments : MomentData, optional
        Moment vector for ``density="user"``; its degree must be at least ``2 d``.
    """

    density: str = "uniform"
    d: int = 2
    k: int | None = None
    delta: float | None = None
    n: int = 1
    box: tuple | None = None
    moments: MomentData | None = None

    def __post_init__(self):
        if self.density not in DENSITIES:
            raise ValueError(f"unknown density {self.density!r}; expected one of {DENSITIES}")
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be at least 1")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.density == "user" and self.moments is None:
            raise ValueError("a user density needs a moment vector")

    @property
    def target_atoms(self) -> int:
        return self.k if self.k is not None else self.d ** self.dimension

    @property
    def dimension(self) -> int:
        return self.moments.n if self.density == "user" else self.n

    def moment_data(self) -> MomentData:
        """Exact moments of degree ``2 d`` in the orthonormal basis of the box."""
        if self.density == "user":
            data = self.moments
            if data.degree < 2 * self.d:
                raise ValueError(f"user moments have degree {data.degree}, need {2 * self.d}")
            basis = data.basis.with_degree(2 * self.d)
            return MomentData(basis, data.y[: basis.size], 0.0, "density")
        box = as_box(self.box, self.n)
        basis = PolyBasis(self.n, 2 * self.d, ORTHONORMAL, box)
        y = box_moments(self.n, 2 * self.d, box, self.density, ORTHONORMAL)
        return MomentData(basis, y, 0.0, "density")

    def resolved_delta(self, y: np.ndarray) -> float:
        return self.delta if self.delta is not None else DEFAULT_DELTA_REL * float(np.linalg.norm(y))


def basis_sup(basis: PolyBasis, per_axis: int = 200) -> float:
    """Grid estimate of ``max_x ||phi(x)||_2`` over the box."""
    from .certify import grid_per_axis

    Z = box_grid(basis.box, grid_per_axis(basis.n, per_axis))
    return float(np.linalg.norm(basis.evaluate(Z), axis=1).max())


def summarize(
    spec: SummarySpec,
    domain: SemialgebraicDomain | None = None,
    opts: ExtractOptions | None = None,
    solver: conic.SolverOptions | None = None,
) -> RecoveryReport:
    """Compute a ``(delta, k)``-summary.

    Returns
    -------
    RecoveryReport
        ``measure`` is the truncated summary. ``success`` means that the
        extraction polynomial had isolated zeros; the moment residuals of
        the full and the truncated measure are in ``extra`` together with
        the bound ``delta + dropped mass * max ||phi||`` on the latter.
    """
    data = spec.moment_data()
    delta = spec.resolved_delta(data.y)
    domain = domain or SemialgebraicDomain.from_box(data.box)
    noisy = MomentData(data.basis, data.y, delta, "noisy")
    rep = recover_noisy(noisy, delta, domain, d=spec.d, solver=solver, opts=opts, normalization="leading", refit=False)
    full = rep.measure
    if full.k:
        # d nodes cannot match all moments of degree 2 d; weigh them on degree <= d
        low = data.basis.with_degree(spec.d)
        pts, wts, _ = fit_weights(full.points, MomentData(low, data.y[: low.size], 0.0, "density"), w_min=0.0)
        full = DiscreteMeasure(pts, wts).sorted()
    k = spec.target_atoms
    summary = full.largest(k)
    y = np.asarray(data.y)
    res_full = float(np.linalg.norm(full.moments(data.basis) - y)) if full.k else float(np.linalg.norm(y))
    res_trunc = float(np.linalg.norm(summary.moments(data.basis) - y)) if summary.k else float(np.linalg.norm(y))
    dropped = float(full.weights.sum() - summary.weights.sum()) if full.k else 0.0
    rep.extra.update(
        density=spec.density,
        d=spec.d,
        k=k,
        residual_full=res_full,
        residual_truncated=res_trunc,
        dropped_mass=dropped,
        truncation_bound=delta + dropped * basis_sup(data.basis),
        full_measure=full.to_json(),
    )
    if full.k > summary.k:
        rep.flags.append(FLAG_TRUNCATED)
    rep.measure = summary
    rep.residual = res_trunc
    discrete = FLAG_NON_DISCRETE not in rep.flags and rep.stage not in (STAGE_SOLVE, STAGE_EXTRACT)
    if discrete and summary.k:
        rep.success, rep.stage, rep.message = True, None, "ok"
    elif not discrete and FLAG_NON_DISCRETE not in rep.flags and rep.stage == STAGE_EXTRACT:
        rep.flags.append(FLAG_NON_DISCRETE)
    return rep
