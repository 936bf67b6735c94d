"""Reproducible random-instance experiments.

Every random draw comes from ``numpy.random.default_rng`` seeded with a key
that starts with the master seed, so a plan and its seed fully determine
every instance. Trials run independently (in worker processes when
``SPIKESOLVE_THREADS`` is above one) and results are sorted before they are
written, so the output files do not depend on scheduling.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .measure import DiscreteMeasure, MomentData
from .polybasis import ORTHONORMAL, PolyBasis, as_box, box_grid
from .recovery import default_grid, recover_exact

log = logging.getLogger(__name__)

EXACT_HEATMAP = "exact-heatmap"
NOISY_SWEEP = "noisy-sweep"
SUMMARY_GALLERY = "summary-gallery"
KINDS = (EXACT_HEATMAP, NOISY_SWEEP, SUMMARY_GALLERY)
THETA_SUCCESS = 1e-3
THREADS_ENV = "SPIKESOLVE_THREADS"


@dataclass(frozen=True)
class ExperimentPlan:
    """One sweep.

    Parameters
    ----------
    kind : str
        ``"exact-heatmap"``, ``"noisy-sweep"`` or ``"summary-gallery"``.
    n : int
        Dimension; points are drawn in ``box`` (default ``[-1, 1]^n``).
    k_range, d_range : tuple of int
        Atom counts and half-degrees. The noisy sweep and the gallery use
        only the first atom count and every half-degree.
    trials : int
        Trials per cell.
    noise : tuple of float
        Noise standard deviations for the noisy sweep.
    seed : int
        Master seed.
    theta : float
        Success threshold relative to the grid maximum of ``H*``.
    """

    kind: str
    n: int = 1
    k_range: tuple[int, ...] = (1, 2, 3, 4)
    d_range: tuple[int, ...] = (1, 2, 3, 4)
    trials: int = 20
    noise: tuple[float, ...] = (1e-2, 1e-4)
    seed: int = 0
    theta: float = THETA_SUCCESS
    box: tuple | None = None
    density: str = "uniform"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 1 or self.trials < 1:
            raise ValueError("n and trials must be positive")
        if not self.k_range or min(self.k_range) < 1:
            raise ValueError("atom counts must be positive")
        if not self.d_range or min(self.d_range) < 1:
            raise ValueError("half-degrees must be positive")
        if self.kind == NOISY_SWEEP and (not self.noise or min(self.noise) < 0):
            raise ValueError("noise levels must be nonnegative")
        object.__setattr__(self, "k_range", tuple(int(k) for k in self.k_range))
        object.__setattr__(self, "d_range", tuple(int(d) for d in self.d_range))
        object.__setattr__(self, "noise", tuple(float(e) for e in self.noise))
        object.__setattr__(self, "box", as_box(self.box, self.n))

    @property
    def name(self) -> str:
        return self.kind.replace("-", "_")

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["box"] = [list(b) for b in self.box]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentPlan":
        doc = dict(doc)
        for key in ("k_range", "d_range", "noise"):
            if key in doc:
                doc[key] = tuple(doc[key])
        if doc.get("box") is not None:
            doc["box"] = tuple(tuple(b) for b in doc["box"])
        return cls(**doc)


def desk_plans(seed: int = 7) -> list[ExperimentPlan]:
    """Small plans of every kind that finish in a few minutes on a laptop."""
    return [
        ExperimentPlan(EXACT_HEATMAP, n=1, k_range=(1, 2, 3), d_range=(1, 2, 3, 4), trials=4, seed=seed),
        ExperimentPlan(NOISY_SWEEP, n=1, k_range=(2,), d_range=(3,), trials=2, noise=(1e-2, 1e-4), seed=seed),
        ExperimentPlan(SUMMARY_GALLERY, n=1, k_range=(1,), d_range=(2, 3, 4), trials=1, seed=seed),
    ]


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------

def instance_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([int(seed)] + [int(k) for k in keys])


def random_measure(n: int, k: int, seed: int, index: int = 0, box=None) -> DiscreteMeasure:
    """``k`` uniform points in the box with weights ``1/k``.

    The stream is keyed by ``(seed, index)``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    box = as_box(box, n)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    rng = instance_rng(seed, index)
    pts = lo + (hi - lo) * rng.random((k, n))
    return DiscreteMeasure(pts, np.full(k, 1.0 / k))


def noisy_moments(mu: DiscreteMeasure, basis: PolyBasis, sigma: float, rng: np.random.Generator) -> MomentData:
    """Moments plus ``N(0, sigma^2)`` noise; ``delta`` is the realized noise norm."""
    y = mu.moments(basis)
    eps = sigma * rng.standard_normal(basis.size)
    delta = float(np.linalg.norm(eps))
    return MomentData(basis, y + eps, delta, "noisy" if delta > 0 else "exact")


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring %s=%r", THREADS_ENV, raw)
        return 1


def _run_all(fn, jobs: list) -> list:
    workers = min(thread_count(), len(jobs))
    if workers <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def localization_error(truth: DiscreteMeasure, est: DiscreteMeasure) -> float | None:
    """Largest distance from a true atom to the nearest recovered atom."""
    if est.k == 0:
        return None
    diff = truth.points[:, None, :] - est.points[None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).min(axis=1).max())


# ---------------------------------------------------------------------------
# exact heatmap
# ---------------------------------------------------------------------------

def support_score(rep, truth: DiscreteMeasure, box, theta: float) -> float:
    """Fraction of true atoms ``x`` with ``H*(x) <= theta * max_grid H*``."""
    if rep.H is None:
        return 0.0
    if rep.extraction is not None:
        hmax = rep.extraction.grid_max
    else:
        Z = box_grid(box, default_grid(truth.n))
        hmax = float(rep.H(Z).max())
    if not hmax > 0:
        return 0.0
    return float(np.mean(rep.H(truth.points) <= theta * hmax))


def _exact_trial(job) -> dict:
    plan, k, d, trial = job
    rec = {"k": k, "d": d, "trial": trial}
    try:
        mu = random_measure(plan.n, k, plan.seed, trial, plan.box)
        data = MomentData.of_measure(mu, PolyBasis(plan.n, 2 * d, ORTHONORMAL, plan.box))
        rep = recover_exact(data, d)
        rec.update(
            score=support_score(rep, mu, plan.box, plan.theta),
            success=rep.success,
            stage=rep.stage,
            localization_error=localization_error(mu, rep.measure),
        )
    except Exception as exc:  # a failed trial is data
        rec.update(score=0.0, success=False, stage="error", error=f"{type(exc).__name__}: {exc}")
    return rec


def recovery_rate(plan: ExperimentPlan) -> tuple[np.ndarray, list[dict]]:
    """Mean support score per ``(k, d)`` cell, rows ``k`` and columns ``d``."""
    jobs = [(plan, k, d, t) for k in plan.k_range for d in plan.d_range for t in range(plan.trials)]
    records = sorted(_run_all(_exact_trial, jobs), key=lambda r: (r["k"], r["d"], r["trial"]))
    table = np.zeros((len(plan.k_range), len(plan.d_range)))
    for i, k in enumerate(plan.k_range):
        for j, d in enumerate(plan.d_range):
            table[i, j] = np.mean([r["score"] for r in records if r["k"] == k and r["d"] == d])
    return table, records


# ---------------------------------------------------------------------------
# noisy sweep
# ---------------------------------------------------------------------------

def _noisy_trial(job) -> dict:
    from .blasso import recover_noisy

    plan, level, sigma, d, trial = job
    k = plan.k_range[0]
    rec = {"noise": sigma, "d": d, "trial": trial, "k": k}
    try:
        mu = random_measure(plan.n, k, plan.seed, trial, plan.box)
        basis = PolyBasis(plan.n, 2 * d, ORTHONORMAL, plan.box)
        data = noisy_moments(mu, basis, sigma, instance_rng(plan.seed, trial, 1 + level))
        rep = recover_noisy(data, truth=mu)
        rec.update(
            delta=data.delta,
            success=rep.success,
            stage=rep.stage,
            flags=list(rep.flags),
            localization_error=localization_error(mu, rep.measure),
            alpha=rep.extra.get("alpha"),
            total_variation=rep.measure.total_variation,
            residual=rep.residual,
            measure=rep.measure.to_json(),
            diagnostics=rep.diagnostics.to_json() if rep.diagnostics is not None else None,
        )
    except Exception as exc:
        rec.update(success=False, stage="error", error=f"{type(exc).__name__}: {exc}")
    return rec


def noisy_sweep(plan: ExperimentPlan) -> list[dict]:
    """One record per noise level, half-degree and trial."""
    jobs = [
        (plan, i, sigma, d, t)
        for i, sigma in enumerate(plan.noise)
        for d in plan.d_range
        for t in range(plan.trials)
    ]
    return sorted(_run_all(_noisy_trial, jobs), key=lambda r: (-r["noise"], r["d"], r["trial"]))


# ---------------------------------------------------------------------------
# summary gallery
# ---------------------------------------------------------------------------

def _summary_trial(job) -> dict:
    from .summarize import SummarySpec, summarize

    plan, d = job
    rec = {"density": plan.density, "n": plan.n, "d": d}
    try:
        rep = summarize(SummarySpec(plan.density, d, n=plan.n, box=plan.box))
        rec.update(
            success=rep.success,
            stage=rep.stage,
            flags=list(rep.flags),
            measure=rep.measure.to_json(),
            residual=rep.residual,
        )
    except Exception as exc:
        rec.update(success=False, stage="error", error=f"{type(exc).__name__}: {exc}")
    return rec


def summary_gallery(plan: ExperimentPlan) -> list[dict]:
    return sorted(_run_all(_summary_trial, [(plan, d) for d in plan.d_range]), key=lambda r: r["d"])


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def run_plan(plan: ExperimentPlan, outdir) -> list[Path]:
    """Run a plan and write its CSV/JSONL files; returns the paths written."""
    from .fileio import matrix_csv, write_jsonl

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if plan.kind == EXACT_HEATMAP:
        table, records = recovery_rate(plan)
        csv_path = out / f"{plan.name}_n{plan.n}.csv"
        csv_path.write_text(matrix_csv("k\\d", list(plan.k_range), list(plan.d_range), table))
        written.append(csv_path)
    elif plan.kind == NOISY_SWEEP:
        records = noisy_sweep(plan)
    else:
        records = summary_gallery(plan)
    jsonl = out / f"{plan.name}_n{plan.n}.jsonl"
    write_jsonl(jsonl, records)
    written.append(jsonl)
    return written


def run_plans(plans: list[ExperimentPlan], outdir) -> list[Path]:
    paths = []
    for plan in plans:
        log.info("running %s (n=%d)", plan.kind, plan.n)
        paths.extend(run_plan(plan, outdir))
    return paths
