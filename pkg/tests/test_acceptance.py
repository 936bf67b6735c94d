"""End-to-end acceptance checks, one test per criterion."""

import math
import time

import numpy as np
import pytest

from spikesolve import blasso, certify, harness
from spikesolve.measure import MomentData, match_atoms
from spikesolve.pointalg import generic_bounds, hilbert_table, singular_degree
from spikesolve.polybasis import ORTHONORMAL, PolyBasis
from spikesolve.recovery import recover_exact
from spikesolve.summarize import SummarySpec, summarize

pytestmark = pytest.mark.slow


def _gauss_legendre_nodes(q):
    # Golub-Welsch: eigenvalues of the Jacobi matrix of the Legendre recurrence
    k = np.arange(1, q)
    beta = k / np.sqrt(4.0 * k * k - 1.0)
    return np.linalg.eigvalsh(np.diag(beta, 1) + np.diag(beta, -1))


def test_criterion_1_helper_polynomials(criterion):
    t0 = time.perf_counter()
    x = np.linspace(-1.0, 1.0, 10000)
    worst = -math.inf
    for m in range(2, 41, 2):
        h = certify.helper_eval(m, x)
        z = np.abs(np.arcsin(x))
        viol = [
            np.abs(h).max() - 1.0,
            (np.abs(h[z >= 2 / m]) - 0.75).max(),
            (np.abs(h[z <= 2 / m]) - (1 - m * m * x[z <= 2 / m] ** 2 / 12)).max(),
            ((1 - math.pi ** 2 * m * m * x * x / 2) - h).max(),
            np.abs(h - certify.helper_eval(m, -x)).max(),
        ]
        worst = max(worst, max(viol))
        assert max(certify.helper_inequalities(m, x).values()) == pytest.approx(max(viol), abs=1e-15)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 5.0
    criterion("criterion 1", ok, f"max violation {worst:.2e}, {elapsed:.2f}s")
    assert ok


def _exact_trials(n, k, d, box, trials, seed, tol_pos, tol_w):
    good = 0
    for i in range(trials):
        mu = harness.random_measure(n, k, seed, i, box)
        data = MomentData.of_measure(mu, PolyBasis(n, 2 * d, ORTHONORMAL, box))
        rep = recover_exact(data, d)
        if rep.measure.k != k:
            continue
        pos, wer = match_atoms(rep.measure, mu)
        good += bool(rep.success and pos.max() <= tol_pos and wer.max() <= tol_w)
    return good


def test_criterion_2_exact_recovery_interval(criterion):
    t0 = time.perf_counter()
    good = _exact_trials(1, 4, 4, ((-1.0, 1.0),), 20, 2, 1e-3, 1e-3)
    elapsed = time.perf_counter() - t0
    ok = good >= 19 and elapsed < 120
    criterion("criterion 2", ok, f"{good}/20 recovered, {elapsed:.1f}s")
    assert ok


def test_criterion_3_exact_recovery_square(criterion):
    t0 = time.perf_counter()
    good = _exact_trials(2, 4, 6, ((0.0, 1.0), (0.0, 1.0)), 10, 3, 5e-3, math.inf)
    elapsed = time.perf_counter() - t0
    ok = good >= 9 and elapsed < 600
    criterion("criterion 3", ok, f"{good}/10 recovered, {elapsed:.1f}s")
    assert ok


def test_criterion_4_uniqueness_algebra(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    mismatches = 0
    for _ in range(50):
        n = int(rng.integers(1, 4))
        k = int(rng.integers(1, 16))
        X = rng.uniform(-1.0, 1.0, (k, n))
        mismatches += hilbert_table(X, k) != [min(math.comb(n + t, t), k) for t in range(k + 1)]
    for k in range(1, 16):
        mismatches += generic_bounds(1, k) != (2 * k, 2 * k - 1)
        mismatches += singular_degree(rng.uniform(-1.0, 1.0, (k, 1))) != 2 * k
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60
    criterion("criterion 4", ok, f"{mismatches} mismatches, {elapsed:.1f}s")
    assert ok


def test_criterion_5_sharpness(criterion):
    failed = 0
    for i in range(10):
        mu = harness.random_measure(2, 3, 5, i)
        rep = recover_exact(MomentData.of_measure(mu, PolyBasis(2, 2, ORTHONORMAL)), 1)
        failed += not rep.success
    ok = failed >= 9
    criterion("criterion 5", ok, f"{failed}/10 reported failed")
    assert ok


@pytest.fixture(scope="module")
def noisy_runs():
    """Ten instances with n=1, k=3, moments of degree 8 and delta = 1e-4."""
    t0 = time.perf_counter()
    runs = []
    for i in range(10):
        mu = harness.random_measure(1, 3, 6, i)
        basis = PolyBasis(1, 8, ORTHONORMAL)
        g = harness.instance_rng(6, i, 1).standard_normal(basis.size)
        eps = 1e-4 * g / np.linalg.norm(g)
        data = MomentData(basis, mu.moments(basis) + eps, 1e-4, "noisy")
        rep = blasso.recover_noisy(data, s=8, truth=mu)
        runs.append((mu, data, rep, rep.extra["witness"]))
    return runs, time.perf_counter() - t0


def test_criterion_6_duality_gap(criterion, noisy_runs):
    runs, elapsed = noisy_runs
    gaps, feasible = [], 0
    for mu, data, rep, _ in runs:
        alpha = rep.extra["alpha"]
        gaps.append(abs(alpha - rep.measure.total_variation) / (1 + alpha) if rep.measure.k else math.inf)
        feasible += bool(rep.measure.k and rep.residual <= data.delta + 1e-6)
    ok = max(gaps) <= 1e-3 and feasible == len(runs) and elapsed < 300
    criterion("criterion 6", ok, f"max relative gap {max(gaps):.2e}, {feasible}/10 feasible, {elapsed:.1f}s")
    assert ok


def test_criterion_7_hierarchy_monotonicity(criterion):
    worst = -math.inf
    for i in range(20):
        mu = harness.random_measure(2, 3, 8, i)
        basis = PolyBasis(2, 2, ORTHONORMAL)
        data = harness.noisy_moments(mu, basis, 1e-2, harness.instance_rng(8, i, 1))
        dom = blasso.SemialgebraicDomain.from_box(data.box)
        alphas = [sol.alpha for sol in blasso.solve_hierarchy(data, data.delta, dom, [2, 4, 6])]
        worst = max(worst, alphas[0] - alphas[1], alphas[1] - alphas[2])
    ok = worst <= 1e-6
    criterion("criterion 7", ok, f"largest decrease {worst:.2e}")
    assert ok


def test_criterion_8_approximation_bounds(criterion, noisy_runs):
    runs, _ = noisy_runs
    bad = []
    for idx, (mu, data, rep, w) in enumerate(runs):
        d = rep.diagnostics
        delta = data.delta
        P_gap = abs(w(rep.measure.points) @ rep.measure.weights - w(mu.points) @ mu.weights)
        checks = (
            w.grid_verified,
            d.negative_mass <= 2 * delta + 1e-6,
            d.far_mass <= 2 * delta / w.C_b + 1e-6,
            P_gap <= 2 * delta + 1e-6,
        )
        if not all(checks):
            bad.append(idx)
    # localization radius shrinks with the noise level on one instance
    mu = harness.random_measure(1, 3, 6, 0)
    basis = PolyBasis(1, 8, ORTHONORMAL)
    radii = []
    for level, sigma in enumerate((1e-2, 1e-4, 1e-6)):
        data = harness.noisy_moments(mu, basis, sigma, harness.instance_rng(6, 0, 10 + level))
        rep = blasso.recover_noisy(data)
        radii.append(harness.localization_error(mu, rep.measure))
    shrinking = all(r is not None for r in radii) and radii[0] > radii[1] > radii[2]
    ok = not bad and shrinking
    criterion("criterion 8", ok, f"violating trials {bad}, localization radii {[f'{r:.1e}' for r in radii if r is not None]}")
    assert ok


def test_criterion_9_summaries_are_quadrature_nodes(criterion):
    t0 = time.perf_counter()
    errs = []
    for d in (2, 6, 10):
        rep = summarize(SummarySpec("uniform", d))
        nodes = np.sort(rep.measure.points[:, 0])
        ref = _gauss_legendre_nodes(d)
        errs.append(np.abs(nodes - ref).max() if nodes.size == d else math.inf)
    rep = summarize(SummarySpec("cheb2", 5))
    nodes = np.sort(rep.measure.points[:, 0])
    ref = np.sort(np.cos((2 * np.arange(1, 6) - 1) * np.pi / 10))
    errs.append(np.abs(nodes - ref).max() if nodes.size == 5 else math.inf)
    elapsed = time.perf_counter() - t0
    ok = max(errs) <= 1e-2 and elapsed < 300
    criterion("criterion 9", ok, f"max node error {max(errs):.1e}, {elapsed:.1f}s")
    assert ok


def test_criterion_10_reproducible_experiments(criterion, tmp_path):
    first = harness.run_plans(harness.desk_plans(7), tmp_path / "one")
    second = harness.run_plans(harness.desk_plans(7), tmp_path / "two")
    same = [a.name == b.name and a.read_bytes() == b.read_bytes() for a, b in zip(first, second)]
    ok = len(first) == len(second) == 4 and all(same)
    criterion("criterion 10", ok, f"{sum(same)}/{len(first)} files byte-identical")
    assert ok
