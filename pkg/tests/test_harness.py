import numpy as np
import pytest

from spikesolve import harness as H


def test_random_measure_contract():
    mu = H.random_measure(2, 5, seed=7, index=3)
    assert mu.k == 5 and mu.total_variation == pytest.approx(1.0)
    np.testing.assert_allclose(mu.weights, 0.2)
    assert np.all((mu.points >= -1) & (mu.points <= 1))
    again = H.random_measure(2, 5, seed=7, index=3)
    assert np.array_equal(mu.points, again.points)
    assert not np.array_equal(mu.points, H.random_measure(2, 5, seed=7, index=4).points)


def test_single_atom_has_unit_weight():
    mu = H.random_measure(1, 1, seed=0)
    assert mu.weights.tolist() == [1.0]


def test_plan_validation_and_round_trip():
    with pytest.raises(ValueError):
        H.ExperimentPlan("heatmap")
    with pytest.raises(ValueError):
        H.ExperimentPlan(H.EXACT_HEATMAP, k_range=(0, 1))
    plan = H.ExperimentPlan(H.NOISY_SWEEP, n=2, noise=(1e-3,), seed=4)
    assert H.ExperimentPlan.from_json(plan.to_json()) == plan


def test_noise_sets_delta_to_realized_norm():
    from spikesolve.polybasis import PolyBasis

    mu = H.random_measure(1, 2, seed=1)
    basis = PolyBasis(1, 4)
    data = H.noisy_moments(mu, basis, 1e-3, H.instance_rng(1, 0))
    assert data.delta == pytest.approx(np.linalg.norm(data.y - mu.moments(basis)))


def test_recovery_rate_single_atom_is_perfect():
    plan = H.ExperimentPlan(H.EXACT_HEATMAP, n=1, k_range=(1,), d_range=(1, 2), trials=3, seed=2)
    table, records = H.recovery_rate(plan)
    np.testing.assert_allclose(table, [[1.0, 1.0]])
    assert len(records) == 6


def test_failed_trials_are_recorded(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(H, "recover_exact", boom)
    plan = H.ExperimentPlan(H.EXACT_HEATMAP, n=1, k_range=(2,), d_range=(2,), trials=2)
    table, records = H.recovery_rate(plan)
    assert table.tolist() == [[0.0]]
    assert all(r["stage"] == "error" and "exploded" in r["error"] for r in records)


def test_run_plan_writes_identical_files(tmp_path):
    plan = H.ExperimentPlan(H.EXACT_HEATMAP, n=1, k_range=(1, 2), d_range=(1, 2), trials=2, seed=7)
    a = H.run_plan(plan, tmp_path / "a")
    b = H.run_plan(plan, tmp_path / "b")
    assert [p.name for p in a] == ["exact_heatmap_n1.csv", "exact_heatmap_n1.jsonl"]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
    assert a[0].read_text().splitlines()[0] == "k\\d,1,2"


def test_parallel_run_matches_serial(tmp_path, monkeypatch):
    plan = H.ExperimentPlan(H.EXACT_HEATMAP, n=1, k_range=(1, 2), d_range=(2,), trials=2, seed=3)
    serial = H.run_plan(plan, tmp_path / "s")
    monkeypatch.setenv(H.THREADS_ENV, "2")
    parallel = H.run_plan(plan, tmp_path / "p")
    for ps, pp in zip(serial, parallel):
        assert ps.read_bytes() == pp.read_bytes()


def test_thread_count_parsing(monkeypatch):
    monkeypatch.setenv(H.THREADS_ENV, "junk")
    assert H.thread_count() == 1
    monkeypatch.setenv(H.THREADS_ENV, "3")
    assert H.thread_count() == 3
