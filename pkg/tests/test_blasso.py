import numpy as np
import pytest

from spikesolve import blasso as B
from spikesolve.measure import DiscreteMeasure, MomentData
from spikesolve.polybasis import MONOMIAL, ORTHONORMAL, PolyBasis

INTERVAL = B.SemialgebraicDomain.from_box([[-1.0, 1.0]])


def _noisy(mu, degree, sigma, seed, box=None):
    basis = PolyBasis(mu.n, degree, ORTHONORMAL, box)
    rng = np.random.default_rng(seed)
    eps = sigma * rng.standard_normal(basis.size)
    return MomentData(basis, mu.moments(basis) + eps, float(np.linalg.norm(eps)), "noisy")


def test_box_domain_generator_is_one_minus_square():
    (g,) = INTERVAL.generators
    np.testing.assert_allclose(g.coeffs, [1.0, 0.0, -1.0])
    assert INTERVAL.boundedness_residual() == 0.0


def test_box_domain_membership():
    dom = B.SemialgebraicDomain.from_box([[0.0, 1.0], [-2.0, 2.0]])
    assert dom.contains([[0.5, 1.9], [1.2, 0.0]]).tolist() == [True, False]


def test_level_must_cover_data_degree():
    data = MomentData.of_measure(DiscreteMeasure([[0.0]], [1.0]), PolyBasis(1, 4))
    with pytest.raises(ValueError):
        B.assemble_hierarchy_sdp(data, 0.1, INTERVAL, 2)


def test_dirac_at_origin_has_value_one():
    # P = 1 - x^2 is feasible with L(P) = 1, and alpha cannot exceed the mass
    data = MomentData.of_measure(DiscreteMeasure([[0.0]], [1.0]), PolyBasis(1, 2, MONOMIAL))
    (dual,) = B.solve_hierarchy(data, 0.0, INTERVAL, [2])
    assert dual.ok
    assert dual.alpha == pytest.approx(1.0, abs=1e-6)


def test_huge_delta_gives_zero_certificate():
    data = MomentData.of_measure(DiscreteMeasure([[0.0]], [1.0]), PolyBasis(1, 2, MONOMIAL))
    (dual,) = B.solve_hierarchy(data, 100.0, INTERVAL, 2)
    assert abs(dual.alpha) < 1e-6 and np.linalg.norm(dual.a) < 1e-6
    rep = B.extract_measure(dual, data, 100.0)
    assert not rep.success and B.FLAG_ZERO_CERTIFICATE in rep.flags


def test_optimal_moments_lie_on_sphere(rng):
    dual = B.DualSolution(4, rng.normal(size=5), 3.0, 0.0, "optimal", [], [])
    y = rng.normal(size=5)
    L = B.optimal_moments(dual, y, 0.25)
    assert np.linalg.norm(L - y) == pytest.approx(0.25)
    np.testing.assert_array_equal(B.optimal_moments(dual, y, 0.0), y)


def test_refit_matches_closed_form_for_one_atom():
    basis = PolyBasis(1, 3, ORTHONORMAL)
    v = basis.evaluate(np.array([0.4]))
    y = 0.7 * v + np.array([1e-3, -2e-3, 0.0, 5e-4])
    delta = 0.01
    data = MomentData(basis, y, delta, "noisy")
    w, res = B.refit_weights(np.array([[0.4]]), data, delta)
    vy, vv = v @ y, v @ v
    expected = (vy - np.sqrt(vy ** 2 - vv * (y @ y - delta ** 2))) / vv
    assert w[0] == pytest.approx(expected, rel=1e-7)
    assert res <= delta * (1 + 1e-7)


def test_refit_reports_unreachable_ball():
    basis = PolyBasis(1, 2, ORTHONORMAL)
    data = MomentData(basis, basis.evaluate(np.array([0.9])), 1e-6, "noisy")
    assert B.refit_weights(np.array([[-0.9]]), data, 1e-6) is None


def test_noisy_recovery_of_two_atoms():
    mu = DiscreteMeasure([[-0.4], [0.5]], [0.5, 0.5])
    data = _noisy(mu, 6, 1e-4, seed=3)
    rep = B.recover_noisy(data, truth=mu)
    assert rep.success
    assert rep.residual <= data.delta + 1e-6
    assert abs(rep.extra["alpha"] - rep.measure.total_variation) <= 1e-3 * (1 + rep.extra["alpha"])
    # weak duality against the feasible true measure
    assert rep.extra["alpha"] <= mu.total_variation + 1e-6
    assert rep.measure.total_variation <= mu.total_variation + 1e-6
    assert rep.diagnostics.passed
    dual = rep.extra["dual"]
    assert np.linalg.norm(dual.a) <= dual.b + 1e-8
    assert B.certificate_sup(dual, data.box) <= 1 + 1e-6
    assert rep.to_json()["dual"]["level"] == 6


def test_levels_are_monotone_in_the_plane():
    mu = DiscreteMeasure([[0.2, -0.3], [-0.5, 0.6]], [0.5, 0.5])
    data = _noisy(mu, 2, 1e-2, seed=5)
    dom = B.SemialgebraicDomain.from_box(data.box)
    alphas = [d.alpha for d in B.solve_hierarchy(data, data.delta, dom, [2, 4])]
    assert alphas[0] <= alphas[1] + 1e-6
    assert alphas[1] <= mu.total_variation + 1e-6


def test_zero_delta_extraction_is_exact_recovery():
    mu = DiscreteMeasure([[-0.3], [0.6]], [0.4, 0.6])
    data = MomentData.of_measure(mu, PolyBasis(1, 4, ORTHONORMAL))
    (dual,) = B.solve_hierarchy(data, 0.0, INTERVAL, 4)
    rep = B.extract_measure(dual, data, 0.0)
    assert rep.success
    np.testing.assert_allclose(rep.measure.points[:, 0], [-0.3, 0.6], atol=1e-5)
    np.testing.assert_allclose(rep.extra["moments_L"], data.y)
