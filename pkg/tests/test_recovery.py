import numpy as np

from spikesolve.measure import DiscreteMeasure, MomentData, match_atoms
from spikesolve.polybasis import MONOMIAL, ORTHONORMAL, PolyBasis
from spikesolve.recovery import (
    FLAG_NON_DISCRETE,
    STAGE_ASSEMBLE,
    STAGE_EXTRACT,
    fit_weights,
    moment_matrix,
    recover_exact,
    sdp_basis,
    truncate_moments,
)


def _data(points, weights, degree, kind=ORTHONORMAL, box=None):
    mu = DiscreteMeasure(np.asarray(points, float), np.asarray(weights, float))
    return mu, MomentData.of_measure(mu, PolyBasis(mu.n, degree, kind, box))


def test_moment_matrix_equals_sum_of_outer_products(rng):
    mu, data = _data(rng.uniform(-1, 1, (3, 2)), [0.2, 0.3, 0.5], 4)
    psi = sdp_basis(data, 2)
    V = psi.evaluate(mu.points)
    np.testing.assert_allclose(moment_matrix(data, psi), (V.T * mu.weights) @ V, atol=1e-12)


def test_moment_matrix_from_monomial_data(rng):
    mu, data = _data(rng.uniform(-1, 1, (2, 1)), [0.4, 0.6], 4, kind=MONOMIAL)
    psi = sdp_basis(data, 2)
    V = psi.evaluate(mu.points)
    np.testing.assert_allclose(moment_matrix(data, psi), (V.T * mu.weights) @ V, atol=1e-11)


def test_truncation_needs_enough_degree():
    _, data = _data([[0.0]], [1.0], 2)
    assert truncate_moments(data, 1).shape == (2,)
    rep = recover_exact(data, 2)
    assert not rep.success and rep.stage == STAGE_ASSEMBLE


def test_single_atom_recovered_at_half_degree_one():
    mu, data = _data([[0.3]], [2.0], 2)
    rep = recover_exact(data, 1)
    assert rep.success
    np.testing.assert_allclose(rep.measure.points, [[0.3]], atol=1e-6)
    np.testing.assert_allclose(rep.measure.weights, [2.0], atol=1e-6)


def test_three_atoms_in_interval():
    mu, data = _data([[-0.6], [0.1], [0.8]], [0.2, 0.5, 0.3], 8)
    rep = recover_exact(data, 4)
    assert rep.success and rep.measure.k == 3
    pos, wer = match_atoms(rep.measure, mu)
    assert pos.max() < 1e-5 and wer.max() < 1e-5
    # H* vanishes on the support and is positive elsewhere
    assert np.all(rep.H(mu.points) < 1e-6 * rep.extraction.grid_max)


def test_planar_atoms_recovered(rng):
    mu, data = _data([[0.2, 0.3], [0.7, 0.8], [0.5, 0.1]], [1 / 3] * 3, 6, box=((0, 1), (0, 1)))
    rep = recover_exact(data, 3)
    assert rep.success
    pos, _ = match_atoms(rep.measure, mu)
    assert pos.max() < 1e-4


def test_non_discrete_zero_set_is_flagged():
    # atoms on the line y = 0: y^2 vanishes on the support, so H* vanishes on the whole line
    _, data = _data([[-0.5, 0.0], [0.0, 0.0], [0.5, 0.0]], [1.0, 1.0, 1.0], 4)
    rep = recover_exact(data, 2)
    assert not rep.success
    assert rep.stage == STAGE_EXTRACT and FLAG_NON_DISCRETE in rep.flags


def test_fit_weights_prunes_spurious_candidates():
    mu, data = _data([[-0.5], [0.5]], [0.5, 0.5], 6)
    pts, w, res = fit_weights(np.array([[-0.5], [0.0], [0.5]]), data)
    assert pts.shape[0] == 2 and res < 1e-10
    np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-10)


def test_report_json_contains_h_coefficients():
    _, data = _data([[0.0]], [1.0], 2, kind=MONOMIAL)
    doc = recover_exact(data, 1).to_json()
    assert doc["success"] and len(doc["H_monomial_coeffs"]) == 3
    # H* = c x^2 for the Dirac at the origin
    c = np.array(doc["H_monomial_coeffs"])
    assert abs(c[0]) < 1e-6 and abs(c[1]) < 1e-6 and c[2] > 0
