import numpy as np
import pytest

from spikesolve.measure import DiscreteMeasure, MomentData, match_atoms
from spikesolve.polybasis import MONOMIAL, PolyBasis


def test_moments_of_dirac_at_origin():
    mu = DiscreteMeasure([[0.0]], [1.0])
    np.testing.assert_allclose(mu.moments(PolyBasis(1, 2, MONOMIAL)), [1.0, 0.0, 0.0])


def test_json_round_trip_is_exact(rng):
    mu = DiscreteMeasure(rng.uniform(size=(3, 2)), rng.uniform(size=3))
    back = DiscreteMeasure.from_json(mu.to_json())
    assert np.array_equal(back.points, mu.points) and np.array_equal(back.weights, mu.weights)


def test_negative_weight_rejected_in_files():
    with pytest.raises(ValueError):
        DiscreteMeasure.from_json({"n": 1, "atoms": [{"point": [0.0], "weight": -1.0}]})


def test_largest_breaks_ties_lexicographically():
    mu = DiscreteMeasure([[0.5], [-0.5], [0.1]], [0.3, 0.3, 0.4])
    top = mu.largest(2)
    assert top.points[:, 0].tolist() == [-0.5, 0.1]


def test_moment_data_validation():
    basis = PolyBasis(1, 2)
    with pytest.raises(ValueError):
        MomentData(basis, [1.0, 0.0])
    with pytest.raises(ValueError):
        MomentData(basis, [1.0, 0.0, 0.0], delta=0.1, provenance="exact")
    doc = MomentData(basis, [1.0, 0.0, 0.5], 0.1, "noisy").to_json()
    back = MomentData.from_json(doc)
    assert back.delta == 0.1 and back.y.tolist() == [1.0, 0.0, 0.5]


def test_match_atoms_pairs_nearest():
    truth = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    est = DiscreteMeasure([[1.01], [0.0]], [0.5, 0.4])
    pos, wer = match_atoms(est, truth)
    np.testing.assert_allclose(pos, [0.0, 0.01], atol=1e-12)
    np.testing.assert_allclose(wer, [0.1, 0.0], atol=1e-12)
