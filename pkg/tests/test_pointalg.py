import math

import numpy as np
import pytest

from spikesolve.pointalg import (
    PointSet,
    analyze,
    generator_degrees,
    generic_bounds,
    hilbert_function,
    hilbert_table,
    interpolation_degree,
    safe_degree,
    singular_degree,
    vandermonde,
)
from spikesolve.polybasis import PolyBasis


def test_duplicate_points_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        PointSet([[0.1, 0.2], [0.1, 0.2]])


def test_vandermonde_shape():
    assert vandermonde([[0.5], [0.25]], 3).shape == (2, 4)


@pytest.mark.parametrize("seed", range(10))
def test_hilbert_function_of_generic_points(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    k = int(rng.integers(1, 16))
    X = rng.uniform(-1, 1, (k, n))
    assert hilbert_table(X, k) == [min(math.comb(n + t, t), k) for t in range(k + 1)]


def test_hilbert_function_of_collinear_points():
    # three points on a line behave like points in R^1
    X = [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]]
    assert [hilbert_function(X, t) for t in range(3)] == [1, 2, 3]
    assert interpolation_degree(X) == 2


def test_interval_points_invariants(rng):
    for k in (1, 3, 6):
        X = np.sort(rng.uniform(-1, 1, k))[:, None]
        gens = generator_degrees(X)
        assert gens.degrees == {k: 1}
        assert singular_degree(X) == 2 * k
        assert safe_degree(X) == 2 * k


def test_generators_vanish_on_points(rng):
    X = rng.uniform(-1, 1, (5, 2))
    gens = generator_degrees(X)
    assert gens.count >= 1
    for p in gens.polynomials:
        assert np.abs(p(X)).max() < 1e-9


def test_generic_bounds_univariate():
    for k in range(1, 12):
        assert generic_bounds(1, k) == (2 * k, 2 * k - 1)


def test_generic_bounds_ten_points_in_plane():
    assert generic_bounds(2, 10) == (8, 7)


def test_single_point_profile():
    prof = analyze([[0.3, -0.2]])
    assert prof.interpolation_degree == 0
    assert prof.singular_degree == 2
    assert prof.generator_degree == 1
    doc = prof.to_json()
    assert doc["hilbert_function"] == [1, 1]
    assert doc["safe_degree"] == 2


def test_singular_polynomial_exists_at_returned_degree(rng):
    # oracle: least-squares null vector of value+gradient conditions
    X = rng.uniform(-1, 1, (3, 2))
    ell = singular_degree(X)
    basis = PolyBasis(2, ell)
    V, G = basis.evaluate(X, order=1)
    rows = np.vstack([V] + [G[:, :, j] for j in range(2)])
    assert rows.shape[0] < rows.shape[1] or np.linalg.svd(rows, compute_uv=False)[-1] < 1e-8
    lower = PolyBasis(2, ell - 1)
    V, G = lower.evaluate(X, order=1)
    rows = np.vstack([V] + [G[:, :, j] for j in range(2)])
    s = np.linalg.svd(rows, compute_uv=False)
    assert rows.shape[0] >= rows.shape[1] and s[-1] > 1e-8
