import math

import numpy as np
import pytest
from numpy.polynomial import chebyshev as npcheb
from numpy.polynomial import legendre as npleg

from spikesolve.polybasis import (
    CHEBYSHEV,
    MONOMIAL,
    ORTHONORMAL,
    PolyBasis,
    Polynomial,
    basis_size,
    box_grid,
    box_moments,
    enumerate_basis,
    gauss_legendre_box,
    monomial_moments,
    poly_mul,
)


def test_graded_lex_order_two_variables():
    assert enumerate_basis(2, 2) == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


@pytest.mark.parametrize("n,d", [(1, 0), (1, 7), (2, 4), (3, 3), (4, 2)])
def test_basis_size_is_binomial(n, d):
    assert basis_size(n, d) == math.comb(n + d, d) == len(enumerate_basis(n, d))


def test_nested_degrees_are_prefixes():
    assert enumerate_basis(3, 2) == enumerate_basis(3, 4)[: basis_size(3, 2)]


def test_invalid_basis_rejected():
    with pytest.raises(ValueError):
        PolyBasis(0, 2)
    with pytest.raises(ValueError):
        PolyBasis(1, 2, "fourier")


def test_monomial_evaluation_matches_powers(rng):
    z = rng.uniform(-1, 1, (5, 2))
    V = PolyBasis(2, 3).evaluate(z)
    for j, (a, b) in enumerate(enumerate_basis(2, 3)):
        np.testing.assert_allclose(V[:, j], z[:, 0] ** a * z[:, 1] ** b, rtol=1e-14)


def test_orthonormal_basis_gram_is_identity_on_box():
    # oracle: tensor Gauss-Legendre rule from numpy, independent of the package
    box = ((0.0, 2.0), (-1.0, 3.0))
    basis = PolyBasis(2, 4, ORTHONORMAL, box)
    t, w = npleg.leggauss(12)
    xs = [0.5 * (hi - lo) * t + 0.5 * (hi + lo) for lo, hi in box]
    X, Y = np.meshgrid(*xs, indexing="ij")
    W = np.outer(w, w).ravel() / 4.0  # uniform probability on the box
    V = basis.evaluate(np.column_stack([X.ravel(), Y.ravel()]))
    np.testing.assert_allclose((V * W[:, None]).T @ V, np.eye(basis.size), atol=1e-12)


def test_chebyshev_product_matches_numpy(rng):
    x = rng.uniform(-1, 1, 20)
    V = PolyBasis(1, 6, CHEBYSHEV).evaluate(x[:, None])
    for k in range(7):
        c = np.zeros(k + 1)
        c[k] = 1.0
        np.testing.assert_allclose(V[:, k], npcheb.chebval(x, c), atol=1e-13)


@pytest.mark.parametrize("kind", [ORTHONORMAL, CHEBYSHEV])
def test_monomial_coefficients_reproduce_values(kind, rng):
    basis = PolyBasis(2, 3, kind, ((-1.0, 2.0), (0.0, 1.0)))
    z = rng.uniform(0, 1, (7, 2))
    direct = basis.evaluate(z)
    via = PolyBasis(2, 3).evaluate(z) @ basis.monomial_coeffs.T
    np.testing.assert_allclose(direct, via, atol=1e-11)


def test_gradient_matches_finite_differences(rng):
    basis = PolyBasis(2, 3, ORTHONORMAL)
    z = rng.uniform(-0.9, 0.9, 2)
    _, G = basis.evaluate(z, order=1)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (basis.evaluate(z + e) - basis.evaluate(z - e)) / (2 * h)
        np.testing.assert_allclose(G[:, j], fd, atol=1e-7)


def test_uniform_moments_closed_form():
    # int_{-1}^{1} x^j dx = 2/(j+1) for even j
    np.testing.assert_allclose(monomial_moments(1, 4), [2, 0, 2 / 3, 0, 2 / 5])
    np.testing.assert_allclose(box_moments(1, 2), [2.0, 0.0, 2.0 / 3.0])


def test_chebyshev_density_moments_closed_form():
    # int x^2 / sqrt(1-x^2) = pi/2 ; int sqrt(1-x^2) = pi/2
    np.testing.assert_allclose(box_moments(1, 2, weight="cheb2"), [math.pi, 0.0, math.pi / 2], atol=1e-13)
    np.testing.assert_allclose(box_moments(1, 0, weight="cheb1"), [math.pi / 2], atol=1e-13)


def test_orthonormal_moments_of_uniform_probability():
    y = box_moments(2, 4, ((0, 1), (0, 1)), "uniform", ORTHONORMAL, normalized=True)
    expected = np.zeros(basis_size(2, 4))
    expected[0] = 1.0
    np.testing.assert_allclose(y, expected, atol=1e-13)


def test_gauss_legendre_box_integrates_polynomials():
    nodes, w = gauss_legendre_box(((0.0, 1.0),), 4)
    assert abs(w @ nodes[:, 0] ** 7 - 1 / 8) < 1e-14


def test_box_grid_shape_and_corners():
    Z = box_grid(((0, 1), (2, 4)), 3)
    assert Z.shape == (9, 2)
    assert Z.min(axis=0).tolist() == [0, 2] and Z.max(axis=0).tolist() == [1, 4]


def test_polynomial_product_coefficients():
    # (1 + x)(1 - x) = 1 - x^2
    out = poly_mul(np.array([1.0, 1.0]), 1, np.array([1.0, -1.0]), 1, 1)
    np.testing.assert_allclose(out, [1.0, 0.0, -1.0])


def test_polynomial_change_of_basis_preserves_values(rng):
    p = Polynomial(PolyBasis(2, 3, ORTHONORMAL), rng.normal(size=10))
    q = p.to_monomial()
    assert q.basis.kind == MONOMIAL
    z = rng.uniform(-1, 1, (6, 2))
    np.testing.assert_allclose(p(z), q(z), atol=1e-12)
