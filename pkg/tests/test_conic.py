import numpy as np
import pytest
import scipy.sparse as sp
from scipy.optimize import linprog

from spikesolve import conic
from spikesolve.conic import ConicProblem, ProblemBuilder, project_cone, smat, solve, svec


def test_svec_round_trip_and_inner_product(rng):
    A = rng.normal(size=(4, 4))
    A = A + A.T
    B = rng.normal(size=(4, 4))
    B = B + B.T
    np.testing.assert_allclose(smat(svec(A)), A, atol=1e-15)
    assert abs(svec(A) @ svec(B) - np.trace(A @ B)) < 1e-12


def test_psd_projection_matches_eigen_clipping(rng):
    A = rng.normal(size=(5, 5))
    A = A + A.T
    w, Q = np.linalg.eigh(A)
    expected = (Q * np.maximum(w, 0)) @ Q.T
    np.testing.assert_allclose(smat(project_cone(("psd", 5), svec(A))), expected, atol=1e-12)


def test_soc_projection_cases():
    np.testing.assert_allclose(project_cone(("soc", 3), np.array([2.0, 1.0, 0.0])), [2.0, 1.0, 0.0])
    np.testing.assert_allclose(project_cone(("soc", 3), np.array([-2.0, 1.0, 0.0])), [0.0, 0.0, 0.0])
    np.testing.assert_allclose(project_cone(("soc", 2), np.array([0.0, 2.0])), [1.0, 1.0])


def test_problem_shape_validation():
    with pytest.raises(ValueError):
        ConicProblem([1.0, 2.0], sp.csr_matrix((0, 1)), [], [("nonneg", 1)])
    with pytest.raises(ValueError):
        conic.Block("cube", 3)


def test_lp_against_scipy(rng):
    m, n = 4, 7
    A = rng.normal(size=(m, n))
    b = A @ rng.uniform(0.5, 1.5, n)
    c = rng.uniform(0.1, 1.0, n)
    ref = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    sol = solve(ConicProblem(c, A, b, [("nonneg", n)]), eps=1e-9)
    assert sol.status == conic.OPTIMAL
    assert abs(sol.primal_objective - ref.fun) < 1e-6 * (1 + abs(ref.fun))


def test_soc_minimizes_linear_function_over_ball(rng):
    a, y, delta = rng.normal(size=4), rng.normal(size=4), 0.3
    bld = ProblemBuilder()
    free = bld.add_block("free", 4)
    cone = bld.add_block("soc", 5)
    for i in range(4):
        bld.set_cost(bld.var(free, i), a[i])
    bld.add_constraint([(bld.var(cone, 0), 1.0)], delta)
    for i in range(4):
        bld.add_constraint([(bld.var(cone, 1 + i), 1.0), (bld.var(free, i), -1.0)], -y[i])
    sol = solve(bld.build(), eps=1e-9)
    # closed form: min <a, l> over ||l - y|| <= delta
    assert abs(sol.primal_objective - (a @ y - delta * np.linalg.norm(a))) < 1e-6


@pytest.mark.parametrize("side", [3, 8])
def test_sdp_minimum_eigenvalue(side, rng):
    B = rng.normal(size=(side, side))
    C = B @ B.T
    prob = ConicProblem(svec(C), sp.csr_matrix(svec(np.eye(side))[None, :]), [1.0], [("psd", side)])
    sol = solve(prob, eps=1e-9)
    assert sol.status == conic.OPTIMAL
    assert abs(sol.primal_objective - np.linalg.eigvalsh(C)[0]) < 1e-6 * (1 + np.abs(C).max())
    assert abs(sol.dual_objective - sol.primal_objective) < 1e-6 * (1 + np.abs(C).max())


def test_detects_infeasibility():
    sol = solve(ConicProblem([1.0], sp.csr_matrix([[1.0]]), [-1.0], [("nonneg", 1)]))
    assert sol.status == conic.INFEASIBLE


def test_detects_unboundedness():
    sol = solve(ConicProblem([-1.0], sp.csr_matrix((0, 1)), [], [("nonneg", 1)]))
    assert sol.status == conic.UNBOUNDED


def test_deterministic_results(rng):
    B = rng.normal(size=(4, 4))
    prob = ConicProblem(svec(B @ B.T), sp.csr_matrix(svec(np.eye(4))[None, :]), [1.0], [("psd", 4)])
    a, b = solve(prob), solve(prob)
    assert np.array_equal(a.x, b.x) and a.iterations == b.iterations


def test_anderson_acceleration_reaches_same_optimum(rng):
    B = rng.normal(size=(5, 5))
    C = B @ B.T
    prob = ConicProblem(svec(C), sp.csr_matrix(svec(np.eye(5))[None, :]), [1.0], [("psd", 5)])
    sol = solve(prob, eps=1e-9, anderson=5)
    assert abs(sol.primal_objective - np.linalg.eigvalsh(C)[0]) < 1e-6 * (1 + np.abs(C).max())


def test_factorized_path_matches_explicit_inverse(rng, monkeypatch):
    B = rng.normal(size=(4, 4))
    C = B @ B.T
    prob = ConicProblem(svec(C), sp.csr_matrix(svec(np.eye(4))[None, :]), [1.0], [("psd", 4)])
    dense = solve(prob, eps=1e-9)
    monkeypatch.setattr(conic, "DENSE_LIMIT", 0)
    factored = solve(prob, eps=1e-9)
    assert abs(dense.primal_objective - factored.primal_objective) < 1e-7
