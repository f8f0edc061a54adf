import numpy as np
import pytest
import scipy.linalg
import scipy.optimize
from hypothesis import given, settings, strategies as st

from adaptive_mpc.errors import InfeasibleError, NoConvergence
from adaptive_mpc.solver import (LpProblem, QpProblem, Status, dare_residual, require_optimal,
                                 solve_dare, solve_lp, solve_qp)

A_EX = np.array([[1.2, 1.5], [0.0, 1.3]])
B_EX = np.array([[0.0], [1.0]])


def test_lp_examples():
    res = solve_lp(LpProblem([-1.0], [[1.0], [-1.0]], [1.0, 1.0]))
    assert res.status is Status.OPTIMAL
    assert res.primal[0] == pytest.approx(1.0)
    assert res.objective == pytest.approx(-1.0)
    # min (E nu)_1 over the rate box
    rate = LpProblem([1.0, 0.0], np.vstack([np.eye(2), -np.eye(2)]), [0.05] * 4)
    assert solve_lp(rate).objective == pytest.approx(-0.05)
    assert solve_lp(LpProblem([0.0], [[1.0], [-1.0]], [0.0, -1.0])).status is Status.INFEASIBLE
    assert solve_lp(LpProblem([-1.0], [[-1.0]], [0.0])).status is Status.UNBOUNDED


def test_lp_with_equalities_and_degeneracy():
    # degenerate vertex: three constraints through the optimum
    p = LpProblem([-1.0, -1.0], [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], [1.0, 1.0, 2.0],
                  [[1.0, -1.0]], [0.0])
    res = solve_lp(p)
    np.testing.assert_allclose(res.primal, [1.0, 1.0], atol=1e-10)
    # redundant equality rows are tolerated
    p = LpProblem([1.0, 2.0], [[-1.0, 0.0], [0.0, -1.0]], [0.0, 0.0],
                  [[1.0, 1.0], [2.0, 2.0]], [1.0, 2.0])
    res = solve_lp(p)
    np.testing.assert_allclose(res.primal, [1.0, 0.0], atol=1e-10)


def _random_lp(seed):
    rng = np.random.default_rng(seed)
    n, m = rng.integers(1, 5), rng.integers(1, 8)
    A = rng.normal(size=(m, n))
    x0 = rng.normal(size=n)
    b = A @ x0 + rng.uniform(0.1, 1.0, m)
    # add a box so the LP is bounded
    A = np.vstack([A, np.eye(n), -np.eye(n)])
    b = np.concatenate([b, x0 + 3, 3 - x0])
    return LpProblem(rng.normal(size=n), A, b)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_lp_duality_and_scipy_agreement(seed):
    p = _random_lp(seed)
    res = solve_lp(p)
    assert res.status is Status.OPTIMAL
    ref = scipy.optimize.linprog(p.c, A_ub=p.A_ub, b_ub=p.b_ub, bounds=[(None, None)] * p.n, method="highs")
    assert res.objective == pytest.approx(ref.fun, abs=1e-7)
    # primal feasibility, dual sign, stationarity, strong duality, complementary slackness
    assert np.all(p.A_ub @ res.primal <= p.b_ub + 1e-8)
    assert np.all(res.dual_ub >= -1e-8)
    np.testing.assert_allclose(p.c + p.A_ub.T @ res.dual_ub, 0.0, atol=1e-7)
    assert res.objective == pytest.approx(-p.b_ub @ res.dual_ub, abs=1e-6)
    assert abs(res.dual_ub @ (p.b_ub - p.A_ub @ res.primal)) <= 1e-6


def test_lp_is_deterministic():
    p = _random_lp(7)
    a, b = solve_lp(p), solve_lp(p)
    assert np.array_equal(a.primal, b.primal) and a.iterations == b.iterations


def test_qp_examples():
    res = solve_qp(QpProblem([[2.0]], [0.0], [[-1.0]], [-1.0]))
    assert res.primal[0] == pytest.approx(1.0)
    box = np.vstack([np.eye(2), -np.eye(2)])
    res = solve_qp(QpProblem(2 * np.eye(2), [-4.0, 0.0], box, np.ones(4), constant=4.0))
    np.testing.assert_allclose(res.primal, [1.0, 0.0], atol=1e-10)
    assert res.objective == pytest.approx(1.0)
    res = solve_qp(QpProblem(np.eye(2), [-0.7, -0.2], box, [0.5] * 4))
    np.testing.assert_allclose(res.primal, [0.5, 0.2], atol=1e-10)


def test_qp_infeasible_and_require_optimal():
    res = solve_qp(QpProblem([[1.0]], [0.0], [[1.0], [-1.0]], [0.0, -1.0]))
    assert res.status is Status.INFEASIBLE
    with pytest.raises(InfeasibleError):
        require_optimal(res)
    res = solve_qp(QpProblem([[1.0]], [0.0], [[1.0], [-1.0]], [0.0, -1.0]), method="interior")
    assert res.status is Status.INFEASIBLE


def test_qp_unbounded_ray():
    res = solve_qp(QpProblem(np.diag([1.0, 0.0]), [0.0, -1.0], [[-1.0, 0.0]], [0.0]))
    assert res.status is Status.UNBOUNDED


def test_qp_rejects_asymmetric_hessian():
    with pytest.raises(ValueError):
        QpProblem([[1.0, 1.0], [0.0, 1.0]], [0.0, 0.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_qp_variational_inequality(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    L = rng.normal(size=(n, n))
    Hq = L @ L.T + 1e-3 * np.eye(n)
    f = rng.normal(size=n)
    A = np.vstack([rng.normal(size=(3, n)), np.eye(n), -np.eye(n)])
    b = np.concatenate([rng.uniform(0.1, 1.0, 3), 2 * np.ones(2 * n)])
    p = QpProblem(Hq, f, A, b)
    res = solve_qp(p)
    assert res.status is Status.OPTIMAL
    # KKT residuals
    np.testing.assert_allclose(Hq @ res.primal + f + A.T @ res.dual_ub, 0.0, atol=1e-6)
    assert np.all(A @ res.primal <= b + 1e-8)
    # compare with 1000 random feasible points (convex combinations with the optimum)
    other = solve_lp(LpProblem(rng.normal(size=n), A, b)).primal
    lam = rng.uniform(0, 1, 1000)
    pts = res.primal + lam[:, None] * (other - res.primal)
    vals = 0.5 * np.einsum("ij,jk,ik->i", pts, Hq, pts) + pts @ f
    assert p.objective(res.primal) <= vals.min() + 1e-8
    # both back ends agree
    alt = solve_qp(p, method="interior")
    assert alt.objective == pytest.approx(res.objective, abs=1e-6)


def test_dare_scalar_fixed_point():
    K, P = solve_dare([[0.5]], [[1.0]], [[1.0]], [[1.0]])
    p = P[0, 0]
    assert p == pytest.approx(1 + 0.25 * p - 0.25 * p * p / (p + 1), abs=1e-9)
    assert dare_residual([[0.5]], [[1.0]], [[1.0]], [[1.0]], P) <= 1e-9


def test_dare_example_system_matches_scipy():
    K, P = solve_dare(A_EX, B_EX, np.eye(2), [[10.0]])
    P_ref = scipy.linalg.solve_discrete_are(A_EX, B_EX, np.eye(2), [[10.0]])
    np.testing.assert_allclose(P, P_ref, rtol=1e-9)
    Acl = A_EX + B_EX @ K
    assert max(abs(np.linalg.eigvals(Acl))) < 1
    lhs = Acl.T @ P @ Acl - P
    np.testing.assert_allclose(lhs, -(np.eye(2) + K.T @ [[10.0]] @ K), atol=1e-8)


def test_dare_without_control_is_lyapunov():
    A = np.array([[0.5, 0.1], [0.0, 0.3]])
    K, P = solve_dare(A, np.zeros((2, 1)), np.eye(2), [[1.0]])
    np.testing.assert_allclose(K, 0.0)
    np.testing.assert_allclose(P, scipy.linalg.solve_discrete_lyapunov(A.T, np.eye(2)), atol=1e-9)


def test_dare_unstabilisable():
    with pytest.raises(NoConvergence):
        solve_dare([[2.0]], [[0.0]], [[1.0]], [[1.0]])
