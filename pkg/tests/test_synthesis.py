import itertools

import numpy as np
import pytest

from adaptive_mpc.errors import EmptyTerminalSet, ValidationError
from adaptive_mpc.geometry import Polytope, compass_directions, contains, intersect_rows, remove_redundant, support_many
from adaptive_mpc.noise import NoiseModel
from adaptive_mpc.solver import solve_dare
from adaptive_mpc.synthesis import (TerminalKind, chance_quantiles, closed_loop, robust_terminal_set,
                                    stochastic_terminal_set, synthesize, terminal_cost)
from adaptive_mpc.verification import polygon_vertices

from conftest import example_system

DIRS = compass_directions(2, 16)


def lqr_gain(sys):
    return solve_dare(sys.A, sys.B, sys.Q_lqr, sys.R_lqr)[0]


def extreme_pairs(sys):
    W = sys.W.vertices()
    T = polygon_vertices(sys.Omega) @ sys.E.T
    return [w + d for w, d in itertools.product(W, T)]


def max_step_residual(X, Acl, disturbances):
    V = polygon_vertices(X)
    return max(float(np.max(X.H @ (Acl @ v + d) - X.h)) for v in V for d in disturbances)


def test_robust_terminal_set_is_invariant_on_vertices():
    sys = example_system()
    K = lqr_gain(sys)
    X = robust_terminal_set(sys, K)
    assert contains(X, [0.0, 0.0])
    pairs = extreme_pairs(sys)
    assert len(pairs) == 16
    assert max_step_residual(X, closed_loop(sys, K), pairs) <= 1e-8
    # constraint admissibility under u = Kx
    rc = sys.robust
    for v in polygon_vertices(X):
        assert np.all((rc.C + rc.D @ K) @ v <= rc.b + 1e-9)


def test_stochastic_set_contains_robust_set():
    sys_r = example_system("robust")
    sys_s = example_system("stochastic")
    K = lqr_gain(sys_r)
    q = chance_quantiles(sys_s, NoiseModel("uniform_box", sys_s.W, 0))
    np.testing.assert_allclose(q, [0.06] * 4, atol=1e-12)
    XR = robust_terminal_set(sys_r, K)
    XS = stochastic_terminal_set(sys_s, K, q)
    assert np.all(support_many(XS, DIRS) >= support_many(XR, DIRS) - 1e-9)


def test_stochastic_set_satisfies_its_row_checks():
    sys = example_system("stochastic")
    K = lqr_gain(sys)
    q = chance_quantiles(sys, NoiseModel("uniform_box", sys.W, 0))
    X = stochastic_terminal_set(sys, K, q)
    Acl = closed_loop(sys, K)
    cc = sys.chance
    th = np.array([max(g @ sys.E @ t for t in polygon_vertices(sys.Omega)) for g in cc.G])
    for v in polygon_vertices(X):
        assert np.all(cc.G @ Acl @ v <= cc.h - th - q + 1e-9)
        assert np.all(cc.H_u @ K @ v <= cc.h_u + 1e-9)
    assert max_step_residual(X, Acl, extreme_pairs(sys)) <= 1e-8


def test_vanishing_risk_matches_robust_construction():
    sys_r = example_system("robust")
    sys_s = example_system("stochastic")
    K = lqr_gain(sys_r)
    q_max = np.array([sys_s.W.support(g) for g in sys_s.chance.G]) - 1e-9 * 0.2
    XS = stochastic_terminal_set(sys_s, K, q_max)
    XR = robust_terminal_set(sys_r, K)
    cc = sys_s.chance
    # intersecting with the untightened state rows recovers the robust set exactly
    XS_cut = intersect_rows(XS, cc.G, cc.h)
    np.testing.assert_allclose(support_many(XS_cut, DIRS), support_many(XR, DIRS), atol=1e-4)


def test_nominal_case_is_classical_maximal_invariant_set():
    sys = example_system(w_bar=0.0, omega=0.0, rate=0.0)
    K = lqr_gain(sys)
    X = robust_terminal_set(sys, K)
    Acl = closed_loop(sys, K)
    assert max_step_residual(X, Acl, [np.zeros(2)]) <= 1e-9
    # brute force: stack the constraint rows over many steps of the closed loop
    rc = sys.robust
    C0 = rc.C + rc.D @ K
    rows = [C0 @ np.linalg.matrix_power(Acl, k) for k in range(60)]
    ref = remove_redundant(Polytope(np.vstack(rows), np.tile(rc.b, 60)))
    np.testing.assert_allclose(support_many(X, DIRS), support_many(ref, DIRS), atol=1e-7)


def test_large_weight_on_input_leaves_no_terminal_set():
    with pytest.raises(EmptyTerminalSet):
        synthesize(example_system(R_lqr=10.0))


def test_huge_disturbance_leaves_no_terminal_set():
    sys = example_system(w_bar=10.0)
    with pytest.raises(EmptyTerminalSet):
        robust_terminal_set(sys, lqr_gain(example_system()))


def test_terminal_cost_solves_lyapunov_equation():
    sys = example_system()
    K = lqr_gain(sys)
    P_f = terminal_cost(sys, K)
    Acl = closed_loop(sys, K)
    np.testing.assert_allclose(Acl.T @ P_f @ Acl - P_f, -(sys.P + K.T @ sys.R @ K), atol=1e-9)
    assert np.all(np.linalg.eigvalsh(P_f) > 0)


def test_synthesize_both_modes():
    ti = synthesize(example_system("robust"))
    assert ti.kind is TerminalKind.ROBUST and ti.quantiles is None
    np.testing.assert_allclose(ti.rate.nu_upper, [0.05, 0.05])
    sys = example_system("stochastic")
    with pytest.raises(ValueError):
        synthesize(sys)
    ti = synthesize(sys, NoiseModel("uniform_box", sys.W, 3))
    assert ti.kind is TerminalKind.STOCHASTIC
    np.testing.assert_allclose(ti.quantiles, [0.06] * 4)


def test_invalid_system_rejected():
    with pytest.raises(ValidationError):
        example_system(N=0)
