"""Acceptance suite: each test checks one criterion at its stated tolerance.

Every test records a PASS/FAIL line before asserting; the lines are printed in
the terminal summary (``pytest tests/test_acceptance.py``).
"""
import itertools

import numpy as np
import pytest

from adaptive_mpc.adaptation import FeasibleParameterSet, fps_update, rate_bounds
from adaptive_mpc.cli import main
from adaptive_mpc.config import bundled_config_path
from adaptive_mpc.controller import dual_row_bounds, mpc_step
from adaptive_mpc.errors import InfeasibleStep
from adaptive_mpc.geometry import BoxSet, Polytope, compass_directions, support_many
from adaptive_mpc.noise import NoiseModel
from adaptive_mpc.sim import compare_campaigns, gen_offset, monte_carlo
from adaptive_mpc.solver import QpProblem, Status, solve_qp
from adaptive_mpc.synthesis import TerminalIngredients, TerminalKind, closed_loop, synthesize
from adaptive_mpc.system import ChanceConstraints, RobustConstraints, SystemConfig
from adaptive_mpc.verification import polygon_vertices, robustify_by_vertices

from conftest import example_system, record_criterion

pytestmark = pytest.mark.slow


def _campaign(cfg, ti):
    offset = gen_offset(cfg.system, cfg.theta_0, cfg.delta, cfg.T)
    return monte_carlo(cfg.system, ti, cfg.n_traj, cfg.base_seed, cfg.noise, offset, cfg.T, cfg.x0)


@pytest.fixture(scope="session")
def robust_campaign(robust_cfg, robust_terminal):
    return _campaign(robust_cfg, robust_terminal)


@pytest.fixture(scope="session")
def stochastic_campaign(stochastic_cfg, stochastic_terminal):
    return _campaign(stochastic_cfg, stochastic_terminal)


def test_criterion_01_robust_campaign_is_safe(robust_campaign):
    m = robust_campaign
    ok = (m.n_traj == 100 and m.T == 20 and m.violation_rate == 0.0
          and m.input_violation_count == 0 and m.infeasible_count == 0)
    record_criterion(1, "robust campaign: no violations, no infeasible steps", ok,
                     f"n={m.n_traj} T={m.T} violation_rate={m.violation_rate} "
                     f"input_violations={m.input_violation_count} infeasible={m.infeasible_count}")
    assert ok


def test_criterion_02_stochastic_violation_rate(stochastic_campaign, robust_campaign):
    m = stochastic_campaign
    rate = m.violation_rate
    ok = (m.seeds == robust_campaign.seeds and m.infeasible_count == 0
          and rate < 0.40 and 0.08 <= rate <= 0.30)
    record_criterion(2, "stochastic violation rate < 0.40 and in [0.08, 0.30]", ok,
                     f"violation_rate={rate:.4f} infeasible={m.infeasible_count}")
    assert ok


def test_criterion_03_cost_reduction(robust_campaign, stochastic_campaign):
    doc = compare_campaigns(robust_campaign, stochastic_campaign)
    red = doc["cost_reduction"]
    ok = 0.06 <= red <= 0.20
    record_criterion(3, "mean cost reduction in [6%, 20%]", ok,
                     f"reduction={100 * red:.2f}% robust={doc['mean_cost_robust']:.3f} "
                     f"stochastic={doc['mean_cost_stochastic']:.3f} "
                     f"not_worse_fraction={doc['fraction_stochastic_not_worse']:.2f}")
    assert ok


def test_criterion_04_feasible_parameter_set_contains_offset(robust_campaign, stochastic_campaign):
    fails = robust_campaign.prop1_failures + stochastic_campaign.prop1_failures
    steps = sum(r.T + 1 for c in (robust_campaign, stochastic_campaign) for r in c.records)
    ok = fails == 0 and steps == 2 * 100 * 21
    record_criterion(4, "offset set nonempty and contains the true offset", ok,
                     f"failures={fails} over {steps} checked sets")
    assert ok


def test_criterion_05_predicted_sets_are_nested(robust_campaign, stochastic_campaign):
    fails = robust_campaign.prop3_failures + stochastic_campaign.prop3_failures
    ok = fails == 0
    record_criterion(5, "predicted offset sets nested (16 directions, tol 1e-7)", ok,
                     f"failures={fails}")
    assert ok


def test_criterion_06_lms_prediction_error_ratio(robust_cfg, robust_terminal, stochastic_cfg,
                                                 stochastic_terminal):
    ratios = []
    for cfg, ti in ((robust_cfg, robust_terminal), (stochastic_cfg, stochastic_terminal)):
        offset = gen_offset(cfg.system, cfg.theta_0, cfg.delta, cfg.T)
        m = monte_carlo(cfg.system, ti, 10, 1000, cfg.noise, offset, cfg.T, cfg.x0, lms_mu=0.4,
                        check_props=False)
        assert m.infeasible_count == 0
        ratios.extend(m.lms_ratios)
    worst = max(ratios)
    ok = len(ratios) == 20 and worst <= 1 + 1e-9
    record_criterion(6, "LMS prediction-error ratio <= 1 + 1e-9", ok,
                     f"runs={len(ratios)} max_ratio={worst:.6f}")
    assert ok


def _random_instance(rng, mode, N):
    """A random two-state plant with box uncertainty and a nontrivial offset set."""
    while True:
        A = rng.uniform(-1.3, 1.3, (2, 2))
        B = rng.normal(size=(2, 1))
        E = np.eye(2) if rng.random() < 0.5 else rng.uniform(-1.0, 1.0, (2, 2))
        w_bar = rng.uniform(0.01, 0.15, 2)
        om = rng.uniform(0.1, 0.5, 2)
        rate = rng.uniform(0.0, 0.08, 2)
        I = np.eye(2)
        b = rng.uniform(3.0, 8.0, 4)
        sys = SystemConfig(
            A=A, B=B, E=E, W=BoxSet.symmetric(w_bar), Omega=Polytope.from_box(-om, om),
            P_rate=Polytope.from_box(-rate, rate), P=I, R=[[rng.uniform(0.1, 10.0)]], N=N, mode=mode,
            robust=RobustConstraints(np.vstack([I, -I, np.zeros((2, 2))]), [[0.0]] * 4 + [[1.0], [-1.0]],
                                     np.concatenate([b, [4.0, 4.0]])),
            chance=ChanceConstraints(np.vstack([I, -I]), b, 0.4, [0.2] * 4, [[1.0], [-1.0]], [4.0, 4.0]),
            Q_lqr=I, R_lqr=[[1.0]])
        rb = rate_bounds(sys.P_rate, E)
        half = rng.uniform(1.0, 3.0, 2)
        kind = TerminalKind(mode)
        q = rng.uniform(0.0, 1.0, 4) * (np.abs(sys.chance.G) @ w_bar) if mode == "stochastic" else None
        ti = TerminalIngredients(np.zeros((1, 2)), np.eye(2), Polytope.from_box(-half, half), kind, q, rb)
        # a few consistent measurements shape the offset set
        fps = FeasibleParameterSet.initial(sys.Omega)
        theta = rng.uniform(-om, om)
        x = rng.uniform(-1, 1, 2)
        for _ in range(int(rng.integers(0, 4))):
            u = rng.uniform(-1, 1, 1)
            xn = A @ x + B @ u + E @ theta + rng.uniform(-w_bar, w_bar)
            fps = fps_update(fps, x, u, xn, sys, rb)
            theta = np.clip(theta + rng.uniform(-rate, rate), -om, om)
            x = np.clip(xn, -1, 1)
        for scale in (1.0, 0.3, 0.0):
            try:
                _, _, diag = mpc_step(sys, scale * rng.uniform(-1, 1, 2), fps, ti)
            except InfeasibleStep:
                continue
            return sys, diag


def test_criterion_07_duality_matches_vertex_enumeration():
    rng = np.random.default_rng(20240607)
    worst_gap = 0.0
    worst_cert = 0.0
    rows = 0
    count = {"robust": 0, "stochastic": 0}
    for i in range(50):
        mode = ("robust", "stochastic")[i % 2]
        N = 1 + (i // 2) % 3
        sys, diag = _random_instance(rng, mode, N)
        sm, us = diag.model, diag.stack
        coef = sm.F @ diag.M + sm.G
        blocks = [sys.W.to_polytope()] * sm.N + list(us.theta_sets)
        bounds = dual_row_bounds(sm, us, diag.M)
        for r in range(sm.rows):
            row = np.concatenate([coef[r], sm.E_bold.T @ coef[r] + sm.G_theta[r]])
            exact = robustify_by_vertices(row, blocks)
            worst_gap = max(worst_gap, abs(bounds[r] - exact))
            worst_cert = max(worst_cert, exact - diag.row_bounds[r])
            rows += 1
        count[mode] += 1
    ok = worst_gap <= 1e-6 and worst_cert <= 1e-6
    record_criterion(7, "dualised row bounds equal vertex maxima (50 instances)", ok,
                     f"instances={count} rows={rows} max_gap={worst_gap:.2e} "
                     f"max_certificate_shortfall={max(worst_cert, 0.0):.2e}")
    assert ok


def test_criterion_08_terminal_set_certificates(robust_cfg, robust_terminal, stochastic_cfg,
                                                stochastic_terminal):
    sys = robust_cfg.system
    XR = robust_terminal.X_term
    Acl = closed_loop(sys, robust_terminal.K)
    W_v = sys.W.vertices()
    T_v = polygon_vertices(sys.Omega) @ sys.E.T
    pairs = [w + d for w, d in itertools.product(W_v, T_v)]
    res_r = max(float(np.max(XR.H @ (Acl @ v + d) - XR.h)) for v in polygon_vertices(XR) for d in pairs)

    ss = stochastic_cfg.system
    XS = stochastic_terminal.X_term
    AclS = closed_loop(ss, stochastic_terminal.K)
    cc = ss.chance
    q = stochastic_terminal.quantiles
    th = np.array([max(g @ t for t in polygon_vertices(ss.Omega) @ ss.E.T) for g in cc.G])
    row_res = max(max(float(np.max(cc.G @ AclS @ v - (cc.h - th - q))),
                      float(np.max(cc.H_u @ stochastic_terminal.K @ v - cc.h_u)))
                  for v in polygon_vertices(XS))
    res_s = max(float(np.max(XS.H @ (AclS @ v + d) - XS.h)) for v in polygon_vertices(XS) for d in pairs)
    dirs = compass_directions(2, 16)
    dom = float(np.min(support_many(XS, dirs) - support_many(XR, dirs)))
    ok = len(pairs) == 16 and res_r <= 1e-8 and row_res <= 1e-8 and res_s <= 1e-8 and dom >= -1e-8
    record_criterion(8, "terminal-set certificates", ok,
                     f"robust_invariance_residual={res_r:.2e} stochastic_row_residual={row_res:.2e} "
                     f"stochastic_invariance_residual={res_s:.2e} min_support_margin={dom:.3e}")
    assert ok


def _nominal_qp(sys, x, Y, z, P_f, mode):
    """Condensed nominal MPC QP over u_0..u_{N-1}, assembled directly."""
    n, m, N = sys.n, sys.m, int(sys.N)
    a = [np.asarray(x, dtype=float)]
    Phi = [np.zeros((n, m * N))]
    for k in range(N):
        a.append(sys.A @ a[-1])
        nxt = sys.A @ Phi[-1]
        nxt[:, k * m:(k + 1) * m] += sys.B
        Phi.append(nxt)
    Sel = [np.eye(m * N)[k * m:(k + 1) * m] for k in range(N)]
    Hq = np.zeros((m * N, m * N))
    f = np.zeros(m * N)
    const = 0.0
    for k in range(N + 1):
        Wk = P_f if k == N else sys.P
        Hq += Phi[k].T @ Wk @ Phi[k]
        f += Phi[k].T @ Wk @ a[k]
        const += a[k] @ Wk @ a[k]
        if k < N:
            Hq += Sel[k].T @ sys.R @ Sel[k]
    rows, rhs = [], []
    for k in range(N):
        if mode == "robust":
            rc = sys.robust
            rows.append(rc.C @ Phi[k] + rc.D @ Sel[k])
            rhs.append(rc.b - rc.C @ a[k])
        else:
            cc = sys.chance
            rows.append(cc.G @ Phi[k + 1])
            rhs.append(cc.h - cc.G @ a[k + 1])
            rows.append(cc.H_u @ Sel[k])
            rhs.append(cc.h_u)
    rows.append(Y @ Phi[N])
    rhs.append(z - Y @ a[N])
    return QpProblem(2 * Hq, 2 * f, np.vstack(rows), np.concatenate(rhs), constant=const)


def test_criterion_09_zero_uncertainty_reduces_to_nominal_mpc():
    worst = 0.0
    steps = 0
    for mode in ("robust", "stochastic"):
        sys = example_system(mode, w_bar=0.0, omega=0.0, rate=0.0)
        ti = synthesize(sys, NoiseModel("uniform_box", sys.W, 0))
        fps = FeasibleParameterSet.initial(sys.Omega)
        x = np.array([-3.21, -0.25])
        for t in range(20):
            u, J, _ = mpc_step(sys, x, fps, ti, t=t)
            qp = _nominal_qp(sys, x, ti.X_term.H, ti.X_term.h, ti.P_f, mode)
            ref = solve_qp(qp, method="active_set")
            assert ref.status is Status.OPTIMAL
            worst = max(worst, float(np.max(np.abs(u - ref.primal[: sys.m]))))
            x_next = sys.A @ x + sys.B @ u
            fps = fps_update(fps, x, u, x_next, sys, ti.rate)
            x = x_next
            steps += 1
    ok = worst <= 1e-6
    record_criterion(9, "zero uncertainty reproduces nominal MPC inputs", ok,
                     f"steps={steps} max_input_difference={worst:.2e}")
    assert ok


def test_criterion_10_campaigns_are_deterministic(tmp_path):
    same = True
    for mode in ("robust", "stochastic"):
        blobs = []
        for rep in range(2):
            out = tmp_path / f"{mode}_{rep}"
            code = main(["montecarlo", "--config", str(bundled_config_path(mode)), "--trajectories", "5",
                         "--seed", "17", "--out", str(out)])
            assert code == 0
            blobs.append((out / "metrics.json").read_bytes())
        same = same and blobs[0] == blobs[1]
    record_criterion(10, "repeated campaigns give byte-identical metrics", same,
                     "robust and stochastic, 5 trajectories, T=20, seed 17")
    assert same


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
