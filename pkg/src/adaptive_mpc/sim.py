"""Seeded closed-loop simulation, Monte Carlo campaigns and their metrics."""
from dataclasses import dataclass, field
import csv
import hashlib
import json
import math

import numpy as np

from .adaptation import (FeasibleParameterSet, LmsEstimate, fps_predict, fps_update,
                         lms_update, prediction_error_ratio)
from .controller import mpc_step
from .errors import EmptySetAfterUpdate, InfeasibleStep, InvalidOffsetSchedule, SeedMismatch
from .geometry import compass_directions, contains, is_empty, support_many
from .noise import UNIFORM_BOX, NoiseModel, sample_noise
from .system import Mode

__all__ = [
    "CampaignMetrics",
    "NoiseModel",
    "OffsetTrajectory",
    "TrajectoryRecord",
    "UNIFORM_BOX",
    "compare_campaigns",
    "gen_offset",
    "monte_carlo",
    "run_closed_loop",
    "sample_noise",
]

METRICS_SCHEMA = "adaptive-mpc/campaign-metrics/1"
COMPARE_SCHEMA = "adaptive-mpc/comparison/1"
NEST_TOL = 1e-7
VIOLATION_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class OffsetTrajectory:
    """``thetas[t]`` is the true offset at step ``t`` for ``t = 0..T``."""

    theta_0: np.ndarray
    delta: np.ndarray
    thetas: np.ndarray

    @property
    def T(self):
        return self.thetas.shape[0] - 1

    def digest(self):
        return hashlib.sha256(np.ascontiguousarray(self.thetas).tobytes()).hexdigest()


def gen_offset(sys, theta_0, delta, T) -> OffsetTrajectory:
    """Offset path ``theta_{t+1} = theta_t + delta_t``.

    ``delta`` is one increment used at every step or a ``(T, p)`` schedule.
    A step that would leave ``Omega`` is not taken (the offset holds), so the
    path stays admissible.

    Raises
    ------
    InvalidOffsetSchedule
        ``theta_0`` outside ``Omega`` or an increment outside the rate set.
    """
    theta_0 = np.asarray(theta_0, dtype=float).reshape(-1)
    if theta_0.size != sys.p:
        raise InvalidOffsetSchedule(f"initial offset needs {sys.p} entries")
    if not contains(sys.Omega, theta_0, tol=0.0):
        raise InvalidOffsetSchedule(f"initial offset {theta_0.tolist()} lies outside Omega")
    delta = np.asarray(delta, dtype=float)
    deltas = np.tile(delta.reshape(1, -1), (T, 1)) if delta.ndim == 1 else delta.reshape(T, -1)
    for d in deltas:
        if not contains(sys.P_rate, d, tol=0.0):
            raise InvalidOffsetSchedule(f"increment {d.tolist()} lies outside the rate set")
    thetas = [theta_0]
    for d in deltas:
        nxt = thetas[-1] + d
        thetas.append(nxt if contains(sys.Omega, nxt, tol=0.0) else thetas[-1].copy())
    return OffsetTrajectory(theta_0, deltas, np.array(thetas))


@dataclass(eq=False)
class TrajectoryRecord:
    seed: int
    mode: str
    states: np.ndarray
    inputs: np.ndarray
    noise: np.ndarray
    offsets: np.ndarray
    stage_costs: np.ndarray
    J_star: np.ndarray
    state_violations: np.ndarray
    input_violations: np.ndarray
    fps_snapshots: list
    status: str = "ok"
    prop1_failures: int = 0
    prop3_failures: int = 0
    lms_ratio: float = None
    theta_bar: np.ndarray = None

    @property
    def T(self):
        return self.inputs.shape[0]

    @property
    def total_cost(self):
        return math.fsum(self.stage_costs)

    @property
    def violation_steps(self):
        return int(np.sum(np.any(self.state_violations, axis=1)))


def _constraint_split(sys):
    """``(state rows, mixed rows)``: state rows are checked on ``x_1..x_T``, the rest on ``(x_t, u_t)``."""
    if sys.mode is Mode.STOCHASTIC:
        cc = sys.chance
        return (cc.G, cc.h), (np.zeros((cc.h_u.size, sys.n)), cc.H_u, cc.h_u)
    rc = sys.robust
    pure = ~np.any(rc.D != 0.0, axis=1)
    return (rc.C[pure], rc.b[pure]), (rc.C[~pure], rc.D[~pure], rc.b[~pure])


def _nested(prev_seq, seq, dirs):
    """Count stages ``k`` where the new prediction is not inside the old one."""
    fails = 0
    for i in range(1, len(prev_seq)):
        old = support_many(prev_seq[i], dirs)
        new = support_many(seq[i - 1], dirs)
        if np.any(new > old + NEST_TOL):
            fails += 1
    return fails


def realised_noise(sys, x, u, theta, x_next):
    """``x_{t+1} - A x_t - B u_t - E theta_t`` evaluated in a fixed order."""
    return ((x_next - sys.A @ x) - sys.B @ u) - sys.E @ theta


def run_closed_loop(sys, terminal, noise: NoiseModel, offset: OffsetTrajectory, T, x0,
                    lms_mu=None, check_props=True) -> TrajectoryRecord:
    """Predict offset sets, solve, apply the first input, step the plant, update the set.

    With ``lms_mu`` the nominal cost uses an LMS offset estimate (started at
    zero) and the prediction-error ratio is recorded.

    Raises
    ------
    InfeasibleStep, EmptySetAfterUpdate
    """
    if offset.T < T:
        raise InvalidOffsetSchedule(f"offset path covers {offset.T} steps, {T} requested")
    x = np.asarray(x0, dtype=float).reshape(-1)
    rb = terminal.rate
    (Gs, hs), (Cm, Dm, bm) = _constraint_split(sys)
    dirs = compass_directions(sys.p, 16)
    fps = FeasibleParameterSet.initial(sys.Omega)
    est = LmsEstimate(np.zeros(sys.p), float(lms_mu)) if lms_mu is not None else None

    xs, us, ws, ls, js, sv, iv, snaps = [x], [], [], [], [], [], [], []
    xtilde, thb = [], []
    p1 = p3 = 0
    prev_seq = None
    for t in range(T):
        theta = offset.thetas[t]
        snaps.append((fps.H.copy(), fps.h.copy()))
        if check_props:
            if is_empty(fps.theta_set) or not contains(fps.theta_set, theta):
                p1 += 1
            seq = fps_predict(fps, int(sys.N), rb, sys.Omega)
            if prev_seq is not None:
                p3 += _nested(prev_seq, seq, dirs)
            prev_seq = seq
        theta_bar = est.theta_bar if est is not None else None
        u, J, _ = mpc_step(sys, x, fps, terminal, theta_bar=theta_bar, t=t)
        w = sample_noise(noise, t)
        x_next = sys.A @ x + sys.B @ u + sys.E @ theta + w
        # log the disturbance actually realised in the state (differs from w by rounding only)
        w = realised_noise(sys, x, u, theta, x_next)
        if est is not None:
            xbar_pred = sys.A @ x + sys.B @ u + sys.E @ est.theta_bar
            xtilde.append(x_next - w - xbar_pred)
            thb.append(est.theta_bar)
            est = lms_update(est, x_next, xbar_pred, sys.E, sys.Omega)
        try:
            fps = fps_update(fps, x, u, x_next, sys, rb)
        except EmptySetAfterUpdate as exc:
            raise EmptySetAfterUpdate(f"seed {noise.seed}: {exc}") from exc
        ls.append(float(x @ sys.P @ x + u @ sys.R @ u))
        js.append(J)
        iv.append(Cm @ x + Dm @ u > bm + VIOLATION_TOL)
        sv.append(Gs @ x_next > hs + VIOLATION_TOL)
        xs.append(x_next)
        us.append(u)
        ws.append(w)
        x = x_next
    if check_props and (is_empty(fps.theta_set) or not contains(fps.theta_set, offset.thetas[T])):
        p1 += 1
    snaps.append((fps.H.copy(), fps.h.copy()))

    ratio = None
    if est is not None:
        ratio = prediction_error_ratio(np.array(xtilde), np.array(ws), np.zeros(sys.p),
                                       offset.thetas[0], est.mu)
    return TrajectoryRecord(
        seed=int(noise.seed), mode=sys.mode.value, states=np.array(xs), inputs=np.array(us),
        noise=np.array(ws), offsets=offset.thetas[: T + 1].copy(), stage_costs=np.array(ls),
        J_star=np.array(js), state_violations=np.array(sv, dtype=bool).reshape(T, -1),
        input_violations=np.array(iv, dtype=bool).reshape(T, -1), fps_snapshots=snaps,
        prop1_failures=p1, prop3_failures=p3, lms_ratio=ratio,
        theta_bar=np.array(thb) if thb else None)


@dataclass(eq=False)
class CampaignMetrics:
    mode: str
    n_traj: int
    T: int
    base_seed: int
    seeds: list
    offset_digest: str
    violation_rate: float
    input_violation_count: int
    costs: list
    mean_cost: float
    infeasible_count: int
    infeasible_seeds: list
    stage_cost_mean: list
    prop1_failures: int = 0
    prop3_failures: int = 0
    lms_ratios: list = None
    records: list = field(default=None, repr=False)

    def to_dict(self):
        d = {k: getattr(self, k) for k in (
            "mode", "n_traj", "T", "base_seed", "seeds", "offset_digest", "violation_rate",
            "input_violation_count", "costs", "mean_cost", "infeasible_count",
            "infeasible_seeds", "stage_cost_mean", "prop1_failures", "prop3_failures",
            "lms_ratios")}
        d["schema"] = METRICS_SCHEMA
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("schema", None)
        return cls(**d)


def aggregate(records, mode, T, base_seed, seeds, offset_digest, infeasible_seeds):
    """Order-independent summary: records are sorted by seed before any sums."""
    records = sorted(records, key=lambda r: r.seed)
    n = len(seeds)
    steps = sum(r.T for r in records)
    viol = sum(r.violation_steps for r in records)
    costs = [r.total_cost for r in records]
    stage = [math.fsum(r.stage_costs[t] for r in records) / len(records) if records else 0.0
             for t in range(T)]
    ratios = [r.lms_ratio for r in records if r.lms_ratio is not None]
    return CampaignMetrics(
        mode=mode, n_traj=n, T=T, base_seed=int(base_seed), seeds=[int(s) for s in seeds],
        offset_digest=offset_digest, violation_rate=viol / steps if steps else 0.0,
        input_violation_count=int(sum(int(np.sum(np.any(r.input_violations, axis=1)))
                                      for r in records)),
        costs=costs, mean_cost=math.fsum(costs) / len(costs) if costs else float("nan"),
        infeasible_count=len(infeasible_seeds), infeasible_seeds=sorted(infeasible_seeds),
        stage_cost_mean=stage,
        prop1_failures=sum(r.prop1_failures for r in records),
        prop3_failures=sum(r.prop3_failures for r in records),
        lms_ratios=ratios or None, records=records)


def monte_carlo(sys, terminal, n, base_seed, noise: NoiseModel, offset: OffsetTrajectory, T, x0,
                lms_mu=None, check_props=True) -> CampaignMetrics:
    """``n`` trajectories with seeds ``base_seed + i`` and one shared offset path.

    A trajectory whose program turns infeasible is counted, not retried.
    """
    if n < 1:
        raise ValueError("a campaign needs at least one trajectory")
    seeds = [int(base_seed) + i for i in range(n)]
    records, infeasible = [], []
    for s in seeds:
        try:
            records.append(run_closed_loop(sys, terminal, noise.with_seed(s), offset, T, x0,
                                           lms_mu=lms_mu, check_props=check_props))
        except InfeasibleStep:
            infeasible.append(s)
    return aggregate(records, sys.mode.value, T, base_seed, seeds, offset.digest(), infeasible)


def compare_campaigns(robust: CampaignMetrics, stochastic: CampaignMetrics) -> dict:
    """Relative mean-cost reduction and paired per-trajectory and per-step costs.

    Raises
    ------
    SeedMismatch
        The campaigns were not run on the same seeds, offset path and length.
    """
    if robust.seeds != stochastic.seeds:
        raise SeedMismatch("campaigns use different noise seeds")
    if robust.offset_digest != stochastic.offset_digest or robust.T != stochastic.T:
        raise SeedMismatch("campaigns use different offset paths or lengths")
    if robust.infeasible_seeds or stochastic.infeasible_seeds:
        raise SeedMismatch("costs are only comparable when every trajectory completed")
    pairs = list(zip(robust.costs, stochastic.costs))
    reduction = (robust.mean_cost - stochastic.mean_cost) / robust.mean_cost
    return {
        "schema": COMPARE_SCHEMA,
        "seeds": robust.seeds,
        "mean_cost_robust": robust.mean_cost,
        "mean_cost_stochastic": stochastic.mean_cost,
        "cost_reduction": reduction,
        "fraction_stochastic_not_worse": sum(s <= r for r, s in pairs) / len(pairs),
        "cost_pairs": [[r, s] for r, s in pairs],
        "stage_cost_mean_robust": robust.stage_cost_mean,
        "stage_cost_mean_stochastic": stochastic.stage_cost_mean,
        "violation_rate_robust": robust.violation_rate,
        "violation_rate_stochastic": stochastic.violation_rate,
    }


def write_trajectory_csv(rec: TrajectoryRecord, path):
    """One row per step: ``t``, state, input, stage cost, ``J*`` and violation flags."""
    n = rec.states.shape[1]
    m = rec.inputs.shape[1]
    ns = rec.state_violations.shape[1]
    ni = rec.input_violations.shape[1]
    header = (["t"] + [f"x{i}" for i in range(n)] + [f"u{i}" for i in range(m)]
              + ["stage_cost", "J_star"] + [f"viol_state{i}" for i in range(ns)]
              + [f"viol_input{i}" for i in range(ni)])
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for t in range(rec.T):
            wr.writerow([t] + [repr(float(v)) for v in rec.states[t]]
                        + [repr(float(v)) for v in rec.inputs[t]]
                        + [repr(float(rec.stage_costs[t])), repr(float(rec.J_star[t]))]
                        + [int(b) for b in rec.state_violations[t]]
                        + [int(b) for b in rec.input_violations[t]])


def write_fps_sidecar(rec: TrajectoryRecord, path):
    doc = {"schema": "adaptive-mpc/fps-snapshots/1", "seed": rec.seed,
           "steps": [{"t": t, "H": H.tolist(), "h": h.tolist()}
                     for t, (H, h) in enumerate(rec.fps_snapshots)]}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")
