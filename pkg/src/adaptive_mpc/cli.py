"""Command-line entry point: ``adaptive-mpc {synth,run,montecarlo,compare,verify}``."""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .adaptation import FeasibleParameterSet, RateBounds
from .config import bundled_config_path, load_config
from .controller import mpc_step
from .controller.program import dual_row_bounds
from .errors import (AdaptiveMPCError, ArtifactMismatch, EmptySetAfterUpdate, InfeasibleStep,
                     ParseError, SeedMismatch, ValidationError)
from .geometry import Polytope
from .sim import (CampaignMetrics, compare_campaigns, gen_offset, monte_carlo, write_fps_sidecar,
                  write_trajectory_csv)
from .synthesis import TerminalIngredients, TerminalKind, closed_loop, synthesize
from .verification import check_invariance_sampled, polygon_vertices, robustify_by_vertices

log = logging.getLogger("adaptive_mpc")

ARTIFACT_SCHEMA = "adaptive-mpc/synthesis/1"

EXIT_CONFIG = 2
EXIT_MISMATCH = 3
EXIT_INFEASIBLE = 4
EXIT_EMPTY_FPS = 5
EXIT_OTHER = 1


def _dump(doc, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def artifact_doc(cfg, ti: TerminalIngredients):
    return {
        "schema": ARTIFACT_SCHEMA,
        "config_digest": cfg.digest,
        "kind": ti.kind.value,
        "K": ti.K.tolist(),
        "P_f": ti.P_f.tolist(),
        "terminal_set": {"H": ti.X_term.H.tolist(), "h": ti.X_term.h.tolist()},
        "quantiles": None if ti.quantiles is None else ti.quantiles.tolist(),
        "rate_bounds": {"nu_lower": ti.rate.nu_lower.tolist(), "nu_upper": ti.rate.nu_upper.tolist()},
    }


def load_artifact(path, cfg) -> TerminalIngredients:
    doc = json.loads(Path(path).read_text())
    if doc.get("config_digest") != cfg.digest:
        raise ArtifactMismatch(f"artifact {path} was synthesised from a different configuration")
    q = doc["quantiles"]
    return TerminalIngredients(
        np.array(doc["K"]), np.array(doc["P_f"]),
        Polytope(doc["terminal_set"]["H"], doc["terminal_set"]["h"]), TerminalKind(doc["kind"]),
        None if q is None else np.array(q),
        RateBounds(np.array(doc["rate_bounds"]["nu_lower"]), np.array(doc["rate_bounds"]["nu_upper"])))


def _terminal(args, cfg):
    if args.artifact:
        return load_artifact(args.artifact, cfg)
    log.info("no artifact given; synthesising in memory")
    return synthesize(cfg.system, cfg.noise)


def _config_path(name):
    """A file path, or the name of a bundled example ("robust" / "stochastic")."""
    if not Path(name).exists() and name in ("robust", "stochastic"):
        return bundled_config_path(name)
    return name


def _config(args):
    cfg = load_config(_config_path(args.config))
    return cfg.with_overrides(n_traj=getattr(args, "trajectories", None), T=args.steps,
                              base_seed=args.seed, out=args.out)


def cmd_synth(args):
    cfg = load_config(_config_path(args.config))
    ti = synthesize(cfg.system, cfg.noise)
    out = Path(args.out or Path(cfg.out) / "artifact.json")
    _dump(artifact_doc(cfg, ti), out)
    print(out)
    return 0


def _write_campaign(cfg, metrics, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for rec in metrics.records:
        write_trajectory_csv(rec, out / f"trajectory_{rec.seed}.csv")
        write_fps_sidecar(rec, out / f"fps_{rec.seed}.json")
    (out / "metrics.json").write_text(metrics.to_json())
    return out / "metrics.json"


def _campaign(args, n):
    cfg = _config(args)
    ti = _terminal(args, cfg)
    offset = gen_offset(cfg.system, cfg.theta_0, cfg.delta, cfg.T)
    metrics = monte_carlo(cfg.system, ti, n if n is not None else cfg.n_traj, cfg.base_seed,
                          cfg.noise, offset, cfg.T, cfg.x0, lms_mu=cfg.lms_mu)
    path = _write_campaign(cfg, metrics, cfg.out)
    print(path)
    return EXIT_INFEASIBLE if metrics.infeasible_count else 0


def cmd_run(args):
    return _campaign(args, 1)


def cmd_montecarlo(args):
    return _campaign(args, None)


def cmd_compare(args):
    a = CampaignMetrics.from_dict(json.loads(Path(args.metrics[0]).read_text()))
    b = CampaignMetrics.from_dict(json.loads(Path(args.metrics[1]).read_text()))
    if {a.mode, b.mode} == {"robust", "stochastic"} and a.mode == "stochastic":
        a, b = b, a
    doc = compare_campaigns(a, b)
    if args.out:
        _dump(doc, args.out)
        print(args.out)
    else:
        print(json.dumps(doc, sort_keys=True, indent=2))
    return 0


def cmd_verify(args):
    cfg = _config(args)
    ti = _terminal(args, cfg)
    sys_ = cfg.system
    theta_pts = polygon_vertices(sys_.Omega) @ sys_.E.T
    inv = check_invariance_sampled(ti.X_term, closed_loop(sys_, ti.K), sys_.W, theta_pts,
                                   n_samples=2000, seed=cfg.base_seed)
    # duality check of the first program along the configured start state
    fps = FeasibleParameterSet.initial(sys_.Omega)
    _, _, diag = mpc_step(sys_, cfg.x0, fps, ti)
    sm, us = diag.model, diag.stack
    bounds = dual_row_bounds(sm, us, diag.M)
    coef = sm.F @ diag.M + sm.G
    blocks = [sys_.W.to_polytope()] * sm.N + list(us.theta_sets)
    gap = 0.0
    for r in range(sm.rows):
        row = np.concatenate([coef[r], sm.E_bold.T @ coef[r] + sm.G_theta[r]])
        gap = max(gap, abs(bounds[r] - robustify_by_vertices(row, blocks)))
    doc = {"schema": "adaptive-mpc/verify/1", "config_digest": cfg.digest,
           "terminal_invariance": inv.to_dict(), "duality_max_gap": gap,
           "rows_checked": int(sm.rows)}
    out = Path(args.out or Path(cfg.out) / "verify.json")
    _dump(doc, out)
    print(out)
    return 0 if inv.passed() and gap <= 1e-6 else EXIT_OTHER


def build_parser():
    ap = argparse.ArgumentParser(prog="adaptive-mpc", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, artifact=True):
        p.add_argument("--config", required=True,
                       help="experiment YAML file, or 'robust'/'stochastic' for a bundled example")
        if artifact:
            p.add_argument("--artifact", help="synthesis artifact (synthesised on the fly if absent)")
        p.add_argument("--seed", type=int, help="override simulation.base_seed")
        p.add_argument("--steps", type=int, help="override simulation.T")
        p.add_argument("--out", help="output path")

    p = sub.add_parser("synth", help="compute gain, terminal cost, terminal set, quantiles")
    p.add_argument("--config", required=True,
                   help="experiment YAML file, or 'robust'/'stochastic' for a bundled example")
    p.add_argument("--out", help="artifact path (default <simulation.out>/artifact.json)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="simulate one closed-loop trajectory")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("montecarlo", help="simulate a seeded campaign")
    common(p)
    p.add_argument("--trajectories", type=int, help="override simulation.n_traj")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("compare", help="compare a robust and a stochastic campaign")
    p.add_argument("metrics", nargs=2, help="two metrics.json files")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="oracle checks of the terminal set and the dual bounds")
    common(p)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArtifactMismatch, SeedMismatch) as exc:
        print(f"mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except InfeasibleStep as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except EmptySetAfterUpdate as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return EXIT_EMPTY_FPS
    except AdaptiveMPCError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
