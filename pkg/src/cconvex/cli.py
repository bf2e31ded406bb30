"""Command-line front end: configure a cost, run analyses, emit reports.

Exit status: 0 on completion, 2 on meaningful negative findings (for the
counterexample command: the search found no quasi-convexity violation), 1 on
errors with a diagnostic line naming the failing stage.

Reports are canonical JSON (sorted keys, 17-significant-digit floats) so a
given (config, seed) reproduces the report byte-for-byte; wall-clock timings
go to a separate sidecar to keep the main report deterministic.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .chords import ChordSolver, LiftedPoint, connect, is_alternative_c_convex
from .config import RunConfig
from .convexity import c_envelope
from .costs import estimate_constants
from .counterexample import run_pipeline
from .errors import CConvexError, ConfigError, NoViolationFound
from .geometry import check_domain_c_convexity
from .gridfn import GridFunction
from .mtw import certify_mtw, check_loeper, chord_equivalence_probe, estimate_qqconv
from .report import SCHEMA_VERSION, atomic_write, summary_text, to_canonical_json

COMMANDS = ("analyze", "chord", "envelope", "check-convexity", "counterexample",
            "constants")


def _mtw_section(rep):
    return {
        "verdict": rep.verdict,
        "min_value": rep.min_value,
        "samples": rep.samples,
    }


def _loeper_section(rep):
    out = {
        "violated": rep.certificate is not None,
        "best_margin": rep.best_margin,
        "samples": rep.samples,
        "skipped_segments": rep.skipped_segments,
    }
    if rep.certificate is not None:
        out["certificate"] = rep.certificate.to_dict()
    return out


def cmd_analyze(cfg: RunConfig, model, outdir, timings):
    analyses = {}
    artifacts = []
    t = time.perf_counter()
    consts = estimate_constants(model, cfg.budget("constants"), int(cfg.get("seed")))
    timings["constants"] = time.perf_counter() - t
    analyses["constants"] = {
        "lip_c": consts.lip_c, "alpha": consts.alpha, "beta": consts.beta, "L": consts.L,
    }

    t = time.perf_counter()
    mtw = certify_mtw(model, cfg.budget("mtw"), seed=int(cfg.get("seed")),
                      tolerance=cfg.get("tolerance.certify"))
    timings["mtw"] = time.perf_counter() - t
    analyses["mtw"] = _mtw_section(mtw)

    t = time.perf_counter()
    loe = check_loeper(model, cfg.budget("loeper"), int(cfg.get("t_grid_size")),
                       seed=int(cfg.get("seed")))
    timings["loeper"] = time.perf_counter() - t
    analyses["loeper"] = _loeper_section(loe)
    if loe.certificate is not None:
        path = os.path.join(outdir, "violation_certificate.csv")
        atomic_write(path, (loe.certificate.to_csv_row() + "\n").encode())
        artifacts.append("violation_certificate.csv")

    t = time.perf_counter()
    qq = estimate_qqconv(model, cfg.budget("qqconv"), seed=int(cfg.get("seed")),
                         t_grid_size=int(cfg.get("t_grid_size")))
    timings["qqconv"] = time.perf_counter() - t
    analyses["qqconv"] = {"C": qq.C, "samples": qq.samples}

    t = time.perf_counter()
    probe = chord_equivalence_probe(model, cfg.budget("chord_probe"),
                                    seed=int(cfg.get("seed")),
                                    t_grid_size=int(cfg.get("t_grid_size")),
                                    y_shape=cfg.y_lattice_shape())
    timings["chord_probe"] = time.perf_counter() - t
    analyses["chord_probe"] = {"max_deviation": probe.max_deviation,
                               "samples": probe.samples}
    return analyses, artifacts


def cmd_chord(cfg: RunConfig, model, outdir, timings):
    dim = model.dimension
    try:
        x0 = cfg.point("chord.x0", dim)
        x1 = cfg.point("chord.x1", dim)
    except ConfigError:
        x0 = np.zeros(dim)
        x1 = np.zeros(dim)
        x1[0] = 1.0
    X0 = LiftedPoint(x0, float(cfg.get("chord.u0", 0.0) or 0.0))
    X1 = LiftedPoint(x1, float(cfg.get("chord.u1", 0.0) or 0.0))

    t = time.perf_counter()
    solver = ChordSolver(model, cfg.y_lattice_shape())
    shape = cfg.lattice_shape()
    X = model.domain.X
    surface = GridFunction("X", X.lo, X.hi, np.zeros(shape))
    vals = solver.lattice_values(X0, X1, surface.nodes())
    surface.values = vals.reshape(shape)
    timings["chord_surface"] = time.perf_counter() - t

    t = time.perf_counter()
    conn = connect(model, X0, X1, solver=solver)
    timings["connect"] = time.perf_counter() - t

    mid = 0.5 * (x0 + x1)
    analyses = {"chord": {
        "u0p": conn.u0p,
        "u1p": conn.u1p,
        "touching_y": conn.touching.y,
        "touching_h": conn.touching.h,
        "touching_residuals": list(conn.residuals),
        "midpoint": mid,
        "midpoint_value": solver.eval(X0, X1, mid),
    }}
    path = os.path.join(outdir, "chord_surface.csv")
    atomic_write(path, surface.to_csv().encode())
    return analyses, ["chord_surface.csv"]


def _load_or_demo_phi(cfg, model):
    path = cfg.get("input.grid")
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            return GridFunction.from_csv(fh.read())
    # demo: a concave bump, visibly not c-convex for convex-type costs
    X = model.domain.X
    center = X.center
    scale = float(np.max(X.hi - X.lo))

    def bump(pts):
        return -np.sum(((pts - center) / scale) ** 2, axis=1)

    return GridFunction.from_callable("X", X, cfg.lattice_shape(), bump)


def cmd_envelope(cfg: RunConfig, model, outdir, timings):
    phi = _load_or_demo_phi(cfg, model)
    t = time.perf_counter()
    rep = c_envelope(model, phi, tolerance=cfg.get("tolerance.envelope"),
                     y_shape=cfg.y_lattice_shape())
    timings["envelope"] = time.perf_counter() - t
    atomic_write(os.path.join(outdir, "envelope.csv"), rep.envelope.to_csv().encode())
    atomic_write(os.path.join(outdir, "input_phi.csv"), phi.to_csv().encode())
    analyses = {"envelope": {
        "max_gap": rep.max_gap,
        "is_c_convex": rep.is_c_convex,
    }}
    return analyses, ["envelope.csv", "input_phi.csv"]


def cmd_check_convexity(cfg: RunConfig, model, outdir, timings):
    analyses = {}
    t = time.perf_counter()
    dom = check_domain_c_convexity(model, cfg.budget("loeper") // 4,
                                   seed=int(cfg.get("seed")))
    timings["domain_c_convexity"] = time.perf_counter() - t
    analyses["domain_c_convexity"] = {
        "holds": dom.holds,
        "worst_midpoint_violation": dom.worst_midpoint_violation,
        "checked": dom.checked,
    }
    path = cfg.get("input.grid")
    if path:
        phi = _load_or_demo_phi(cfg, model)
        t = time.perf_counter()
        env = c_envelope(model, phi, tolerance=cfg.get("tolerance.envelope"),
                         y_shape=cfg.y_lattice_shape())
        alt = is_alternative_c_convex(model, phi, cfg.budget("alt_pairs"),
                                      seed=int(cfg.get("seed")),
                                      tolerance=cfg.get("tolerance.alt"),
                                      y_shape=cfg.y_lattice_shape())
        timings["function_convexity"] = time.perf_counter() - t
        analyses["function_convexity"] = {
            "is_c_convex": env.is_c_convex,
            "envelope_gap": env.max_gap,
            "is_alternative_c_convex": alt.holds,
            "alt_worst_gap": alt.worst_gap,
        }
    return analyses, []


def cmd_constants(cfg: RunConfig, model, outdir, timings):
    t = time.perf_counter()
    consts = estimate_constants(model, cfg.budget("constants"), int(cfg.get("seed")))
    timings["constants"] = time.perf_counter() - t
    atomic_write(os.path.join(outdir, "constants.json"), (consts.to_json() + "\n").encode())
    analyses = {"constants": {
        "lip_c": consts.lip_c, "alpha": consts.alpha, "beta": consts.beta,
        "L": consts.L, "omega_scales": len(consts.omega_table),
    }}
    return analyses, ["constants.json"]


def cmd_counterexample(cfg: RunConfig, model, outdir, timings):
    t = time.perf_counter()
    result = run_pipeline(model, budget=cfg.budget("counterexample"),
                          seed=int(cfg.get("seed")), shape=cfg.lattice_shape(),
                          verify_budget=cfg.budget("verify"),
                          y_shape=cfg.y_lattice_shape())
    timings["pipeline"] = time.perf_counter() - t
    artifacts = []
    analyses = {"counterexample": {
        "verdict": result.verdict,
        "structured_violation": result.structured.to_dict(),
        "attempts": len(result.attempts),
    }}
    if result.report is not None:
        analyses["counterexample"].update({
            "alt_holds": result.report.alt_holds,
            "alt_worst_gap": result.report.alt_worst_gap,
            "c_convex_gap": result.report.c_convex_gap,
            "epsilon": result.params.epsilon,
            "delta": result.params.delta,
            "tilt_radius": result.params.r,
            "subdiff_empty_at": result.report.subdiff_empty_at,
        })
    if result.phi is not None:
        atomic_write(os.path.join(outdir, "phi_epsilon.csv"),
                     result.phi.grid.to_csv().encode())
        artifacts.append("phi_epsilon.csv")
    return analyses, artifacts


_DISPATCH = {
    "analyze": cmd_analyze,
    "chord": cmd_chord,
    "envelope": cmd_envelope,
    "check-convexity": cmd_check_convexity,
    "counterexample": cmd_counterexample,
    "constants": cmd_constants,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cconvex",
                                 description="cost-convexity analysis toolkit")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", metavar="PATH", help="dotted-key config file")
    ap.add_argument("--seed", type=int, help="override config seed")
    ap.add_argument("--output", metavar="DIR", help="override output directory")
    ap.add_argument("--budget-scale", type=float, help="scale all sample budgets")
    ap.add_argument("--summary", action="store_true",
                    help="print the human-readable digest to stdout")
    return ap


def run(command: str, cfg: RunConfig) -> dict:
    """Dispatch a command and assemble the report dictionary."""
    model = cfg.build_model()
    outdir = cfg.get("output_dir")
    os.makedirs(outdir, exist_ok=True)
    timings = {}
    started = time.perf_counter()
    analyses, artifacts = _DISPATCH[command](cfg, model, outdir, timings)
    wall = time.perf_counter() - started
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "seed": int(cfg.get("seed")),
        "config": cfg.echo(),
        "cost": model.name,
        "analyses": analyses,
        "artifacts": sorted(artifacts),
    }
    sidecar = {"wall_time_s": wall, "stages": timings}
    atomic_write(os.path.join(outdir, "report.json"), to_canonical_json(report))
    atomic_write(os.path.join(outdir, "timings.json"), to_canonical_json(sidecar))
    report["wall_time_s"] = wall
    return report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg.override("seed", args.seed)
        if args.output is not None:
            cfg.override("output_dir", args.output)
        if args.budget_scale is not None:
            cfg.override("budget_scale", args.budget_scale)
    except (ConfigError, OSError) as exc:
        print(f"config: {exc}", file=sys.stderr)
        return 1

    try:
        report = run(args.command, cfg)
    except NoViolationFound as exc:
        # ran fine, found nothing: scripted searches need the distinction
        report = {
            "schema_version": SCHEMA_VERSION,
            "command": args.command,
            "seed": int(cfg.get("seed")),
            "config": cfg.echo(),
            "analyses": {"counterexample": {"verdict": False,
                                            "no_violation_found": str(exc)}},
            "artifacts": [],
        }
        atomic_write(os.path.join(cfg.get("output_dir"), "report.json"),
                     to_canonical_json(report))
        print(f"counterexample: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config: {exc}", file=sys.stderr)
        return 1
    except CConvexError as exc:
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io: {exc}", file=sys.stderr)
        return 1

    if args.summary:
        sys.stdout.write(summary_text(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
