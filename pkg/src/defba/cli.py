"""Command line front end.

Exit codes: 0 success, 2 invalid model or input, 3 infeasible LP, 4 solver limit.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .audit import audit_table
from .constraints import build_system
from .discretization import TimeGrid, discretize, horizon_steps
from .horizon import HorizonError, NoExponentialGrowth, estimate_horizon
from .lp import LpStatus, write_lp
from .model import ModelError, load_model, scale, validate
from .robust import UncertaintySet, enumerate_scenarios, load_uncertainty, solve_rdefba
from .solvers import (SolveError, SolveOptions, Trajectory, classify_phases, initial_state,
                      read_trajectory_csv, solve_defba, solve_sdefba)

log = logging.getLogger("defba")

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 2, 3, 4
COMMANDS = ("validate", "defba", "sdefba", "rdefba", "horizon", "audit")


def _num(v):
    """Round floats to 12 significant digits for JSON output."""
    if isinstance(v, dict):
        return {k: _num(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    if isinstance(v, np.ndarray):
        return _num(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if not math.isfinite(v) else float(f"{v:.12g}")
    return v


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_num(data), indent=2, sort_keys=False) + "\n", encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="defba", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--model", required=True, help="model JSON file or bundled model name")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--feas-tol", type=float, default=1e-9)
        p.add_argument("--opt-tol", type=float, default=1e-9)
        if name in ("defba", "sdefba", "rdefba"):
            p.add_argument("--T", type=float, required=True, help="end time")
            p.add_argument("--h", type=float, required=True, help="step size")
            p.add_argument("--classify-tol", type=float, default=1e-4)
            p.add_argument("--export-lp", metavar="FILE",
                           help="write the (first) LP in CPLEX LP format")
        if name in ("sdefba", "rdefba"):
            p.add_argument("--p", type=float, help="prediction horizon (default: estimated)")
        if name in ("rdefba", "horizon"):
            p.add_argument("--uncertainty", help="uncertainty JSON file")
        if name == "horizon":
            p.add_argument("--h", type=float, help="grid step used to round the horizon")
        if name == "audit":
            p.add_argument("trajectory", help="trajectory CSV to re-check")
    return parser


def _configure_logging() -> None:
    level = os.environ.get("DEFBA_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        print(f"warning: DEFBA_LOG={level!r} not in {sorted(levels)}; using error",
              file=sys.stderr)
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _opts(args) -> SolveOptions:
    return SolveOptions(feas_tol=args.feas_tol, opt_tol=args.opt_tol)


def _emit_run(args, out: Path, traj: Trajectory, report: dict) -> None:
    traj.to_csv(out / "trajectory.csv")
    phases = [p.to_dict() for p in classify_phases(traj, args.classify_tol)]
    _write_json(out / "phases.json", phases)
    report = {"command": args.command, "model": traj.info.get("model", ""),
              "units": dict(traj.units), "T": args.T, "h": args.h,
              "objective_value": traj.objective_value,
              "final_biomass": float(traj.biomass()[-1] / traj.alpha), **report,
              "phases": phases}
    _write_json(out / "report.json", report)


def _horizon(model, h, uncertainty: UncertaintySet | None, opts: SolveOptions):
    scaled = scale(model)
    kcats = None
    if uncertainty is not None and uncertainty.entries:
        kcats = enumerate_scenarios(uncertainty, scaled.nominal_kcats()).kcats[0]
    return estimate_horizon(scaled, step=h, kcats=kcats, feas_tol=opts.feas_tol,
                            opt_tol=opts.opt_tol)


def _run(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = load_model(args.model)

    if args.command == "validate":
        diags = validate(model)
        for d in diags:
            print(d, file=sys.stderr)
        if diags:
            return EXIT_INVALID
        print(f"{args.model}: ok ({len(model.species)} species, {len(model.reactions)} reactions)")
        return EXIT_OK

    opts = _opts(args)
    scaled = scale(model)
    uncertainty = None
    if getattr(args, "uncertainty", None):
        uncertainty = load_uncertainty(args.uncertainty)

    if args.command == "horizon":
        est = _horizon(model, args.h, uncertainty, opts)
        report = {"command": "horizon", "units": dict(model.units), **est.report(),
                  "scenario": "minimal" if uncertainty is not None else "nominal"}
        _write_json(out / "report.json", report)
        print(json.dumps(_num(report)))
        return EXIT_OK

    if args.command == "audit":
        system = build_system(scaled)
        table = read_trajectory_csv(args.trajectory, scaled.external_ids + scaled.macro_ids,
                                    scaled.reaction_ids)
        result = audit_table(system, table, tol=max(args.feas_tol, 1e-9))
        print(json.dumps(_num({"ok": result.ok, "violations": result.violations})))
        if not result.ok:
            name, value = result.worst()
            print(f"audit failed: {name} violated by {value:.3g} (relative)", file=sys.stderr)
            return EXIT_INFEASIBLE
        return EXIT_OK

    extra: dict = {}
    start = time.perf_counter()
    p = getattr(args, "p", None)
    if args.command in ("sdefba", "rdefba") and p is None:
        est = _horizon(model, args.h, uncertainty, opts)
        p = est.p_grid
        extra["p_up"] = est.p_up
        extra["horizon_degenerate"] = est.degenerate
        log.info("estimated prediction horizon %.6g (grid %.6g)", est.p_up, p)

    if args.command == "defba":
        traj = solve_defba(scaled, args.T, args.h, opts=opts)
        if args.export_lp:
            y0, p0 = initial_state(scaled)
            write_lp(discretize(build_system(scaled), TimeGrid.covering(args.T, args.h),
                                (y0, p0)).lp, args.export_lp)
    elif args.command == "sdefba":
        traj = solve_sdefba(scaled, args.T, p, args.h, opts=opts)
        extra["p"] = p
        extra["iteration_objectives"] = traj.info["iteration_objectives"]
        if args.export_lp:
            y0, p0 = initial_state(scaled)
            grid = TimeGrid(0.0, args.h, horizon_steps(p, args.h))
            write_lp(discretize(build_system(scaled), grid, (y0, p0)).lp, args.export_lp)
    else:
        if uncertainty is None:
            uncertainty = UncertaintySet()
        result = solve_rdefba(scaled, args.T, p, args.h, uncertainty, opts=opts)
        traj = result.trajectory
        extra["p"] = p
        extra["scenarios"] = [
            {"label": result.tree.label(j),
             "kcats": {r: list(k) for r, k in result.tree.kcats[j].items()
                       if result.tree.kcats[j][r] != scaled.nominal_kcats()[r]},
             "objective_first_iteration": result.iteration_objectives[0][j],
             "objectives": [it[j] for it in result.iteration_objectives]}
            for j in range(result.tree.n_scenarios)]
        for j, st in enumerate(result.scenarios):
            st.to_csv(out / f"scenario_{j}.csv")
        if args.export_lp:
            write_lp(result.coupled.lp, args.export_lp)
    extra["solver"] = {"runtime_s": time.perf_counter() - start,
                       **{k: v for k, v in traj.info.items()
                          if k in ("lp_iterations", "backend", "n_vars", "n_rows",
                                   "horizon_steps", "n_scenarios")}}
    traj.info["model"] = model.name or str(args.model)
    _emit_run(args, out, traj, extra)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ModelError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NoExponentialGrowth as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.status == LpStatus.INFEASIBLE:
            return EXIT_INFEASIBLE
        if exc.status == LpStatus.UNBOUNDED:
            return EXIT_INVALID
        return EXIT_LIMIT
    except HorizonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LIMIT


if __name__ == "__main__":
    sys.exit(main())
