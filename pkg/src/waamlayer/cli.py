"""Command-line interface.

Exit codes: 0 success, 2 configuration or validation error, 3 infeasible
geometry, 4 solver failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, kernels
from .config import load_config, scenario_from_config
from .errors import (
    ConfigError, DomainError, GeometryInfeasibleError, NonInvertibleError,
    PlanInfeasibleError, RankDeficiencyError, ShapeError, SolverError, WaamError,
)
from .harness import (
    compare_scenarios, export_results, plan_scenario, run_comparison, run_scenario,
)
from .model import calibrate, parse_samples, write_coefficients
from .planner import compute_slice_geometry, nominal_velocity_plan, write_plans

log = logging.getLogger("waamlayer")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4, 5


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", required=True, help="run config (INI)")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, help="override [sensor] seed")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override a config value; repeatable")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="waamlayer",
        description="Angled-layer WAAM planning and closed-loop height control.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit the power-law model to v_t,dh samples")
    p.add_argument("samples", help="two-column file with header v_t,dh ('-' for stdin)")
    p.add_argument("--out", default="coefficients.json", help="coefficients document to write")
    p.add_argument("--label", default="", help="tag stored with the coefficients")
    p.add_argument("-v", "--verbose", action="count", default=0)

    common = _common()
    sub.add_parser("plan", parents=[common], help="slice the part and write the nominal plan")
    sub.add_parser("check-feasibility", parents=[common],
                   help="report whether the part fits the process envelope")
    sub.add_parser("simulate", parents=[common], help="run the configured scenario")
    p = sub.add_parser("compare", parents=[common], help="run OC, OH, CC and CH side by side")
    p.add_argument("--jobs", type=int, default=1, help="scenarios to run concurrently")
    return parser


def _scenario(args):
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"sensor.seed={args.seed}")
    return scenario_from_config(load_config(args.config, overrides))


def cmd_calibrate(args) -> int:
    if args.samples == "-":
        text, source = sys.stdin.read(), "<stdin>"
    else:
        path = Path(args.samples)
        try:
            text = path.read_text()
        except OSError as exc:
            print(f"error: cannot read {path}: {exc.strerror}", file=sys.stderr)
            return EXIT_IO
        source = str(path)
    result = calibrate(parse_samples(text, source), label=args.label)
    write_coefficients(args.out, result)
    c = result.coeffs
    print(f"a = {c.a:.6f}  b = {c.b:.6f}  R^2 = {result.r_squared:.6f}  "
          f"residual norm = {result.residual_norm:.3g}  (n = {result.n_samples})")
    print(f"wrote {args.out}")
    return EXIT_OK


def _print_plan(summary):
    b = summary.bounds
    print(f"height bounds     [{b.dh_min:.4f}, {b.dh_max:.4f}] mm  "
          f"(speeds [{b.v_t_min}, {b.v_t_max}] mm/s)")
    print(f"theta feasible    [{summary.theta_min:.6f}, {summary.theta_max:.6f}] rad")
    print(f"theta used        {summary.theta:.6f} rad")
    print(f"layers            {summary.n_base} base + {summary.n_tilted} tilted "
          f"= {summary.n_layers}")
    print(f"bound margins     lower {summary.lower_margin:.4f} mm, "
          f"upper {summary.upper_margin:.4f} mm")


def cmd_plan(args) -> int:
    spec = _scenario(args)
    geom, summary = plan_scenario(spec)
    nominal_velocity_plan(summary.plans, spec.model, spec.bounds)
    _print_plan(summary)
    print(f"verdict           feasible under the {spec.planning_model} model")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_plans(out / "plan.json", summary, geom)
    print(f"wrote {out / 'plan.json'}")
    return EXIT_OK


def cmd_check_feasibility(args) -> int:
    spec = _scenario(args)
    geom = compute_slice_geometry(spec.part, spec.n_segments)
    r = geom.r_of_segment
    b = spec.bounds
    print(f"radius ratio      r_min/r_max = {r.min() / r.max():.4f}")
    print(f"height ratio      dh_min/dh_max = {b.dh_min / b.dh_max:.4f}")
    try:
        _, summary = plan_scenario(spec)
        for name, model in (("cold", spec.cold), ("hot", spec.hot)):
            try:
                nominal_velocity_plan(summary.plans, model, b)
                print(f"{name} model       feasible")
            except PlanInfeasibleError as exc:
                print(f"{name} model       infeasible: {exc}")
    except GeometryInfeasibleError as exc:
        print(f"verdict           INFEASIBLE: {exc}")
        return EXIT_INFEASIBLE
    print(f"verdict           FEASIBLE, theta = {summary.theta:.6f} rad, "
          f"{summary.n_layers} layers")
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _scenario(args)
    trace = run_scenario(spec)
    report = compare_scenarios([trace])
    paths = export_results([trace], args.out, report)
    print(report.format_table())
    if trace.standoff_exceeded_at is not None:
        print(f"standoff limit exceeded from layer {trace.standoff_exceeded_at}")
    print(f"wrote {len(paths)} artifacts to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    spec = _scenario(args)
    traces = run_comparison(spec, jobs=args.jobs)
    report = compare_scenarios(traces)
    paths = export_results(traces, args.out, report)
    print(report.format_table())
    print(f"wrote {len(paths)} artifacts to {args.out}")
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "plan": cmd_plan,
    "check-feasibility": cmd_check_feasibility,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    log.debug("kernel backend: %s", kernels.BACKEND)
    try:
        return COMMANDS[args.command](args)
    except (GeometryInfeasibleError, PlanInfeasibleError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverError as exc:
        done = exc.partial_trace.n_layers if exc.partial_trace is not None else 0
        print(f"solver failure: {exc} ({done} layers completed)", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, DomainError, ShapeError, RankDeficiencyError,
            NonInvertibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except WaamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
