"""Command-line entry point: ``wgqed run|figure|compare|sweep``.

Exit codes: 0 success, 2 parse error, 3 solver error, 4 law assertion failed.
"""
import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, scenario
from ._accel import backend_name
from .errors import ParseError, WgqedError

EXIT_OK, EXIT_PARSE, EXIT_SOLVER, EXIT_LAW = 0, 2, 3, 4


def _load(path):
    try:
        return scenario.load_scenario(path)
    except OSError as exc:
        raise ParseError(str(exc), str(path)) from None


def _with_solver(cfg, solver):
    if solver in (None, "both"):
        return cfg
    return replace(cfg, solvers=(solver,), outputs=None)


def cmd_run(args):
    cfg = _with_solver(_load(args.scenario), args.solver)
    result = scenario.run_scenario(cfg, args.out)
    for name, path in result.files.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_figure(args):
    configs = scenario.figure_preset(args.name)
    out = Path(args.out)
    rows = []
    for cfg in configs:
        scenario.run_scenario(cfg, out / cfg.name)
        rep = scenario.compare_solvers(cfg)
        rows.append({"point": cfg.name, **{k: getattr(rep, k) for k in (
            "max_abs_deviation", "plateau_estimate", "plateau_predicted", "plateau_error",
            "oscillation_amplitude", "law_status")}, "error": ""})
        print(f"{cfg.name}: plateau {rep.plateau_estimate:.4f} "
              f"(law {rep.plateau_predicted:.4f}, {rep.law_status}), "
              f"solver deviation {rep.max_abs_deviation:.2e}")
    scenario.write_summary(out / "summary.csv", rows, ["max_abs_deviation"])
    return EXIT_OK


def cmd_compare(args):
    cfg = _load(args.scenario)
    rep = scenario.compare_solvers(cfg)
    print(json.dumps(rep.as_dict(), indent=2, sort_keys=True))
    if args.assert_law and rep.law_status == "broken":
        return EXIT_LAW
    return EXIT_OK


def _parse_axis(text):
    if "=" not in text:
        raise ParseError("axis must look like key=v1,v2,...", text)
    key, values = text.split("=", 1)
    values = [v.strip() for v in values.split(",") if v.strip()]
    if not values:
        raise ParseError("axis has no values", key)
    return key.strip(), values


def cmd_sweep(args):
    cfg = _load(args.scenario)
    axes = dict(_parse_axis(a) for a in args.axis or [])
    rows = scenario.sweep(cfg, axes, jobs=args.jobs, out_dir=args.out,
                          max_points=args.max_points)
    for row in rows:
        axis_part = " ".join(f"{k}={row[k]}" for k in axes)
        extra = f" [{row['error']}]" if row["error"] else ""
        print(f"point {row['point']}: {axis_part} -> {row['law_status']} "
              f"(plateau {row['plateau_estimate']:.4f} vs {row['plateau_predicted']:.4f}){extra}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="wgqed", description=__doc__.splitlines()[0])
    parser.add_argument(
        "--version", action="version",
        version=f"wgqed {__version__} (scenario schema {scenario.SCHEMA_VERSION}, "
                f"kernels: {backend_name()})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve one scenario and write CSV + metadata")
    p.add_argument("scenario")
    p.add_argument("--out", default=None)
    p.add_argument("--solver", choices=("numeric", "analytic", "both"), default="both")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("figure", help="reproduce a figure preset")
    p.add_argument("name", choices=scenario.FIGURES)
    p.add_argument("--out", default="figures")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("compare", help="cross-check the two solvers")
    p.add_argument("scenario")
    p.add_argument("--assert-law", action="store_true",
                   help="exit with status 4 if the trapping law is broken")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="run a parameter grid")
    p.add_argument("scenario")
    p.add_argument("--axis", action="append", help="key=v1,v2,... (repeatable)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--max-points", type=int, default=1000)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (WgqedError, ArithmeticError, ValueError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
