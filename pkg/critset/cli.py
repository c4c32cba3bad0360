"""
Command line

    critset run scenario.json
    critset validate scenario.json
    critset score --map henon --a 6 --b 0.3 --x 0 --y 0 --window 20
"""

import argparse
import logging
import sys

from critset import config, criticality, dynamics
from critset.errors import CritsetError, Escaped, ScenarioError
from critset.experiments import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, run_scenario
from critset.scenario import load_scenario

logger = logging.getLogger(__name__)


def _configure_logging(verbose):
    level = logging.DEBUG if verbose > 1 else logging.INFO if verbose else config.CRITSET_LOG_LEVEL.upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def cmd_run(args):
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    code = run_scenario(scenario)
    if code == EXIT_OK:
        print(f"{scenario.experiment.value} run written to {scenario.output_directory}")
    else:
        print(f"{scenario.experiment.value} run failed; see {scenario.output_directory / 'manifest.json'}", file=sys.stderr)
    return code


def cmd_validate(args):
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"valid {scenario.experiment.value} scenario (digest {scenario.digest[:12]})")
    return EXIT_OK


def cmd_score(args):
    try:
        if args.map == "henon":
            map_def = dynamics.MapDef.henon(args.a, args.b)
        else:
            map_def = dynamics.MapDef.linear([[args.m11, args.m12], [args.m21, args.m22]])
    except (CritsetError, ValueError) as exc:
        print(f"invalid map: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        report = criticality.criticality_score(map_def, [args.x, args.y], args.window, grid=args.grid)
    except Escaped as exc:
        print(f"orbit escaped at step {exc.index}", file=sys.stderr)
        return EXIT_NUMERICAL

    print("\n" + "=" * 60)
    print("CRITICALITY SCORE")
    print("=" * 60)
    print(f"\nMap: {map_def.describe()}")
    print(f"Point: ({args.x}, {args.y})")
    print(f"Window: [-{args.window}, {args.window}]")
    print("\nResults:")
    print(f"  Score: {report.score:.6f}")
    print(f"  Best direction: {report.best_direction:.6f} rad")
    print(f"  Forward score: {report.forward_score:.6f}")
    print(f"  Backward score: {report.backward_score:.6f}")
    verdict = "critical at this window" if report.score >= 0.0 else "not critical at this window"
    print(f"  Verdict: {verdict}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="critset", description="Critical points of surface diffeomorphisms.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario")
    run.set_defaults(func=cmd_run)

    validate = sub.add_parser("validate", help="validate a scenario file without running it")
    validate.add_argument("scenario")
    validate.set_defaults(func=cmd_validate)

    score = sub.add_parser("score", help="criticality score of a single point")
    score.add_argument("--map", choices=["henon", "linear"], default="henon")
    score.add_argument("--a", type=float, default=6.0)
    score.add_argument("--b", type=float, default=0.3)
    for name, default in (("m11", 1.0), ("m12", 0.0), ("m21", 0.0), ("m22", 1.0)):
        score.add_argument(f"--{name}", type=float, default=default, help="linear map entry")
    score.add_argument("--x", type=float, required=True)
    score.add_argument("--y", type=float, required=True)
    score.add_argument("--window", type=int, default=20)
    score.add_argument("--grid", type=int, default=criticality.DIRECTION_GRID)
    score.set_defaults(func=cmd_score)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
