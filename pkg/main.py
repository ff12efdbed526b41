"""AutoCam simulator - command line entry point."""
import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor

import config
from report import ReportError, json_safe
from scenario import (calibrate_from_file, load_scenario, replay_csv, run_scenario,
                      summarize_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3


def _run_one(path, seed, output_dir):
    scenario = load_scenario(path, seed=seed, output_dir=output_dir)
    result = run_scenario(scenario)
    return path, result.csv_path, result.summary_path, result.summary['visibility_pct']['any']


def cmd_run(args):
    jobs = max(1, args.jobs)
    if jobs == 1 or len(args.scenarios) == 1:
        outcomes = [_run_one(p, args.seed, args.output_dir) for p in args.scenarios]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_one, p, args.seed, args.output_dir) for p in args.scenarios]
            outcomes = [f.result() for f in futures]
    for path, csv_path, summary_path, visibility in outcomes:
        shown = 'n/a' if visibility is None else f'{visibility:.2f}%'
        print(f"{path}: visibility {shown}, ticks -> {csv_path}, summary -> {summary_path}")


def _print_json(data):
    print(json.dumps(json_safe(data), indent=2))


def cmd_replay(args):
    scenario = load_scenario(args.scenario) if args.scenario else None
    _print_json(replay_csv(args.csv, scenario))


def cmd_summarize(args):
    _print_json(summarize_csv(args.csv))


def cmd_calibrate(args):
    result = calibrate_from_file(args.points, refine_l1=args.refine_l1)
    _print_json({
        'rotation': result.pose.rotation.tolist(),
        'translation': result.pose.translation.tolist(),
        'mean_abs_error': result.mean_abs_error,
        'rms_error': result.rms_error,
        'max_error': result.max_error,
        'iterations': result.iterations,
    })


def build_parser():
    parser = argparse.ArgumentParser(
        prog="autocam", description="Hierarchical camera-placement controller simulator")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for INFO, -vv for DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one or more scenario files")
    run.add_argument("scenarios", nargs="+")
    run.add_argument("--seed", type=int, default=None, help="override the scenario rng_seed")
    run.add_argument("--output-dir", default=None)
    run.add_argument("--jobs", type=int, default=1, help="worker processes for several scenarios")
    run.set_defaults(func=cmd_run)

    replay = sub.add_parser("replay", help="recompute metrics from a tick log")
    replay.add_argument("csv")
    replay.add_argument("--scenario", default=None,
                        help="scenario file supplying camera and placement settings")
    replay.set_defaults(func=cmd_replay)

    summarize = sub.add_parser("summarize", help="summarize the metric columns of a tick log")
    summarize.add_argument("csv")
    summarize.set_defaults(func=cmd_summarize)

    calibrate = sub.add_parser("calibrate", help="register paired touch points")
    calibrate.add_argument("points")
    calibrate.add_argument("--refine-l1", action="store_true")
    calibrate.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format=config.LOG_FORMAT)

    try:
        args.func(args)
    except (ReportError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
