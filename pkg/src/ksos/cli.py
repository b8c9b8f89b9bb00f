"""Command-line entry point: ``ksos run`` and ``ksos plot``."""
import argparse
import logging
import os
import sys

from .errors import KsosError
from .experiments import VIEWS, ExperimentConfig, emit_plot_data, run_experiment, write_results

log = logging.getLogger("ksos")


def _seed_list(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers: {text!r}") from exc


def build_parser():
    parser = argparse.ArgumentParser(prog="ksos", description="KernelSOS experiment runner")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--seeds", type=_seed_list, help="comma-separated seeds, overrides the config")
    run.add_argument("--out", help="output directory for the JSON-lines result file")

    plot = sub.add_parser("plot", help="aggregate a result file into a CSV table")
    plot.add_argument("--in", dest="infile", required=True)
    plot.add_argument("--view", required=True, choices=sorted(VIEWS))
    plot.add_argument("--out", help="CSV path (default: next to the result file)")
    return parser


def _run(args):
    cfg = ExperimentConfig.from_file(args.config, seeds=args.seeds)
    path = cfg.output
    if args.out:
        path = os.path.join(args.out, os.path.basename(path))
    rows = run_experiment(cfg)
    write_results(rows, path)
    failed = sum(r["status"] != "ok" for r in rows)
    log.info("wrote %d rows to %s (%d failed)", len(rows), path, failed)
    print(path)
    return 2 if failed else 0


def _plot(args):
    print(emit_plot_data(args.infile, args.view, args.out))
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args) if args.command == "run" else _plot(args)
    except (KsosError, OSError, ValueError) as exc:
        print(f"ksos: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
