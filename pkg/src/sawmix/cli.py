"""Command-line interface.

Subcommands: simulate (scenario -> data files), run (data -> engine
outputs), eval (outputs -> metrics JSON), report (outputs -> figures).
Exit codes: 0 success, 1 config error, 2 data error, 3 engine degeneracy.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import ConfigError, default_config_path, load_config
from .fileio import write_json
from .metrics import DataError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_DEGENERACY = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; reserve 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sawmix",
                     description="Situation-awareness experiment toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate truth, measurements and labels")
    sim.add_argument("--config", default=None, help="scenario/model YAML "
                     "(default: bundled scenario)")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="override config seed")
    sim.add_argument("--no-noise", action="store_true",
                     help="disable process and sensor noise")

    run = sub.add_parser("run", help="run inference engines over simulated data")
    run.add_argument("--config", default=None)
    run.add_argument("--data", required=True, help="directory written by simulate")
    run.add_argument("--engine", choices=["hmm", "essm", "both"], default="both")
    run.add_argument("--replicates", type=int, default=1)
    run.add_argument("--out", default=None,
                     help="output directory (default: <data>/run)")
    run.add_argument("--seed", type=int, default=None, help="override config seed")

    ev = sub.add_parser("eval", help="compute metrics from run outputs")
    ev.add_argument("--run", required=True, help="run output directory")
    ev.add_argument("--labels", required=True, help="ground-truth labels CSV")
    ev.add_argument("--truth", default=None,
                    help="truth states CSV (default: truth.csv beside the labels)")
    ev.add_argument("--margin", type=int, default=2,
                    help="steps excluded around label transitions")
    ev.add_argument("--out", default=None, help="write metrics JSON here as well")

    rep = sub.add_parser("report", help="render figures from run outputs")
    rep.add_argument("--run", required=True, help="run output directory")
    rep.add_argument("--data", default=None, help="data directory (adds the truth track)")
    rep.add_argument("--config", default=None, help="config YAML (adds region geometry)")
    rep.add_argument("--out", default=None, help="figure directory (default: run dir)")
    return parser


def _config(path_arg) -> "RunConfig":
    return load_config(path_arg if path_arg is not None else default_config_path())


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "simulate":
            cfg = _config(args.config)
            manifest = pipeline.simulate(cfg, args.out, seed=args.seed,
                                         no_noise=args.no_noise)
            print(f"wrote {manifest['steps']} steps to {args.out}")
        elif args.command == "run":
            cfg = _config(args.config)
            out = args.out if args.out is not None else str(Path(args.data) / "run")
            pipeline.run(cfg, args.data, out, engine=args.engine,
                         replicates=args.replicates, seed=args.seed)
            print(f"wrote run outputs to {out}")
        elif args.command == "eval":
            report = pipeline.evaluate(args.run, args.labels, args.truth,
                                       margin=args.margin)
            text = json.dumps(report, indent=2, sort_keys=True)
            print(text)
            if args.out is not None:
                write_json(args.out, report)
        elif args.command == "report":
            from .report import render_run_figures
            cfg = load_config(args.config) if args.config is not None else None
            written = render_run_figures(args.run, data_dir=args.data, cfg=cfg,
                                         out_dir=args.out)
            for path in written:
                print(f"wrote {path}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except pipeline.DegeneracyError as exc:
        print(f"engine degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERACY
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
