"""Command-line entry point: ``ris-t2u {roc,ris-size,pca,run} [options]``."""

from __future__ import annotations

import argparse
import json
import sys

from .config import parse_config
from .errors import ConfigError, DimensionError, ExperimentError
from .experiments import run_experiment
from .results import render, write_results

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

COMMANDS = {
    "roc": ("roc", "detection probability vs false-alarm rate over clutter drops"),
    "ris-size": ("ris-size", "smallest RIS meeting a detection target"),
    "pca": ("pca", "association accuracy of RIS codes vs the GPS baseline"),
    "run": (None, "run the experiment named in the config (default: single-run)"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ris-t2u", description="RIS-aided target-to-user association simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON config document")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        p.add_argument("--trials", type=int, help="trials (pca, run) or clutter drops (roc, ris-size)")
        p.add_argument("--out", help="output file; stdout when omitted")
        p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    return ap


def _fail(category: str, code: int, message: str) -> int:
    # one machine-readable line on stderr
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kind = COMMANDS[args.command][0]
    overrides = {"seed": args.seed, "trials": args.trials, "output": args.out, "format": args.format}
    try:
        cfg = parse_config(args.config, overrides, kind=kind)
        records = run_experiment(cfg)
        if cfg.output:
            write_results(records, cfg.output, cfg.format, config=cfg)
        else:
            sys.stdout.write(render(records, cfg.format))
    except ConfigError as e:
        return _fail("config", EXIT_CONFIG, str(e))
    except OSError as e:
        return _fail("io", EXIT_IO, str(e))
    except (ExperimentError, DimensionError) as e:
        return _fail(getattr(e, "category", "runtime"), EXIT_RUNTIME, str(e))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
