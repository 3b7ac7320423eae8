"""Command line entry point: ``twisty <stage> [--preset NAME | --config FILE] ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline as pl

EXIT_OK, EXIT_CONFIG, EXIT_PIPELINE = 0, 2, 3

COMMANDS = {
    "synthesize": "synthesize",
    "embed": "embed",
    "persist": "persist",
    "coords": "coords",
    "run": "coords",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="twisty", description=__doc__)
    parser.add_argument("--list-presets", action="store_true", help="print preset names and exit")
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the pipeline through the {COMMANDS[name]} stage")
        p.add_argument("--preset", help=f"one of: {', '.join(pl.PRESET_NAMES)}")
        p.add_argument("--config", help="JSON config file (applied on top of --preset)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--field", help="comma separated field characteristics, e.g. 2,3")
        p.add_argument("--no-plots", action="store_true", help="skip SVG figures")
        p.add_argument("--series", help="CSV time series (time,value) to use instead of synthesis")
        p.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args):
    cfg = pl.preset(args.preset) if args.preset else pl.ExperimentConfig()
    if args.config:
        try:
            with open(args.config) as fh:
                overrides = json.load(fh)
        except OSError as exc:
            raise pl.ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise pl.ConfigError(f"{args.config}: invalid JSON ({exc})") from exc
        if not isinstance(overrides, dict):
            raise pl.ConfigError("config file must hold a JSON object")
        if overrides.get("preset") and not args.preset:
            cfg = pl.preset(overrides["preset"])
        cfg = cfg.merged(overrides)
    flags = {}
    if args.field:
        try:
            fields = [int(x) for x in args.field.split(",") if x.strip()]
        except ValueError as exc:
            raise pl.ConfigError(f"bad --field value {args.field!r}") from exc
        flags["persistence"] = {"fields": fields}
    if args.out:
        flags["outputs"] = {"directory": args.out}
    if args.no_plots:
        flags.setdefault("outputs", {})["plots"] = False
    if args.series:
        flags["series_path"] = args.series
    return cfg.merged(flags)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_presets:
        print("\n".join(pl.PRESET_NAMES))
        return EXIT_OK
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except pl.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dump_config:
        print(cfg.to_json())
        return EXIT_OK
    try:
        bundle = pl.run_experiment(cfg, stop_after=COMMANDS[args.command])
    except pl.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except pl.PipelineError as exc:
        print(f"pipeline error in stage {exc.stage}: {exc.cause}", file=sys.stderr)
        return EXIT_PIPELINE
    print(json.dumps({"directory": str(bundle.directory), "status": bundle.manifest["status"],
                      "summary": bundle.manifest["summary"]}, indent=1, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
