"""Command-line entry point.

Exit codes: 0 success, 2 invalid config, 3 data error, 4 algorithm failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from . import plotdata
from .config import ALGORITHMS, load_config
from .errors import ConfigError, DataError
from .pipeline import RunManifest, run_pipeline

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_ALGORITHM = 0, 2, 3, 4

# stage lists behind each subcommand; "pipeline" uses the config's own list
COMMAND_STAGES = {
    "clean": ["clean"],
    "rfm": ["clean", "rfm"],
    "cluster": ["cluster"],
    "evaluate": ["elbow", "kdistance"],
}


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = yaml.safe_load(raw)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="transactions CSV")
    common.add_argument("--config", help="YAML/JSON config file, or a manifest.json from an earlier run")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--algo", choices=[*ALGORITHMS, "all"], help="restrict clustering to one algorithm")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config key, e.g. --set dbscan.eps=0.25 (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="retailseg", description="RFM segmentation and clustering of retail ledgers.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("clean", parents=[common], help="parse and clean the ledger, write the cleaning report")
    sub.add_parser("rfm", parents=[common], help="clean, then score customers and assign segments")
    sub.add_parser("cluster", parents=[common], help="run the clusterers and score them by silhouette")
    sub.add_parser("evaluate", parents=[common], help="elbow curve and k-distance curve")
    sub.add_parser("pipeline", parents=[common], help="run every stage listed in the config")
    p = sub.add_parser("plotdata", parents=[common], help="write plot-ready CSVs for a finished run")
    p.add_argument("--figure", action="append", choices=plotdata.FIGURES,
                   help="figure id (repeatable); default is every figure the run supports")
    return ap


def _plotdata(args) -> int:
    if not args.out:
        raise ConfigError("plotdata needs --out pointing at a finished run")
    try:
        manifest = RunManifest.load(args.out)
    except FileNotFoundError:
        raise ConfigError(f"no manifest.json in {args.out}") from None
    for fig in args.figure or plotdata.available_figures(manifest):
        path = plotdata.emit_plot_data(manifest, fig)
        print(path)
    manifest.write()
    return EXIT_OK


def run(args) -> int:
    if args.command == "plotdata":
        return _plotdata(args)
    overrides = _parse_set(args.set)
    overrides.update({"input": args.input, "output_dir": args.out, "seed": args.seed})
    if args.algo and args.algo != "all":
        overrides["algorithms"] = [args.algo]
    if args.command in COMMAND_STAGES:
        overrides["stages"] = COMMAND_STAGES[args.command]
    cfg = load_config(args.config, overrides)
    manifest = run_pipeline(cfg)
    for failure in manifest.failures:
        print(f"{failure['algorithm']}: {failure['error']}", file=sys.stderr)
    print(manifest.root / "manifest.json")
    return EXIT_ALGORITHM if manifest.failures else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
