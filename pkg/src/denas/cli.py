"""Command-line entry points.

Verbs: ``evolve`` (single run), ``campaign`` (multi-run with resume),
``report`` (aggregate and compare result files), ``encode``/``decode``
(codec inspection). A relative data path in the config resolves against
$DENAS_DATA_DIR. Exit codes: 0 success, 1 configuration error, 2 data error,
3 runtime failure.
"""

import argparse
import json
import sys

from .encoding import decode_interface, encode_layer, format_ip, format_layer, parse_ip, parse_layer
from .exceptions import ConfigError, DataError
from .experiment import RunConfig, report, run_campaign, run_single

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are configuration errors
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _build_parser() -> _Parser:
    parser = _Parser(prog="denas",
                     description="Differential-evolution architecture search")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_config_args(sub):
        sub.add_argument("--config", required=True, help="YAML config file")
        sub.add_argument("--set", dest="overrides", action="append", default=[],
                         metavar="KEY=VALUE",
                         help="override any config key, e.g. evolution.generations=5")

    single = commands.add_parser("evolve", help="one seeded search")
    add_config_args(single)
    single.add_argument("--run-index", type=int, default=0,
                        help="offset added to the base seed")

    multi = commands.add_parser("campaign", help="independent seeded runs with resume")
    add_config_args(multi)

    rep = commands.add_parser("report", help="tabulate and compare campaigns")
    rep.add_argument("results", nargs="+", help="campaign.json files or their directories")
    rep.add_argument("--csv", help="also write the table as CSV")

    enc = commands.add_parser("encode", help="layer text to dotted address")
    enc.add_argument("layers", nargs="+", metavar="LAYER",
                     help='e.g. "conv(filter=5,maps=32,stride=1)"')

    dec = commands.add_parser("decode", help="dotted address to layer text")
    dec.add_argument("addresses", nargs="+", metavar="ADDR", help='e.g. "2.125"')
    return parser


def _load_config(args) -> RunConfig:
    config = RunConfig.from_yaml(args.config)
    if args.overrides:
        config = config.with_overrides(args.overrides)
    return config


def _cmd_evolve(args) -> int:
    config = _load_config(args)
    record = run_single(config, run_index=args.run_index)
    if config.output:
        from pathlib import Path

        out_dir = Path(config.output)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"run_{args.run_index:04d}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(record, fh, indent=1, sort_keys=True)
            fh.write("\n")
        print(f"wrote {path}")
    print(f"seed {record['seed']}: best fitness {record['best_fitness']:.6f}, "
          f"error {record['best_error']:.6f}")
    for line in record["best_architecture"]:
        print(f"  {line}")
    return EXIT_OK


def _cmd_campaign(args) -> int:
    config = _load_config(args)
    result = run_campaign(config)
    agg = result.aggregates
    failed = sum(1 for r in result.records if r["status"] != "ok")
    print(f"campaign {result.name}: {agg['n']} runs ok, {failed} failed")
    if agg["n"]:
        print(f"  mean error {agg['mean_error']:.6f}  std {agg['std_error']:.6f}  "
              f"best {agg['best_error']:.6f}")
    return EXIT_OK


def _cmd_report(args) -> int:
    print(report(args.results, csv_path=args.csv))
    return EXIT_OK


def _cmd_encode(args) -> int:
    for text in args.layers:
        value = encode_layer(parse_layer(text))
        print(f"{text} -> {value} -> {format_ip(value)}")
    return EXIT_OK


def _cmd_decode(args) -> int:
    for text in args.addresses:
        gene = decode_interface(parse_ip(text))
        print(f"{text} -> {format_layer(gene)}")
    return EXIT_OK


_COMMANDS = {
    "evolve": _cmd_evolve,
    "campaign": _cmd_campaign,
    "report": _cmd_report,
    "encode": _cmd_encode,
    "decode": _cmd_decode,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # anything else is a runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
