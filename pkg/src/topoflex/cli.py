"""``topoflex`` command line: validate, select-actions, run, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml
from pydantic import ValidationError

from .grid import DataError, validate
from .study import StudyConfig, config_help, load_config, load_network, load_report, run_study, select_controllable_buses, write_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVE = 4

EPILOG = f"""\
exit codes:
  0  success
  2  configuration error (bad path, unknown key, invalid value, bad flag)
  3  data error (dataset missing or malformed, network fails validation)
  4  solve error (a solve failed where the command cannot continue)

config keys (YAML mapping; any key can also be given as --set KEY=VALUE):
  {'key':<22} {'default':<22} meaning
{config_help()}
"""


class _ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse exits with 2 already; keep the diagnostic format
        self.print_usage(sys.stderr)
        raise SystemExit(f"error: {message}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="topoflex", description="Hourly DC-OPF study with topology control.",
                     epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="study config (YAML)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (value parsed as YAML); repeatable")
    common.add_argument("--hours", metavar="A..B", help="hour range override, inclusive")
    common.add_argument("--scenarios", metavar="LIST", help="comma-separated wind scales, e.g. 1,2,3")
    common.add_argument("--out", type=Path, help="output directory override")
    kw = dict(parents=[common], epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub.add_parser("validate", help="parse the dataset and print the validation report", **kw)
    sub.add_parser("select-actions", help="select controllable buses and write the action list", **kw)
    sub.add_parser("run", help="run the study and write report.json, figure tables and hourly records", **kw)
    sub.add_parser("report", help="recompute report.json and figure tables from stored hourly records", **kw)
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise _ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        if key not in StudyConfig.model_fields:
            raise _ConfigError(f"unknown config key {key!r}")
        out[key] = yaml.safe_load(value)
    if args.hours:
        out["hours"] = args.hours
    if args.scenarios:
        try:
            out["scales"] = [float(s) for s in args.scenarios.split(",") if s.strip()]
        except ValueError:
            raise _ConfigError(f"--scenarios expects comma-separated numbers, got {args.scenarios!r}") from None
    if args.out:
        out["out"] = str(args.out)
    return out


def _config(args: argparse.Namespace) -> StudyConfig:
    try:
        return load_config(args.config, _overrides(args))
    except FileNotFoundError as exc:
        raise _ConfigError(str(exc)) from None
    except ValidationError as exc:
        raise _ConfigError(f"{args.config}: invalid config\n{exc}") from None
    except (ValueError, yaml.YAMLError) as exc:
        raise _ConfigError(f"{args.config}: {exc}") from None


def _check_dataset(config: StudyConfig) -> None:
    if not Path(config.dataset).is_dir():
        raise DataError(f"dataset directory not found: {config.dataset}")


def cmd_validate(config: StudyConfig) -> int:
    _check_dataset(config)
    net = load_network(config)
    report = validate(net)
    print(report.summary(net))
    if not report.ok:
        for v in report.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_select(config: StudyConfig) -> int:
    _check_dataset(config)
    result = select_controllable_buses(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "split_buses": result.buses,
        "switchable_branches": result.switchable_branches,
        "threshold": config.selection_threshold,
        "months": config.selection_months,
        "hours": len(result.hours),
        "stride": config.selection_stride,
        "open_share": {str(b): s for b, s in result.open_share.items()},
    }
    path = out / "actions.yaml"
    path.write_text(yaml.safe_dump(payload, sort_keys=False))
    print(f"{len(result.buses)} buses selected over {len(result.hours)} hours: {result.buses}")
    print(f"action list written to {path}")
    return EXIT_OK


def cmd_run(config: StudyConfig) -> int:
    _check_dataset(config)
    if config.split_buses == "auto":
        raise _ConfigError("split_buses is 'auto'; run select-actions and copy its split_buses into the config")
    report = run_study(config)
    d = report.to_dict()
    print(f"{d['hour_records']} hour records, {d['failed_hours']} failed; output in {config.out}")
    for s in d["aggregates"]["scenarios"]:
        costs = ", ".join(f"{v}={a['production_cost']:.2f}" for v, a in s["variants"].items())
        print(f"  scale {s['scale']}: {costs}")
    return EXIT_OK


def cmd_report(config: StudyConfig) -> int:
    report = load_report(config.out)
    write_report(report, config.out)
    print(f"report and figure tables rewritten in {config.out}")
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "select-actions": cmd_select, "run": cmd_run, "report": cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    try:
        return COMMANDS[args.command](_config(args))
    except _ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except RuntimeError as exc:
        print(f"solve error: {exc}", file=sys.stderr)
        return EXIT_SOLVE


if __name__ == "__main__":
    sys.exit(main())
