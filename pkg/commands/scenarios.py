import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import ValidationError

from errors import ConfigError
from models import Report, ScenarioConfig
from services.scenario_runner import run_scenario
from utils.report_io import load_config, write_csv, write_report

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Shared flag handling
# ---------------------------------------------------------------------------

def parse_grid(text: str) -> Tuple[int, int]:
    try:
        nu, nv = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 16x16, got '{text}'")
    return nu, nv


def parse_tolerance(text: str) -> Tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"tolerance must look like key=value, got '{text}'")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance value '{value}' is not a number")


def add_sweep_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda", dest="lambdas", type=float, action="append", metavar="LAMBDA",
                        help="fiber scale of g_lambda; repeat for a sweep")
    parser.add_argument("--sign", dest="signs", choices=["+", "-"], action="append",
                        help="almost complex structure J+ or J-; repeat for both")
    parser.add_argument("--grid", type=parse_grid, metavar="NUxNV", help="surface sample grid, e.g. 16x16")
    parser.add_argument("--n-theta", dest="n_theta", type=int, help="samples on each fiber circle")
    parser.add_argument("--tolerance", dest="tolerances", type=parse_tolerance, action="append",
                        metavar="KEY=VALUE", help="override one tolerance; repeatable")
    parser.add_argument("--csv", type=Path, metavar="PATH", help="also write the defect table as CSV")


def apply_overrides(config: ScenarioConfig, args: argparse.Namespace, checks: Optional[List[str]] = None) -> ScenarioConfig:
    data = config.model_dump(mode="json")
    if args.lambdas:
        data["lambdas"] = args.lambdas
    if args.signs:
        data["signs"] = args.signs
    if args.grid:
        data["grid"] = list(args.grid)
    if args.n_theta is not None:
        data["n_theta"] = args.n_theta
    if args.tolerances:
        overrides: Dict[str, float] = dict(data.get("tolerances") or {})
        overrides.update(dict(args.tolerances))
        data["tolerances"] = overrides
    if checks is not None:
        data["checks"] = checks
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid overrides: {e}")


def emit(report: Report, args: argparse.Namespace) -> int:
    write_report(report, sys.stdout)
    if getattr(args, "csv", None):
        write_csv(report, args.csv)
    return report.exit_code


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def run_command(args: argparse.Namespace) -> int:
    config = apply_overrides(load_config(args.config), args)
    return emit(run_scenario(config), args)


def register(subparsers) -> None:
    parser = subparsers.add_parser("run", help="run every check listed in a scenario file")
    parser.add_argument("config", type=Path, help="scenario JSON file")
    add_sweep_flags(parser)
    parser.set_defaults(handler=run_command)
