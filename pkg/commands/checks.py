import argparse
import json
from pathlib import Path

import store
from commands.scenarios import add_sweep_flags, apply_overrides, emit
from models import ScenarioConfig
from services.liealg import run_lie_suite
from services.scenario_runner import run_scenario
from utils.report_io import load_config


def resolve_target(target: str) -> ScenarioConfig:
    """A corpus name, or a path to a scenario file"""
    path = Path(target)
    if path.suffix == ".json" or path.is_file():
        return load_config(path)
    return ScenarioConfig(surface=target)


def single_check(check: str):
    def handler(args: argparse.Namespace) -> int:
        config = apply_overrides(resolve_target(args.target), args, checks=[check])
        return emit(run_scenario(config), args)
    return handler


def verify_lie(args: argparse.Namespace) -> int:
    checks = run_lie_suite(args.lambdas or store.DEFAULT_LAMBDAS)
    if args.json:
        rows = [{"name": c.name, "residual": c.residual, "tolerance": c.tolerance,
                 "passed": c.passed, "detail": c.detail} for c in checks]
        print(json.dumps(rows, indent=2, default=float))
    else:
        width = max(len(c.name) for c in checks)
        for c in checks:
            print(f"{c.name:<{width}}  {c.residual:10.3e}  < {c.tolerance:.0e}  {'PASS' if c.passed else 'FAIL'}")
    return 0 if all(c.passed for c in checks) else 1


def register(subparsers) -> None:
    for name, check, text in (
        ("check-superminimal", "superminimal", "vertical, indicatrix and holonomy meters on a surface"),
        ("check-lagrangian", "lagrangian", "Kahler-form defects of the lift for every (lambda, sign)"),
        ("mean-curvature-l", "minimal-L", "mean curvature of the lift at interior samples"),
    ):
        parser = subparsers.add_parser(name, help=text)
        parser.add_argument("target", help="corpus surface name or scenario JSON file")
        add_sweep_flags(parser)
        parser.set_defaults(handler=single_check(check))

    parser = subparsers.add_parser("verify-lie", help="exact so(5) identity table")
    parser.add_argument("--lambda", dest="lambdas", type=float, action="append", metavar="LAMBDA")
    parser.add_argument("--json", action="store_true", help="print the table as JSON")
    parser.set_defaults(handler=verify_lie)
