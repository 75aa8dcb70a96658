import argparse
import logging
import sys
from typing import List, Optional

import store
from commands.checks import register as register_checks
from commands.corpus import register as register_corpus
from commands.scenarios import register as register_scenarios
from errors import ConfigError, ExpressionDomainError, ExpressionSyntaxError, UnknownIdentifierError

logger = logging.getLogger("twistorkit")

EXIT_CONFIG = 2

# errors that mean the scenario itself is unusable
CONFIG_ERRORS = (ConfigError, ExpressionSyntaxError, UnknownIdentifierError, ExpressionDomainError)


def configure_logging(level: str = store.LOG_LEVEL) -> None:
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=store.TOOL_NAME,
        description="Numerical checks for superminimal surfaces and their Lagrangian lifts to the twistor space.",
    )
    parser.add_argument("--version", action="version", version=f"{store.TOOL_NAME} {store.VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_scenarios(subparsers)
    register_corpus(subparsers)
    register_checks(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CONFIG_ERRORS as e:
        logger.error(f"[CONFIG] {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
