import argparse
import json

from services.corpus import list_corpus


def list_corpus_command(args: argparse.Namespace) -> int:
    entries = list_corpus()
    if args.json:
        print(json.dumps([e.model_dump(mode="json") for e in entries], indent=2))
        return 0
    for e in entries:
        print(f"{e.name:<12} {e.model:<15} {e.expected:<25} ({', '.join(e.formulas)})")
        print(f"{'':<12} {e.provenance}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("list-corpus", help="built-in surfaces and their expected classification")
    parser.add_argument("--json", action="store_true", help="print the corpus as JSON")
    parser.set_defaults(handler=list_corpus_command)
