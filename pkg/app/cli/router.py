"""Command-line router: one subcommand per pipeline stage."""

from app.cli.commands import COMMANDS
from app.cli.dependencies import CliArgumentParser


def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(
        prog="transda",
        description="Source-free domain adaptation with a transformer-augmented feature extractor",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command", parser_class=CliArgumentParser)
    subparsers.required = True
    for command in COMMANDS:
        command.register(subparsers)
    return parser
