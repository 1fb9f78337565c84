"""
Main Typer application for the forgetmari CLI.

This module defines the main CLI app and registers every command.
"""

from typing import List, Optional

import click
import typer

from forgetmari._version import __version__
from forgetmari.cli.config import app as config_app
from forgetmari.cli.data import ingest, split
from forgetmari.cli.evaluate import (
    bounds_command,
    compare_estimators_command,
    detect_command,
    eval_command,
    report_command,
)
from forgetmari.cli.output import (
    EXIT_RUNTIME_ERROR,
    EXIT_SUCCESS,
    EXIT_USAGE,
    configure_logging,
    print_error,
)
from forgetmari.cli.run import run_command
from forgetmari.cli.train import finetune_command, gold_command, unlearn_command
from forgetmari.exceptions import MariError


def _base_named(exc_type: type, name: str) -> type:
    return next(c for c in exc_type.__mro__ if c.__name__ == name)


# Newer typer releases raise exceptions from a vendored copy of click, older
# ones from click itself; both hierarchies are caught.
_USAGE_ERRORS = (click.exceptions.UsageError, _base_named(typer.BadParameter, "UsageError"))
_ABORTS = (click.exceptions.Abort, typer.Abort)
_EXITS = (click.exceptions.Exit, typer.Exit)

app = typer.Typer(
    name="forgetmari",
    help="Marginal-information unlearning for small language models",
    no_args_is_help=True,
)

app.add_typer(config_app, name="config", help="Configuration management")

# Data
app.command("ingest")(ingest)
app.command("split")(split)

# Training
app.command("finetune")(finetune_command)
app.command("gold")(gold_command)
app.command("unlearn")(unlearn_command)

# Evaluation
app.command("eval")(eval_command)
app.command("detect")(detect_command)
app.command("bounds")(bounds_command)
app.command("compare-estimators")(compare_estimators_command)

# Experiments
app.command("run")(run_command)
app.command("report")(report_command)


def version_callback(value: bool):
    if value:
        typer.echo(f"forgetmari {__version__}")
        raise typer.Exit()


@app.callback()
def main_callback(
    version: Optional[bool] = typer.Option(
        None,
        "--version",
        callback=version_callback,
        is_eager=True,
        help="Show version and exit.",
    ),
    verbose: bool = typer.Option(False, "--verbose", "-V", help="Debug logging on stderr"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Warnings and errors only"),
):
    """
    Marginal-information unlearning for small language models.

    Use 'forgetmari <command> --help' for more information on each command.
    """
    configure_logging(verbose=verbose, quiet=quiet)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Entry point for the forgetmari CLI.

    Returns 0 on success, 1 on a usage error and 2 on a runtime failure.
    """
    try:
        result = app(args=argv, standalone_mode=False, prog_name="forgetmari")
    except _USAGE_ERRORS as e:
        e.show()
        return EXIT_USAGE
    except _ABORTS:
        return EXIT_USAGE
    except _EXITS as e:
        return e.exit_code
    except MariError as e:
        try:
            print_error(str(e), EXIT_RUNTIME_ERROR)
        except _EXITS:
            pass
        return EXIT_RUNTIME_ERROR
    return result if isinstance(result, int) else EXIT_SUCCESS


if __name__ == "__main__":
    raise SystemExit(main())
