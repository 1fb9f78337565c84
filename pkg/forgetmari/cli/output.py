"""
Output formatting helpers for the forgetmari CLI.

Data goes to stdout; every diagnostic goes to stderr.
"""

import json
import logging
import sys
from contextlib import contextmanager
from typing import Any, Optional

import typer

from forgetmari.exceptions import MariError

# Exit codes
EXIT_SUCCESS = 0
EXIT_USAGE = 1
EXIT_RUNTIME_ERROR = 2

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def print_json(data: Any, pretty: bool = True) -> None:
    """
    Print data as JSON to stdout.

    Args:
        data: Any JSON-serializable data
        pretty: If True, pretty-print with indentation
    """
    if pretty:
        print(json.dumps(data, indent=2, sort_keys=True))
    else:
        print(json.dumps(data, sort_keys=True))


def print_error(message: str, exit_code: Optional[int] = None) -> None:
    """
    Print an error message to stderr.

    Args:
        message: Error message to display
        exit_code: If provided, exit with this code
    """
    typer.secho(f"Error: {message}", fg=typer.colors.RED, err=True)
    if exit_code is not None:
        raise typer.Exit(code=exit_code)


def print_warning(message: str) -> None:
    typer.secho(f"Warning: {message}", fg=typer.colors.YELLOW, err=True)


def print_success(message: str) -> None:
    typer.secho(message, fg=typer.colors.GREEN, err=True)


def print_info(message: str) -> None:
    typer.secho(message, fg=typer.colors.BLUE, err=True)


@contextmanager
def runtime_errors():
    """
    Turn library failures into an error message and exit code 2.

    Example:
        with runtime_errors():
            ckpt = load_checkpoint(path)
    """
    try:
        yield
    except MariError as e:
        print_error(str(e), EXIT_RUNTIME_ERROR)
    except OSError as e:
        print_error(f"{e.__class__.__name__}: {e}", EXIT_RUNTIME_ERROR)


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    """Route forgetmari log records to stderr at the requested level."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logger = logging.getLogger("forgetmari")
    logger.setLevel(level)
    # sys.stderr may have been swapped since the last call (test runners do)
    for h in [h for h in logger.handlers if getattr(h, "_forgetmari", False)]:
        logger.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._forgetmari = True
    logger.addHandler(handler)
