"""
forgetmari CLI - unlearning experiments from the command line.

This module provides the main CLI application for forgetmari, built with Typer.
"""

from forgetmari.cli.main import app, main

__all__ = ["app", "main"]
