"""
Configuration commands for the forgetmari CLI.

Commands:
    show      - View all CLI defaults
    get       - Get a specific value
    set       - Set a value
    path      - Show the config file path
    validate  - Validate the config file, or an experiment JSON
"""

from pathlib import Path
from typing import Optional

import typer

from forgetmari.cli.config_manager import (
    get_config_path,
    get_value,
    load_config,
    save_config,
    set_value,
)
from forgetmari.cli.output import (
    EXIT_RUNTIME_ERROR,
    EXIT_SUCCESS,
    print_error,
    print_json,
    print_success,
)
from forgetmari.config import load_experiment_config
from forgetmari.exceptions import InvalidConfigError

app = typer.Typer(
    name="config",
    help="Configuration management",
    no_args_is_help=True,
)


@app.command()
def show(
    section: Optional[str] = typer.Argument(
        None,
        help="Optional section to show (output, detector, bounds)",
    ),
) -> None:
    """
    View all configuration or a specific section.

    Shows merged configuration from file and environment variables.
    """
    config = load_config()
    if section:
        value = get_value(config, section)
        if value is None:
            print_error(f"Section '{section}' not found", EXIT_RUNTIME_ERROR)
        print_json(value)
    else:
        print_json(config)
    raise typer.Exit(EXIT_SUCCESS)


@app.command()
def get(
    key: str = typer.Argument(
        ...,
        help="Configuration key (dot-separated, e.g., 'output.dir')",
    ),
) -> None:
    """
    Get a specific configuration value.

    Examples:
        forgetmari config get output.dir
        forgetmari config get detector.k_fraction
    """
    value = get_value(load_config(), key)
    if value is None:
        print_error(f"Key '{key}' not found", EXIT_RUNTIME_ERROR)
    print_json({"value": value})
    raise typer.Exit(EXIT_SUCCESS)


@app.command("set")
def set_config(
    key: str = typer.Argument(
        ...,
        help="Configuration key (dot-separated, e.g., 'output.dir')",
    ),
    value: str = typer.Argument(
        ...,
        help="Value to set",
    ),
) -> None:
    """
    Set a configuration value.

    Examples:
        forgetmari config set output.dir runs/desk
        forgetmari config set detector.k_fraction 0.1
    """
    config = set_value(load_config(), key, value)
    try:
        save_config(config)
    except (ImportError, OSError) as e:
        print_error(f"Failed to save config: {e}", EXIT_RUNTIME_ERROR)
    print_success(f"Set {key} = {value}")
    raise typer.Exit(EXIT_SUCCESS)


@app.command()
def path() -> None:
    """
    Show the path to the configuration file.

    Respects the FORGETMARI_CONFIG env var.
    """
    typer.echo(str(get_config_path()))
    raise typer.Exit(EXIT_SUCCESS)


@app.command()
def validate(
    experiment: Optional[Path] = typer.Argument(
        None,
        help="Experiment JSON to validate instead of the CLI config file",
    ),
) -> None:
    """
    Validate the CLI configuration file, or an experiment configuration.

    Experiment files are checked against the experiment schema, and their
    corpus paths must exist.
    """
    if experiment is not None:
        try:
            load_experiment_config(experiment)
        except InvalidConfigError as e:
            print_error(f"{e.message}: " + "; ".join(e.errors), EXIT_RUNTIME_ERROR)
        except OSError as e:
            print_error(f"Cannot read {experiment}: {e}", EXIT_RUNTIME_ERROR)
        print_success(f"Experiment configuration valid: {experiment}")
        raise typer.Exit(EXIT_SUCCESS)

    config_path = get_config_path()
    if not config_path.exists():
        print_error(f"Config file not found: {config_path}", EXIT_RUNTIME_ERROR)
    try:
        load_config()
    except Exception as e:
        print_error(f"Invalid configuration: {e}", EXIT_RUNTIME_ERROR)
    print_success(f"Configuration valid: {config_path}")
    raise typer.Exit(EXIT_SUCCESS)
