"""
The end-to-end experiment command.
"""

import os
from pathlib import Path
from typing import Optional

import typer

from forgetmari.cli._common import choice, unit_interval
from forgetmari.cli.config_manager import get_output_dir
from forgetmari.cli.output import (
    EXIT_RUNTIME_ERROR,
    EXIT_SUCCESS,
    print_error,
    print_json,
    runtime_errors,
)
from forgetmari.config import load_experiment_config
from forgetmari.const import MARI_MODES, UNLEARN_METHODS
from forgetmari.exceptions import InvalidConfigError
from forgetmari.experiment import run_experiment


def run_command(
    config: Optional[Path] = typer.Argument(
        None, help="Experiment JSON (defaults: synthetic desk corpus)", exists=True, dir_okay=False
    ),
    output_dir: Optional[Path] = typer.Option(
        None, "--output-dir", "-o", help="Artifact directory (overrides the config)"
    ),
    seed: Optional[int] = typer.Option(None, "--seed"),
    method: Optional[str] = typer.Option(None, "--method", callback=choice(UNLEARN_METHODS)),
    lambda_: Optional[float] = typer.Option(None, "--lambda", min=0.0, max=1.0),
    mode: Optional[str] = typer.Option(None, "--mode", callback=choice(MARI_MODES)),
    epochs: Optional[int] = typer.Option(None, "--epochs", min=0, help="Unlearning epochs"),
    finetune_epochs: Optional[int] = typer.Option(None, "--finetune-epochs", min=0),
    compare: Optional[list[str]] = typer.Option(
        None,
        "--compare",
        help="Extra unlearning method run under the same budget (repeatable)",
    ),
    lambda_grid: Optional[list[float]] = typer.Option(
        None,
        "--lambda-grid",
        help="λ for the mari/gd/klga sweep written to sweep.csv (repeatable)",
    ),
) -> None:
    """
    Run the whole experiment: baseline, gold baseline, unlearning, detection,
    bounds and summary. With --lambda-grid, also sweep λ for mari, gd and klga.

    Settings resolve as: flag > MARI_* environment variable > CONFIG > default.
    """
    for m in compare or []:
        choice(UNLEARN_METHODS)(m)
    for lam in lambda_grid or []:
        unit_interval(lam)
    overrides = {
        "seed": seed,
        "unlearn.method": method,
        "unlearn.lambda": lambda_,
        "unlearn.mode": mode,
        "unlearn.epochs": epochs,
        "finetune.epochs": finetune_epochs,
        "compare_methods": list(compare) if compare else None,
        "sweep.lambda_grid": list(lambda_grid) if lambda_grid else None,
    }
    try:
        cfg = load_experiment_config(config, overrides)
    except InvalidConfigError as e:
        print_error(f"{e.message}: " + "; ".join(map(str, e.errors)), EXIT_RUNTIME_ERROR)
    if output_dir is None and config is None and "MARI_OUTPUT_DIR" not in os.environ:
        output_dir = get_output_dir()
    with runtime_errors():
        summary = run_experiment(cfg, output_dir)
        print_json(summary)
    raise typer.Exit(EXIT_SUCCESS)
