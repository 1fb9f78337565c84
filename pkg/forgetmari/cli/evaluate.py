"""
Evaluation commands.

Commands:
    eval                - Accuracies, cross-entropy and MarI of a checkpoint
    detect              - Membership-inference AUC on D_u vs a holdout set
    bounds              - Bound reports for a checkpoint, or verification campaigns
    report              - Plot-ready CSVs from a run directory
    compare-estimators  - Token-wise vs pooled MarI on random minibatches
"""

from pathlib import Path
from typing import Optional

import typer

from forgetmari.artifacts import write_json, write_jsonl
from forgetmari.bounds import prop1_campaign, thm1_campaign, thm2_campaign
from forgetmari.cli._common import choice, corpus_option, encode_file, load_model
from forgetmari.cli.config_manager import get_default
from forgetmari.cli.output import (
    EXIT_RUNTIME_ERROR,
    EXIT_SUCCESS,
    print_error,
    print_json,
    print_success,
    runtime_errors,
)
from forgetmari.const import DEFAULT_SEQ_LEN, DETECTORS
from forgetmari.detector import DetectorConfig, detect
from forgetmari.experiment import bounds_for_model, build_report, compare_estimators
from forgetmari.langmodel import averaged_marginals, mean_cross_entropy
from forgetmari.mariloss import alpha_for, marginal_information
from forgetmari.unlearner import next_token_accuracy

CAMPAIGNS = ["accuracy", "self-gap", "neighborhood-gap", "all"]

CHECKPOINT_ARG = typer.Argument(..., help="Model checkpoint", exists=True, dir_okay=False)


def eval_command(
    checkpoint: Path = CHECKPOINT_ARG,
    unlearn_file: Path = corpus_option("--unlearn", "Unlearn set D_u (.jsonl)"),
    retain_file: Path = corpus_option("--retain", "Retain set D_r (.jsonl)"),
    validation_file: Optional[Path] = corpus_option(
        "--validation", "Validation set (.jsonl)", required=False
    ),
    seq_len: int = typer.Option(DEFAULT_SEQ_LEN, "--seq-len", min=1),
) -> None:
    """
    Evaluate next-token accuracy, cross-entropy and MarI of CHECKPOINT.
    """
    with runtime_errors():
        ckpt = load_model(checkpoint)
        d_u = encode_file(ckpt.vocab, unlearn_file, seq_len)
        d_r = encode_file(ckpt.vocab, retain_file, seq_len)
        alpha = alpha_for(d_r.size, d_u.size)
        pr = averaged_marginals(ckpt, d_r, "retain")
        pu = averaged_marginals(ckpt, d_u, "unlearn")
        result = {
            "acc_unlearn": next_token_accuracy(ckpt, d_u),
            "acc_retain": next_token_accuracy(ckpt, d_r),
            "ce_unlearn": mean_cross_entropy(ckpt, d_u),
            "ce_retain": mean_cross_entropy(ckpt, d_r),
            "alpha": alpha,
            "mari_token_wise": marginal_information(pr, pu, alpha, "token_wise").value,
            "mari_pooled": marginal_information(pr, pu, alpha, "pooled").value,
        }
        if validation_file is not None:
            val = encode_file(ckpt.vocab, validation_file, seq_len)
            result["acc_validation"] = next_token_accuracy(ckpt, val)
        print_json(result)
    raise typer.Exit(EXIT_SUCCESS)


def detect_command(
    checkpoint: Path = CHECKPOINT_ARG,
    members_file: Path = corpus_option("--members", "Member set, usually D_u (.jsonl)"),
    holdout_file: Path = corpus_option("--holdout", "Non-member set (.jsonl)"),
    retain_file: Optional[Path] = corpus_option(
        "--retain", "Retain set D_r, only checked for holdout overlap (.jsonl)", required=False
    ),
    detector: Optional[str] = typer.Option(
        None,
        "--detector",
        callback=choice(DETECTORS),
        help="Detector [default: detector.detector from the CLI config]",
    ),
    k_fraction: Optional[float] = typer.Option(
        None,
        "--k",
        help="Fraction of lowest-probability tokens (min_k) "
        "[default: detector.k_fraction from the CLI config]",
    ),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write the report JSON"),
    scores: bool = typer.Option(False, "--scores", help="Include per-sequence scores on stdout"),
    seq_len: int = typer.Option(DEFAULT_SEQ_LEN, "--seq-len", min=1),
) -> None:
    """
    Score members and non-members and report the ROC-AUC.

    Low AUC means the detector believes the model was trained on the members.
    """
    detector = detector or get_default("detector.detector")
    if k_fraction is None:
        k_fraction = float(get_default("detector.k_fraction"))
    if not 0.0 < k_fraction <= 1.0:
        raise typer.BadParameter(f"--k must lie in (0, 1], got {k_fraction}")
    with runtime_errors():
        ckpt = load_model(checkpoint)
        report = detect(
            ckpt,
            encode_file(ckpt.vocab, members_file, seq_len),
            encode_file(ckpt.vocab, holdout_file, seq_len),
            DetectorConfig(detector, k_fraction),
            encode_file(ckpt.vocab, retain_file, seq_len) if retain_file else None,
        )
        if output is not None:
            write_json(report.to_dict(), output)
        data = report.to_dict()
        if not scores:
            data.pop("scores_member")
            data.pop("scores_nonmember")
        print_json(data)
    raise typer.Exit(EXIT_SUCCESS)


def _run_campaigns(which: str, instances: Optional[int], seed: int) -> list[dict]:
    kwargs = {"seed": seed}
    if instances is not None:
        kwargs["n_instances"] = instances
    runs = {
        "accuracy": prop1_campaign,
        "self-gap": thm1_campaign,
        "neighborhood-gap": thm2_campaign,
    }
    names = list(runs) if which == "all" else [which]
    return [runs[name](**kwargs).to_dict() for name in names]


def bounds_command(
    checkpoint: Optional[Path] = typer.Argument(
        None, help="Model checkpoint (omit with --campaign)", exists=True, dir_okay=False
    ),
    unlearn_file: Optional[Path] = corpus_option(
        "--unlearn", "Unlearn set D_u (.jsonl)", required=False
    ),
    retain_file: Optional[Path] = corpus_option(
        "--retain", "Retain set D_r (.jsonl)", required=False
    ),
    epsilon: Optional[float] = typer.Option(
        None,
        "--epsilon",
        min=0.0,
        help="Deviation allowance [default: bounds.epsilon from the CLI config]",
    ),
    n_paths: int = typer.Option(8, "--n-paths", min=1, help="D_u paths to report on"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write JSON lines here"),
    campaign: Optional[str] = typer.Option(
        None,
        "--campaign",
        callback=choice(CAMPAIGNS),
        help="Run a randomized verification campaign instead",
    ),
    instances: Optional[int] = typer.Option(None, "--instances", min=1),
    seed: int = typer.Option(0, "--seed"),
    seq_len: int = typer.Option(DEFAULT_SEQ_LEN, "--seq-len", min=1),
) -> None:
    """
    Evaluate the detection and perplexity-gap bounds of CHECKPOINT on its
    averaged marginals, one JSON line per D_u path.

    With --campaign, verify the bounds on random instances instead; the exit
    code is 2 if any instance violates its bound.
    """
    if campaign is not None:
        with runtime_errors():
            results = _run_campaigns(campaign, instances, seed)
        print_json(results)
        if not all(r["passed"] for r in results):
            print_error("bound violations found", EXIT_RUNTIME_ERROR)
        raise typer.Exit(EXIT_SUCCESS)

    if checkpoint is None or unlearn_file is None or retain_file is None:
        raise typer.BadParameter(
            "CHECKPOINT, --unlearn and --retain are required without --campaign"
        )
    if epsilon is None:
        epsilon = float(get_default("bounds.epsilon"))
    with runtime_errors():
        ckpt = load_model(checkpoint)
        reports = bounds_for_model(
            ckpt,
            encode_file(ckpt.vocab, retain_file, seq_len),
            encode_file(ckpt.vocab, unlearn_file, seq_len),
            epsilon,
            n_paths,
        )
        rows = [r.to_dict() for r in reports]
        if output is not None:
            write_jsonl(rows, output)
            print_success(f"Wrote {len(rows)} bound reports to {output}")
        else:
            for row in rows:
                print_json(row, pretty=False)
    raise typer.Exit(EXIT_SUCCESS)


def report_command(
    run_dir: Path = typer.Argument(
        ..., help="Directory written by 'run'", exists=True, file_okay=False
    ),
    output_dir: Optional[Path] = typer.Option(
        None, "--output-dir", "-o", help="Where to write curves.csv and bars.csv"
    ),
) -> None:
    """
    Write curves.csv (per-epoch traces of every phase) and bars.csv (final
    accuracies and AUC per model) from a run's stored artifacts.
    """
    with runtime_errors():
        curves, bars = build_report(run_dir, output_dir)
        print_json({"curves": str(curves), "bars": str(bars)})
    raise typer.Exit(EXIT_SUCCESS)


def compare_estimators_command(
    checkpoint: Path = CHECKPOINT_ARG,
    unlearn_file: Path = corpus_option("--unlearn", "Unlearn set D_u (.jsonl)"),
    retain_file: Path = corpus_option("--retain", "Retain set D_r (.jsonl)"),
    batch_size: int = typer.Option(16, "--batch-size", min=1),
    n_batches: int = typer.Option(20, "--n-batches", min=1),
    seed: int = typer.Option(0, "--seed"),
    seq_len: int = typer.Option(DEFAULT_SEQ_LEN, "--seq-len", min=1),
) -> None:
    """
    Compare the token-wise and pooled MarI estimators on random minibatch pairs.
    """
    with runtime_errors():
        ckpt = load_model(checkpoint)
        result = compare_estimators(
            ckpt,
            encode_file(ckpt.vocab, retain_file, seq_len),
            encode_file(ckpt.vocab, unlearn_file, seq_len),
            batch_size,
            n_batches,
            seed,
        )
        print_json(result)
    raise typer.Exit(EXIT_SUCCESS)
