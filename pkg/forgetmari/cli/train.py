"""
Training commands.

Commands:
    finetune  - Baseline: fine-tune on D_u ∪ D_r
    gold      - Gold unlearn baseline: train on D_r only
    unlearn   - Remove D_u from a fine-tuned checkpoint
"""

from pathlib import Path
from typing import List, Optional

import typer

from forgetmari.artifacts import write_trace_csv
from forgetmari.checkpoint import save_checkpoint
from forgetmari.cli._common import (
    choice,
    corpus_option,
    encode_file,
    fraction,
    load_model,
    positive,
    read_sentences,
)
from forgetmari.cli.output import EXIT_SUCCESS, print_json, runtime_errors
from forgetmari.const import (
    ALPHA_POLICIES,
    DEFAULT_CLIP_NORM,
    DEFAULT_CONTEXT_LEN,
    DEFAULT_EMBED_DIM,
    DEFAULT_HIDDEN_DIM,
    DEFAULT_K_FRACTION,
    DEFAULT_SEQ_LEN,
    MARI_MODES,
    OPTIMIZERS,
    STOP_POLICIES,
    UNLEARN_METHODS,
    VOCAB_LEVELS,
)
from forgetmari.langmodel import ModelArch, init_checkpoint
from forgetmari.unlearner import EvalSets, TrainTrace, UnlearnConfig, finetune, unlearn
from forgetmari.vocab import Vocabulary

UNLEARN_HELP = "Unlearn set D_u (.jsonl)"
RETAIN_HELP = "Retain set D_r (.jsonl)"
VALIDATION_HELP = "Validation set (.jsonl)"
VOCAB_CORPUS_HELP = "Extra corpora whose symbols join the vocabulary (repeatable)"


def _summary(ckpt_path: Path, trace: TrainTrace) -> dict:
    final = trace.final
    return {
        "checkpoint": str(ckpt_path),
        "epochs_run": len(trace.rows),
        "stopped_epoch": trace.stopped_epoch,
        "stop_reason": trace.stop_reason,
        "final": final.as_dict() if final else None,
    }


def _write_outputs(ckpt, trace, output: Path, trace_file: Optional[Path]) -> None:
    save_checkpoint(ckpt, output)
    if trace_file is not None:
        write_trace_csv(trace, trace_file)
    print_json(_summary(output, trace))


def _train(
    retain_only: bool,
    files: tuple[Path, Path, Path],
    vocab_corpus: List[Path],
    arch_dims: tuple[int, int, int],
    cfg: UnlearnConfig,
    seq_len: int,
    vocab_level: str,
    output: Path,
    trace_file: Optional[Path],
) -> None:
    unlearn_file, retain_file, validation_file = files
    with runtime_errors():
        texts = [s for f in (*files, *vocab_corpus) for s in read_sentences(f)]
        vocab = Vocabulary.build(texts, vocab_level)
        d_u = encode_file(vocab, unlearn_file, seq_len)
        d_r = encode_file(vocab, retain_file, seq_len)
        val = encode_file(vocab, validation_file, seq_len)
        init = init_checkpoint(ModelArch(vocab.size, *arch_dims), cfg.seed, vocab)
        dataset = d_r if retain_only else d_u.concat(d_r)
        ckpt, trace = finetune(init, dataset, cfg, EvalSets(d_u, d_r, val))
        _write_outputs(ckpt, trace, output, trace_file)
    raise typer.Exit(EXIT_SUCCESS)


def _finetune_config(epochs, lr, batch_size, seed, clip_norm) -> UnlearnConfig:
    return UnlearnConfig(
        method="none",
        lr=lr,
        epochs=epochs,
        batch_size=batch_size,
        seed=seed,
        stop_policy="none",
        clip_norm=clip_norm,
        optimizer="sgd",
    )


def finetune_command(
    unlearn_file: Path = corpus_option("--unlearn", UNLEARN_HELP),
    retain_file: Path = corpus_option("--retain", RETAIN_HELP),
    validation_file: Path = corpus_option("--validation", VALIDATION_HELP),
    vocab_corpus: List[Path] = typer.Option([], "--vocab-corpus", help=VOCAB_CORPUS_HELP),
    output: Path = typer.Option(..., "--output", "-o", help="Output checkpoint"),
    trace_file: Optional[Path] = typer.Option(None, "--trace", help="Write the trace CSV here"),
    epochs: int = typer.Option(40, "--epochs", min=0),
    lr: float = typer.Option(0.5, "--lr", callback=positive),
    batch_size: int = typer.Option(16, "--batch-size", min=1),
    seed: int = typer.Option(0, "--seed"),
    clip_norm: Optional[float] = typer.Option(DEFAULT_CLIP_NORM, "--clip-norm"),
    seq_len: int = typer.Option(DEFAULT_SEQ_LEN, "--seq-len", min=1),
    context_len: int = typer.Option(DEFAULT_CONTEXT_LEN, "--context-len", min=1),
    embed_dim: int = typer.Option(DEFAULT_EMBED_DIM, "--embed-dim", min=1),
    hidden_dim: int = typer.Option(DEFAULT_HIDDEN_DIM, "--hidden-dim", min=1),
    vocab_level: str = typer.Option("char", "--vocab-level", callback=choice(VOCAB_LEVELS)),
) -> None:
    """
    Fine-tune a fresh model on D_u ∪ D_r (the pre-unlearning baseline).
    """
    _train(
        retain_only=False,
        files=(unlearn_file, retain_file, validation_file),
        vocab_corpus=vocab_corpus,
        arch_dims=(context_len, embed_dim, hidden_dim),
        cfg=_finetune_config(epochs, lr, batch_size, seed, clip_norm),
        seq_len=seq_len,
        vocab_level=vocab_level,
        output=output,
        trace_file=trace_file,
    )


def gold_command(
    unlearn_file: Path = corpus_option("--unlearn", UNLEARN_HELP + ", evaluated only"),
    retain_file: Path = corpus_option("--retain", RETAIN_HELP),
    validation_file: Path = corpus_option("--validation", VALIDATION_HELP),
    vocab_corpus: List[Path] = typer.Option([], "--vocab-corpus", help=VOCAB_CORPUS_HELP),
    output: Path = typer.Option(..., "--output", "-o", help="Output checkpoint"),
    trace_file: Optional[Path] = typer.Option(None, "--trace", help="Write the trace CSV here"),
    epochs: int = typer.Option(40, "--epochs", min=0),
    lr: float = typer.Option(0.5, "--lr", callback=positive),
    batch_size: int = typer.Option(16, "--batch-size", min=1),
    seed: int = typer.Option(0, "--seed"),
    clip_norm: Optional[float] = typer.Option(DEFAULT_CLIP_NORM, "--clip-norm"),
    seq_len: int = typer.Option(DEFAULT_SEQ_LEN, "--seq-len", min=1),
    context_len: int = typer.Option(DEFAULT_CONTEXT_LEN, "--context-len", min=1),
    embed_dim: int = typer.Option(DEFAULT_EMBED_DIM, "--embed-dim", min=1),
    hidden_dim: int = typer.Option(DEFAULT_HIDDEN_DIM, "--hidden-dim", min=1),
    vocab_level: str = typer.Option("char", "--vocab-level", callback=choice(VOCAB_LEVELS)),
) -> None:
    """
    Train the gold unlearn baseline: the finetune recipe on D_r only.

    Pass the same corpora as to finetune so both models share a vocabulary.
    """
    _train(
        retain_only=True,
        files=(unlearn_file, retain_file, validation_file),
        vocab_corpus=vocab_corpus,
        arch_dims=(context_len, embed_dim, hidden_dim),
        cfg=_finetune_config(epochs, lr, batch_size, seed, clip_norm),
        seq_len=seq_len,
        vocab_level=vocab_level,
        output=output,
        trace_file=trace_file,
    )


def unlearn_command(
    checkpoint: Path = typer.Argument(
        ..., help="Fine-tuned checkpoint; also the frozen reference", exists=True, dir_okay=False
    ),
    unlearn_file: Path = corpus_option("--unlearn", UNLEARN_HELP),
    retain_file: Path = corpus_option("--retain", RETAIN_HELP),
    validation_file: Path = corpus_option("--validation", VALIDATION_HELP),
    holdout_file: Optional[Path] = corpus_option(
        "--holdout", "Non-member set, needed by --stop-policy detector", required=False
    ),
    output: Path = typer.Option(..., "--output", "-o", help="Output checkpoint"),
    trace_file: Optional[Path] = typer.Option(None, "--trace", help="Write the trace CSV here"),
    method: str = typer.Option("mari", "--method", callback=choice(UNLEARN_METHODS)),
    lambda_: float = typer.Option(
        0.5, "--lambda", min=0.0, max=1.0, help="Weight of the unlearning term"
    ),
    mode: str = typer.Option(
        "pooled", "--mode", callback=choice(MARI_MODES), help="MarI estimator"
    ),
    epochs: int = typer.Option(30, "--epochs", min=0),
    lr: float = typer.Option(0.01, "--lr", callback=positive),
    optimizer: str = typer.Option("adam", "--optimizer", callback=choice(OPTIMIZERS)),
    batch_size: int = typer.Option(16, "--batch-size", min=1),
    seed: int = typer.Option(0, "--seed"),
    stop_policy: str = typer.Option("val_drop", "--stop-policy", callback=choice(STOP_POLICIES)),
    early_stop_val_drop: float = typer.Option(0.03, "--early-stop-val-drop", min=0.0),
    alpha_policy: str = typer.Option("batch", "--alpha-policy", callback=choice(ALPHA_POLICIES)),
    clip_norm: Optional[float] = typer.Option(DEFAULT_CLIP_NORM, "--clip-norm"),
    detector_stop_auc: float = typer.Option(0.5, "--detector-stop-auc", min=0.0, max=1.0),
    k_fraction: float = typer.Option(
        DEFAULT_K_FRACTION, "--k", callback=fraction, help="min-k% fraction for the detector stop"
    ),
    seq_len: int = typer.Option(DEFAULT_SEQ_LEN, "--seq-len", min=1),
) -> None:
    """
    Unlearn D_u from CHECKPOINT.

    Example:
        forgetmari unlearn base.ckpt --unlearn u.jsonl --retain r.jsonl
        --validation v.jsonl -o out.ckpt --method mari --lambda 0.5 --mode pooled
    """
    if stop_policy == "detector" and holdout_file is None:
        raise typer.BadParameter("--stop-policy detector needs --holdout")
    with runtime_errors():
        ckpt = load_model(checkpoint)
        vocab = ckpt.vocab
        cfg = UnlearnConfig(
            method=method,
            lambda_=lambda_,
            mode=mode,
            lr=lr,
            epochs=epochs,
            batch_size=batch_size,
            seed=seed,
            early_stop_val_drop=early_stop_val_drop,
            stop_policy=stop_policy,
            alpha_policy=alpha_policy,
            clip_norm=clip_norm,
            detector_stop_auc=detector_stop_auc,
            k_fraction=k_fraction,
            optimizer=optimizer,
        )
        holdout = encode_file(vocab, holdout_file, seq_len) if holdout_file else None
        model, trace = unlearn(
            ckpt,
            ckpt,
            encode_file(vocab, retain_file, seq_len),
            encode_file(vocab, unlearn_file, seq_len),
            encode_file(vocab, validation_file, seq_len),
            cfg,
            holdout,
        )
        _write_outputs(model, trace, output, trace_file)
    raise typer.Exit(EXIT_SUCCESS)
