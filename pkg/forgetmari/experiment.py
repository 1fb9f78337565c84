"""
End-to-end experiment orchestration.

``run_experiment`` executes, in order: data preparation, baseline fine-tuning
on D_u ∪ D_r, the gold baseline on D_r only, unlearning of the baseline (plus
any comparison methods under the same budget), membership detection on
every model, bounds for the unlearned model, the optional λ sweep, and the
summary.
"""

import glob
import logging
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .artifacts import (
    read_json,
    read_trace_csv,
    write_csv,
    write_json,
    write_jsonl,
    write_trace_csv,
)
from .bounds import BoundReport, DetectionGame, evaluate_bounds
from .checkpoint import save_checkpoint
from .config import ExperimentConfig
from .const import (
    BAR_COLUMNS,
    BASELINE_CKPT,
    BOUNDS_FILE,
    CURVE_COLUMNS,
    GOLD_CKPT,
    SUMMARY_FILE,
    SWEEP_COLUMNS,
    SWEEP_FILE,
    UNLEARNED_CKPT,
)
from .corpus import load_corpus, make_split, synthesize_corpus
from .detector import DetectionReport, DetectorConfig, detect
from .exceptions import DomainError, EmptyBatch, MariError, PhaseError
from .langmodel import (
    ModelArch,
    ModelCheckpoint,
    SequenceBatch,
    averaged_marginals,
    init_checkpoint,
)
from .mariloss import alpha_for, marginal_information
from .rng import stream
from .unlearner import EvalSets, TrainTrace, finetune, next_token_accuracy, unlearn
from .vocab import Vocabulary

_LOGGER = logging.getLogger(__name__)

TRACE_PREFIX = "trace_"
DETECTION_PREFIX = "detection_"


@dataclass(frozen=True)
class ExperimentData:
    vocab: Vocabulary
    unlearn: SequenceBatch
    retain: SequenceBatch
    validation: SequenceBatch
    holdout: SequenceBatch
    provenance: str = ""

    @property
    def union(self) -> SequenceBatch:
        return self.unlearn.concat(self.retain)

    @property
    def eval_sets(self) -> EvalSets:
        return EvalSets(self.unlearn, self.retain, self.validation)


def prepare_data(cfg: ExperimentConfig) -> ExperimentData:
    """Read or synthesize the corpora, split D_u/D_r and encode every set."""
    c = cfg.corpus
    if c.is_synthetic:
        s = c.synthetic
        synth = synthesize_corpus(s.n_sentences, s.overlap, cfg.seed, s.n_holdout, s.n_validation)
        train, validation, holdout = synth.train, synth.validation, synth.holdout
    else:
        train, validation, holdout = (
            load_corpus(c.train),
            load_corpus(c.validation),
            load_corpus(c.holdout),
        )
    d_u, d_r = make_split(train.sentences(), cfg.split_spec())
    val_sents, hold_sents = validation.sentences(), holdout.sentences()
    vocab = Vocabulary.build(d_u + d_r + val_sents + hold_sents, cfg.vocab_level)
    T = cfg.seq_len
    _LOGGER.info(
        f"Data: |D_u|={len(d_u)} |D_r|={len(d_r)} validation={len(val_sents)} "
        f"holdout={len(hold_sents)} vocab={vocab.size}"
    )
    return ExperimentData(
        vocab=vocab,
        unlearn=SequenceBatch.from_texts(vocab, d_u, T),
        retain=SequenceBatch.from_texts(vocab, d_r, T),
        validation=SequenceBatch.from_texts(vocab, val_sents, T),
        holdout=SequenceBatch.from_texts(vocab, hold_sents, T),
        provenance=train.provenance,
    )


def arch_for(cfg: ExperimentConfig, vocab: Vocabulary) -> ModelArch:
    m = cfg.model
    return ModelArch(vocab.size, m.context_len, m.embed_dim, m.hidden_dim)


def model_accuracies(ckpt: ModelCheckpoint, data: ExperimentData) -> dict:
    return {
        "acc_unlearn": next_token_accuracy(ckpt, data.unlearn),
        "acc_retain": next_token_accuracy(ckpt, data.retain),
        "acc_validation": next_token_accuracy(ckpt, data.validation),
    }


def bounds_for_model(
    ckpt: ModelCheckpoint,
    retain: SequenceBatch,
    unlearn_set: SequenceBatch,
    epsilon: float,
    n_paths: int,
    alpha: Optional[float] = None,
) -> list[BoundReport]:
    """One report per unlearn-set path, on the model's averaged marginals."""
    if unlearn_set.size == 0 or retain.size == 0:
        raise EmptyBatch("bounds need nonempty retain and unlearn sets")
    alpha = alpha_for(retain.size, unlearn_set.size) if alpha is None else alpha
    game = DetectionGame.from_marginals(
        averaged_marginals(ckpt, retain, "retain"),
        averaged_marginals(ckpt, unlearn_set, "unlearn"),
        alpha,
    )
    return [
        evaluate_bounds(game, unlearn_set.tokens[i], epsilon)
        for i in range(min(n_paths, unlearn_set.size))
    ]


def compare_estimators(
    ckpt: ModelCheckpoint,
    retain: SequenceBatch,
    unlearn_set: SequenceBatch,
    batch_size: int = 16,
    n_batches: int = 20,
    seed: int = 0,
) -> dict:
    """Token-wise vs pooled MarI over random minibatch pairs.

    Pooled never exceeds token-wise; ``ordering_holds`` reports whether that
    was observed on every pair.
    """
    if batch_size < 1 or n_batches < 1:
        raise DomainError("batch_size and n_batches must be positive")
    gen = stream(seed, "estimators", "batches")
    token_wise, pooled = [], []
    for _ in range(n_batches):
        rb = retain.subset(gen.choice(retain.size, min(batch_size, retain.size), replace=False))
        ub = unlearn_set.subset(
            gen.choice(unlearn_set.size, min(batch_size, unlearn_set.size), replace=False)
        )
        alpha = alpha_for(rb.size, ub.size)
        pr = averaged_marginals(ckpt, rb, "retain")
        pu = averaged_marginals(ckpt, ub, "unlearn")
        token_wise.append(marginal_information(pr, pu, alpha, "token_wise").value)
        pooled.append(marginal_information(pr, pu, alpha, "pooled").value)
    tw, po = np.array(token_wise), np.array(pooled)
    return {
        "n_batches": n_batches,
        "batch_size": batch_size,
        "token_wise": {"mean": float(tw.mean()), "std": float(tw.std())},
        "pooled": {"mean": float(po.mean()), "std": float(po.std())},
        "ordering_holds": bool(np.all(po <= tw + 1e-9)),
        "values": [{"token_wise": a, "pooled": b} for a, b in zip(token_wise, pooled)],
    }


# ============================================================
# Orchestration
# ============================================================


class _Phase:
    """Tags every failure inside the block with the phase name."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        _LOGGER.info(f"Phase {self.name}: start")
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None:
            _LOGGER.info(f"Phase {self.name}: done")
            return False
        if isinstance(exc, PhaseError):
            return False
        if isinstance(exc, (MariError, OSError, ValueError, ArithmeticError)):
            raise PhaseError(self.name, exc) from exc
        return False


def _trace_path(out: Path, phase: str) -> Path:
    return out / f"{TRACE_PREFIX}{phase}.csv"


def _trace_summary(trace: TrainTrace) -> dict:
    return {
        "epochs_run": len(trace.rows),
        "stopped_epoch": trace.stopped_epoch,
        "stop_reason": trace.stop_reason,
    }


def run_sweep(
    cfg: ExperimentConfig,
    baseline: ModelCheckpoint,
    data: ExperimentData,
    det_cfg: DetectorConfig,
) -> list[dict]:
    """Re-run every sweep method from ``baseline`` at each λ of the grid.

    Each run keeps the unlearning budget of ``cfg`` and changes only the
    method and λ. Returns one metrics row per (method, λ).
    """
    rows = []
    for method in cfg.sweep.methods:
        for lam in cfg.sweep.lambda_grid:
            ucfg = replace(cfg.unlearn_config(method), lambda_=lam)
            model, trace = unlearn(
                baseline, baseline, data.retain, data.unlearn, data.validation, ucfg, data.holdout
            )
            report = detect(model, data.unlearn, data.holdout, det_cfg)
            row = {
                "method": method,
                "lambda": lam,
                **model_accuracies(model, data),
                "auc": report.auc,
                "epochs_run": len(trace.rows),
            }
            _LOGGER.info(
                f"sweep {method} λ={lam}: acc_u={row['acc_unlearn']:.3f} "
                f"acc_r={row['acc_retain']:.3f} auc={row['auc']:.3f}"
            )
            rows.append(row)
    return rows


def run_experiment(cfg: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None) -> dict:
    """Run every phase and write the artifacts under the output directory.

    Returns the summary written to ``summary.json``.
    """
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(cfg.to_dict(), out / "config.json")

    with _Phase("data"):
        data = prepare_data(cfg)
        arch = arch_for(cfg, data.vocab)

    ft_cfg = cfg.finetune_config()
    with _Phase("baseline"):
        init = init_checkpoint(arch, cfg.seed, data.vocab)
        baseline, trace = finetune(init, data.union, ft_cfg, data.eval_sets)
        save_checkpoint(baseline, out / BASELINE_CKPT)
        write_trace_csv(trace, _trace_path(out, "baseline"))

    with _Phase("gold"):
        gold, trace = finetune(init, data.retain, ft_cfg, data.eval_sets)
        save_checkpoint(gold, out / GOLD_CKPT)
        write_trace_csv(trace, _trace_path(out, "gold"))

    models = {"baseline": baseline, "gold": gold}
    runs = {}
    methods = [cfg.unlearn.method] + [m for m in cfg.compare_methods if m != cfg.unlearn.method]
    for method in methods:
        name = "unlearned" if method == cfg.unlearn.method else f"unlearned_{method}"
        with _Phase(f"unlearn[{method}]"):
            ucfg = cfg.unlearn_config(method)
            model, trace = unlearn(
                baseline, baseline, data.retain, data.unlearn, data.validation, ucfg, data.holdout
            )
            ckpt_name = UNLEARNED_CKPT if name == "unlearned" else f"{name}.ckpt"
            save_checkpoint(model, out / ckpt_name)
            write_trace_csv(trace, _trace_path(out, f"unlearn_{method}"))
            models[name] = model
            runs[name] = {"method": method, **_trace_summary(trace)}

    detections: dict[str, DetectionReport] = {}
    with _Phase("detect"):
        det_cfg = DetectorConfig(cfg.detector.detector, cfg.detector.k_fraction)
        for name, model in models.items():
            report = detect(model, data.unlearn, data.holdout, det_cfg, data.retain)
            write_json(report.to_dict(), out / f"{DETECTION_PREFIX}{name}.json")
            detections[name] = report
            _LOGGER.info(f"{name}: {det_cfg.detector} AUC {report.auc:.4f}")

    with _Phase("bounds"):
        reports = bounds_for_model(
            models["unlearned"],
            data.retain,
            data.unlearn,
            cfg.bounds.epsilon,
            cfg.bounds.n_paths,
        )
        write_jsonl((r.to_dict() for r in reports), out / BOUNDS_FILE)

    sweep_rows = []
    if cfg.sweep.lambda_grid:
        with _Phase("sweep"):
            sweep_rows = run_sweep(cfg, baseline, data, det_cfg)
            write_csv(SWEEP_COLUMNS, sweep_rows, out / SWEEP_FILE)

    with _Phase("summary"):
        summary = {
            "seed": cfg.seed,
            "corpus": data.provenance,
            "unlearn_set_size": data.unlearn.size,
            "retain_set_size": data.retain.size,
            "vocab_size": data.vocab.size,
            "method": cfg.unlearn.method,
            "models": {
                name: {**model_accuracies(model, data), "auc": detections[name].auc}
                for name, model in models.items()
            },
            "unlearn_runs": runs,
        }
        if sweep_rows:
            summary["sweep"] = sweep_rows
        write_json(summary, out / SUMMARY_FILE)
    return summary


# ============================================================
# Report
# ============================================================


def _phase_of(trace_file: str) -> str:
    return os.path.basename(trace_file)[len(TRACE_PREFIX) : -len(".csv")]


def build_report(run_dir: Union[str, Path], output_dir: Optional[Union[str, Path]] = None):
    """Write ``curves.csv`` and ``bars.csv`` from a run's stored artifacts.

    Nothing is recomputed through the model.
    """
    run_dir = Path(run_dir)
    out = Path(output_dir) if output_dir else run_dir
    trace_files = sorted(glob.glob(str(run_dir / f"{TRACE_PREFIX}*.csv")))
    if not trace_files:
        raise DomainError(f"no trace files found in {run_dir}")
    curves = []
    for f in trace_files:
        phase = _phase_of(f)
        curves.extend({"phase": phase, **row} for row in read_trace_csv(f))
    summary = read_json(run_dir / SUMMARY_FILE)
    bars = [
        {"model": name, **{c: values.get(c, math.nan) for c in BAR_COLUMNS[1:]}}
        for name, values in summary["models"].items()
    ]
    curves_path = write_csv(CURVE_COLUMNS, curves, out / "curves.csv")
    bars_path = write_csv(BAR_COLUMNS, bars, out / "bars.csv")
    return curves_path, bars_path
