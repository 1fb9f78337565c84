"""
Training objectives and loops.

Every objective is a convex combination ``(1-λ)·utility + λ·unlearn``:

* ``mari``: utility = KL(p^r(θ) || p^r(θ₀)), unlearn = MarI(θ, r, u)
* ``gd``  : utility = CE(D_r),               unlearn = -CE(D_u)
* ``klga``: utility = KL(p^r(θ) || p^r(θ₀)), unlearn = -CE(D_u)
* ``ga``  : loss = -CE(D_u) (λ is ignored)

``finetune`` is plain cross-entropy minimization (method ``none``).
"""

import logging
import math
from dataclasses import dataclass, field, fields
from typing import NamedTuple, Optional

import numpy as np

from .const import (
    ALPHA_POLICIES,
    DEFAULT_CLIP_NORM,
    DEFAULT_K_FRACTION,
    MARI_MODES,
    METHODS,
    OPTIMIZERS,
    STOP_POLICIES,
    UNLEARN_METHODS,
)
from .detector import DetectorConfig, detect
from .exceptions import ArchMismatch, DomainError, EmptyBatch, NonFinite
from .infomath import kl_divergence
from .langmodel import (
    AdamState,
    ModelCheckpoint,
    adam_step,
    SequenceBatch,
    averaged_marginals,
    cross_entropy_gradient,
    marginals_backward,
    next_token_predictions,
    sgd_step,
)
from .mariloss import alpha_for, mari_loss_and_gradient
from .rng import stream

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class UnlearnConfig:
    method: str = "mari"
    lambda_: float = 0.5
    mode: str = "pooled"
    lr: float = 0.01
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0
    early_stop_val_drop: float = 0.03
    stop_policy: str = "val_drop"
    alpha_policy: str = "batch"
    clip_norm: Optional[float] = DEFAULT_CLIP_NORM
    detector_stop_auc: float = 0.5
    k_fraction: float = DEFAULT_K_FRACTION
    optimizer: str = "adam"

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise DomainError(f"lambda must lie in [0, 1], got {self.lambda_}")
        if self.mode not in MARI_MODES:
            raise DomainError(f"mode must be one of {MARI_MODES}, got {self.mode!r}")
        if not self.lr > 0:
            raise DomainError(f"lr must be positive, got {self.lr}")
        if self.epochs < 0:
            raise DomainError("epochs must be non-negative")
        if self.batch_size < 1:
            raise DomainError("batch_size must be at least 1")
        if self.stop_policy not in STOP_POLICIES:
            raise DomainError(f"stop_policy must be one of {STOP_POLICIES}")
        if self.alpha_policy not in ALPHA_POLICIES:
            raise DomainError(f"alpha_policy must be one of {ALPHA_POLICIES}")
        if self.optimizer not in OPTIMIZERS:
            raise DomainError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")


@dataclass(frozen=True)
class TraceRow:
    epoch: int
    loss_total: float
    loss_utility: float
    loss_unlearn: float
    acc_unlearn: float
    acc_retain: float
    acc_validation: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class TrainTrace:
    """Epoch-0 evaluation plus one row per completed epoch."""

    initial: Optional[TraceRow] = None
    rows: list[TraceRow] = field(default_factory=list)
    stopped_epoch: Optional[int] = None
    stop_reason: Optional[str] = None

    def append(self, row: TraceRow) -> None:
        if self.rows and row.epoch <= self.rows[-1].epoch:
            raise DomainError("trace epochs must be strictly increasing")
        if not all(math.isfinite(v) for v in row.as_dict().values()):
            raise NonFinite("trace row holds a non-finite value", epoch=row.epoch)
        self.rows.append(row)

    def all_rows(self) -> list[TraceRow]:
        return ([self.initial] if self.initial is not None else []) + list(self.rows)

    @property
    def final(self) -> Optional[TraceRow]:
        return self.rows[-1] if self.rows else self.initial


@dataclass(frozen=True)
class EvalSets:
    """Sets evaluated after every epoch for the trace's accuracy columns."""

    unlearn: SequenceBatch
    retain: SequenceBatch
    validation: SequenceBatch


class Objective(NamedTuple):
    loss_total: float
    gradient: np.ndarray
    loss_utility: float
    loss_unlearn: float


# ============================================================
# Metrics and loss terms
# ============================================================


def next_token_accuracy(ckpt: ModelCheckpoint, dataset: SequenceBatch) -> float:
    """Fraction of non-padding positions where the argmax equals the true token."""
    mask = dataset.mask()
    n = int(mask.sum())
    if n == 0:
        raise EmptyBatch("accuracy needs at least one non-padding position")
    hits = (next_token_predictions(ckpt, dataset) == dataset.tokens) & mask
    return int(hits.sum()) / n


def _check_arch(ckpt: ModelCheckpoint, frozen: ModelCheckpoint) -> None:
    if ckpt.arch != frozen.arch:
        raise ArchMismatch(f"checkpoint arch {ckpt.arch} differs from frozen {frozen.arch}")


def utility_kl_and_gradient(
    ckpt: ModelCheckpoint, frozen: ModelCheckpoint, retain_batch: SequenceBatch
) -> tuple[float, np.ndarray]:
    """(1/T) Σ_t KL(p^r_t(θ) || p^r_t(θ₀)) and its gradient w.r.t. θ."""
    _check_arch(ckpt, frozen)
    pr = averaged_marginals(ckpt, retain_batch).per_t
    ref = averaged_marginals(frozen, retain_batch).per_t
    T = pr.shape[0]
    loss = math.fsum(np.atleast_1d(kl_divergence(pr, ref))) / T
    d_pr = (np.log(pr) - np.log(ref) + 1.0) / T
    return loss, marginals_backward(ckpt, retain_batch, d_pr)


def utility_kl_loss(
    ckpt: ModelCheckpoint, frozen: ModelCheckpoint, retain_batch: SequenceBatch
) -> float:
    _check_arch(ckpt, frozen)
    pr = averaged_marginals(ckpt, retain_batch).per_t
    ref = averaged_marginals(frozen, retain_batch).per_t
    return math.fsum(np.atleast_1d(kl_divergence(pr, ref))) / pr.shape[0]


def _resolve_alpha(
    retain_batch: SequenceBatch, unlearn_batch: SequenceBatch, alpha: Optional[float]
) -> float:
    if alpha is not None:
        return alpha
    return alpha_for(retain_batch.size, unlearn_batch.size)


def mari_objective(
    ckpt: ModelCheckpoint,
    frozen: ModelCheckpoint,
    retain_batch: SequenceBatch,
    unlearn_batch: SequenceBatch,
    cfg: UnlearnConfig,
    alpha: Optional[float] = None,
) -> Objective:
    """(1-λ)·KL-to-frozen on r + λ·MarI(θ, r, u), with its exact gradient."""
    if cfg.method != "mari":
        raise DomainError(f"mari_objective called with method {cfg.method!r}")
    alpha = _resolve_alpha(retain_batch, unlearn_batch, alpha)
    lam = cfg.lambda_
    util, g_util = utility_kl_and_gradient(ckpt, frozen, retain_batch)
    estimate, g_mari = mari_loss_and_gradient(ckpt, retain_batch, unlearn_batch, alpha, cfg.mode)
    return Objective(
        loss_total=(1.0 - lam) * util + lam * estimate.value,
        gradient=(1.0 - lam) * g_util + lam * g_mari,
        loss_utility=util,
        loss_unlearn=estimate.value,
    )


def baseline_objective(
    ckpt: ModelCheckpoint,
    frozen: ModelCheckpoint,
    retain_batch: SequenceBatch,
    unlearn_batch: SequenceBatch,
    cfg: UnlearnConfig,
) -> Objective:
    """Gradient ascent (ga), gradient difference (gd) and KL-regularized ascent (klga)."""
    lam = cfg.lambda_
    ce_u, g_u = cross_entropy_gradient(ckpt, unlearn_batch)
    if cfg.method == "ga":
        return Objective(-ce_u, -g_u, 0.0, -ce_u)
    if cfg.method == "gd":
        util, g_util = cross_entropy_gradient(ckpt, retain_batch)
    elif cfg.method == "klga":
        util, g_util = utility_kl_and_gradient(ckpt, frozen, retain_batch)
    else:
        raise DomainError(f"baseline_objective called with method {cfg.method!r}")
    return Objective(
        loss_total=(1.0 - lam) * util - lam * ce_u,
        gradient=(1.0 - lam) * g_util - lam * g_u,
        loss_utility=util,
        loss_unlearn=-ce_u,
    )


def objective(
    ckpt: ModelCheckpoint,
    frozen: ModelCheckpoint,
    retain_batch: SequenceBatch,
    unlearn_batch: SequenceBatch,
    cfg: UnlearnConfig,
    alpha: Optional[float] = None,
) -> Objective:
    if cfg.method == "mari":
        return mari_objective(ckpt, frozen, retain_batch, unlearn_batch, cfg, alpha)
    return baseline_objective(ckpt, frozen, retain_batch, unlearn_batch, cfg)


# ============================================================
# Loops
# ============================================================


def _accuracies(ckpt: ModelCheckpoint, eval_sets: EvalSets) -> tuple[float, float, float]:
    return (
        next_token_accuracy(ckpt, eval_sets.unlearn),
        next_token_accuracy(ckpt, eval_sets.retain),
        next_token_accuracy(ckpt, eval_sets.validation),
    )


def _row(epoch, losses, accs) -> TraceRow:
    return TraceRow(epoch, *losses, *accs)


def _mean(values: list[float]) -> float:
    return math.fsum(values) / len(values) if values else 0.0


def _optimizer_state(ckpt: ModelCheckpoint, cfg: UnlearnConfig) -> Optional[AdamState]:
    return AdamState.zeros(ckpt.arch.n_params) if cfg.optimizer == "adam" else None


def _step(ckpt, grad, cfg, epoch, state: Optional[AdamState]) -> ModelCheckpoint:
    try:
        if state is not None:
            return adam_step(ckpt, grad, state, cfg.lr, cfg.clip_norm)
        return sgd_step(ckpt, grad, cfg.lr, cfg.clip_norm)
    except NonFinite as e:
        raise NonFinite(e.message, epoch=epoch)


def finetune(
    ckpt: ModelCheckpoint,
    dataset: SequenceBatch,
    cfg: UnlearnConfig,
    eval_sets: Optional[EvalSets] = None,
) -> tuple[ModelCheckpoint, TrainTrace]:
    """Minimize next-token cross-entropy on ``dataset`` over shuffled minibatches.

    Without ``eval_sets`` every accuracy column is measured on ``dataset``.
    """
    if cfg.method != "none":
        raise DomainError(f"finetune expects method 'none', got {cfg.method!r}")
    if dataset.size == 0:
        raise EmptyBatch("cannot fine-tune on an empty dataset")
    eval_sets = eval_sets or EvalSets(dataset, dataset, dataset)
    rng = stream(cfg.seed, "finetune", "shuffle")
    state = _optimizer_state(ckpt, cfg)

    ce0, _ = cross_entropy_gradient(ckpt, dataset, with_grad=False)
    trace = TrainTrace(initial=_row(0, (ce0, ce0, 0.0), _accuracies(ckpt, eval_sets)))

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(dataset.size)
        losses = []
        for start in range(0, dataset.size, cfg.batch_size):
            batch = dataset.subset(order[start : start + cfg.batch_size])
            loss, grad = cross_entropy_gradient(ckpt, batch)
            if not math.isfinite(loss):
                raise NonFinite("cross-entropy is not finite", epoch=epoch)
            losses.append(loss)
            ckpt = _step(ckpt, grad, cfg, epoch, state)
        mean_loss = _mean(losses)
        row = _row(epoch, (mean_loss, mean_loss, 0.0), _accuracies(ckpt, eval_sets))
        trace.append(row)
        _LOGGER.info(
            f"finetune epoch {epoch}: ce={mean_loss:.4f} acc_u={row.acc_unlearn:.3f} "
            f"acc_r={row.acc_retain:.3f} acc_val={row.acc_validation:.3f}"
        )
    return ckpt, trace


def _should_stop(cfg, trace, row, ckpt, unlearn_set, holdout) -> Optional[str]:
    if cfg.stop_policy == "val_drop":
        if row.acc_validation < trace.initial.acc_validation - cfg.early_stop_val_drop:
            return f"validation accuracy fell by more than {cfg.early_stop_val_drop}"
    elif cfg.stop_policy == "detector":
        report = detect(ckpt, unlearn_set, holdout, DetectorConfig("min_k", cfg.k_fraction))
        if report.auc >= cfg.detector_stop_auc:
            return f"detector AUC {report.auc:.3f} reached {cfg.detector_stop_auc}"
    return None


def unlearn(
    ckpt: ModelCheckpoint,
    frozen: ModelCheckpoint,
    retain_set: SequenceBatch,
    unlearn_set: SequenceBatch,
    validation: SequenceBatch,
    cfg: UnlearnConfig,
    holdout: Optional[SequenceBatch] = None,
) -> tuple[ModelCheckpoint, TrainTrace]:
    """Run the selected unlearning objective with the configured stop policy.

    Each step pairs one unlearn minibatch (a seeded pass over D_u per epoch)
    with an independently sampled retain minibatch.
    """
    if cfg.method not in UNLEARN_METHODS:
        raise DomainError(f"unlearn expects one of {UNLEARN_METHODS}, got {cfg.method!r}")
    _check_arch(ckpt, frozen)
    if retain_set.size == 0 or unlearn_set.size == 0:
        raise EmptyBatch("unlearning needs nonempty retain and unlearn sets")
    if cfg.stop_policy == "detector" and holdout is None:
        raise DomainError("the detector stop policy needs a holdout set")
    if not np.array_equal(ckpt.params, frozen.params):
        _LOGGER.warning("Unlearning starts from a checkpoint that differs from the frozen model")

    global_alpha = alpha_for(retain_set.size, unlearn_set.size)
    alpha = global_alpha if cfg.alpha_policy == "global" else None
    eval_sets = EvalSets(unlearn_set, retain_set, validation)
    order_rng = stream(cfg.seed, "unlearn", "order")
    retain_rng = stream(cfg.seed, "unlearn", "retain")
    state = _optimizer_state(ckpt, cfg)

    start = objective(ckpt, frozen, retain_set, unlearn_set, cfg, global_alpha)
    trace = TrainTrace(
        initial=_row(
            0,
            (start.loss_total, start.loss_utility, start.loss_unlearn),
            _accuracies(ckpt, eval_sets),
        )
    )

    for epoch in range(1, cfg.epochs + 1):
        order = order_rng.permutation(unlearn_set.size)
        parts = ([], [], [])
        for begin in range(0, unlearn_set.size, cfg.batch_size):
            ub = unlearn_set.subset(order[begin : begin + cfg.batch_size])
            n_r = min(cfg.batch_size, retain_set.size)
            rb = retain_set.subset(retain_rng.choice(retain_set.size, size=n_r, replace=False))
            obj = objective(ckpt, frozen, rb, ub, cfg, alpha)
            if not math.isfinite(obj.loss_total):
                raise NonFinite("objective is not finite", epoch=epoch)
            for bucket, value in zip(parts, (obj.loss_total, obj.loss_utility, obj.loss_unlearn)):
                bucket.append(value)
            ckpt = _step(ckpt, obj.gradient, cfg, epoch, state)

        row = _row(epoch, tuple(_mean(p) for p in parts), _accuracies(ckpt, eval_sets))
        trace.append(row)
        _LOGGER.info(
            f"unlearn[{cfg.method}] epoch {epoch}: loss={row.loss_total:.4f} "
            f"acc_u={row.acc_unlearn:.3f} acc_r={row.acc_retain:.3f} "
            f"acc_val={row.acc_validation:.3f}"
        )
        reason = _should_stop(cfg, trace, row, ckpt, unlearn_set, holdout)
        if reason:
            trace.stopped_epoch, trace.stop_reason = epoch, reason
            _LOGGER.info(f"Early stop after epoch {epoch}: {reason}")
            break
    return ckpt, trace
