"""
Marginal-information (MarI) loss.

The union marginals are the mixture ``p^d_t = α p^r_t + (1-α) p^u_t`` and the
loss is the Jensen-Shannon divergence between ``p^d`` and ``p^r``:

* token-wise: averaged over positions, ``(1/T) Σ_t JS(p^d_t, p^r_t)``;
* pooled: computed once on position-mean distributions,
  ``JS(p̄^d, p̄^r)``, a lower bound of the token-wise value.

Gradients flow through both arguments of JS; ``p^u`` reaches θ through the
mixture.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .const import MARI_MODES
from .exceptions import DomainError, ShapeMismatch
from .infomath import js_divergence, kl_divergence, mix
from .langmodel import (
    ModelCheckpoint,
    PositionMarginals,
    SequenceBatch,
    averaged_marginals,
    marginals_backward,
)

_LOGGER = logging.getLogger(__name__)

__all__ = [
    "PositionMarginals",
    "MarIEstimate",
    "alpha_for",
    "mari_tokenwise",
    "mari_pooled",
    "marginal_information",
    "alt_marginal_kl",
    "mari_value",
    "mari_loss_and_gradient",
    "mari_gradient",
]


@dataclass(frozen=True)
class MarIEstimate:
    value: float
    mode: str
    alpha: float
    per_position_js: tuple[float, ...] = ()


def alpha_for(n_retain: int, n_unlearn: int) -> float:
    """α = |r| / (|r| + |u|)."""
    if n_retain < 1 or n_unlearn < 1:
        raise DomainError("both sets need at least one sequence to define α")
    return n_retain / (n_retain + n_unlearn)


def _check(pr: PositionMarginals, pu: PositionMarginals, alpha: float) -> None:
    if pr.per_t.shape != pu.per_t.shape:
        raise ShapeMismatch(f"marginal shapes differ: {pr.per_t.shape} vs {pu.per_t.shape}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def _check_mode(mode: str) -> None:
    if mode not in MARI_MODES:
        raise DomainError(f"mode must be one of {MARI_MODES}, got {mode!r}")


def mari_tokenwise(pr: PositionMarginals, pu: PositionMarginals, alpha: float) -> MarIEstimate:
    _check(pr, pu, alpha)
    pd = mix(pr.per_t, pu.per_t, alpha)
    js = np.atleast_1d(js_divergence(pd, pr.per_t))
    return MarIEstimate(
        value=math.fsum(js) / js.size,
        mode="token_wise",
        alpha=alpha,
        per_position_js=tuple(float(v) for v in js),
    )


def mari_pooled(pr: PositionMarginals, pu: PositionMarginals, alpha: float) -> MarIEstimate:
    _check(pr, pu, alpha)
    pr_bar = pr.pooled()
    pd_bar = mix(pr_bar, pu.pooled(), alpha)
    return MarIEstimate(value=js_divergence(pd_bar, pr_bar), mode="pooled", alpha=alpha)


def marginal_information(
    pr: PositionMarginals, pu: PositionMarginals, alpha: float, mode: str = "token_wise"
) -> MarIEstimate:
    """Dispatch on estimator; ``pooled`` is the heterogeneous-data setting."""
    _check_mode(mode)
    if mode == "pooled":
        return mari_pooled(pr, pu, alpha)
    return mari_tokenwise(pr, pu, alpha)


def alt_marginal_kl(
    pr: PositionMarginals,
    pu: PositionMarginals,
    alpha: float,
    frozen_pr: Optional[PositionMarginals] = None,
) -> float:
    """(1/T) Σ_t KL(p^d_t || p^r_t), or against ``frozen_pr`` when given.

    Reported for comparison; never optimized.
    """
    _check(pr, pu, alpha)
    target = pr.per_t if frozen_pr is None else frozen_pr.per_t
    if target.shape != pr.per_t.shape:
        raise ShapeMismatch("frozen marginals must match the retain marginals' shape")
    pd = mix(pr.per_t, pu.per_t, alpha)
    kl = np.atleast_1d(kl_divergence(pd, target))
    return math.fsum(kl) / kl.size


# ============================================================
# Gradients
# ============================================================


def _js_partials(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """∂JS/∂a = ½ log(a/m), ∂JS/∂b = ½ log(b/m) with m = (a+b)/2."""
    m = 0.5 * (a + b)
    with np.errstate(divide="ignore", invalid="ignore"):
        da = np.where(a > 0, 0.5 * (np.log(a) - np.log(m)), 0.0)
        db = np.where(b > 0, 0.5 * (np.log(b) - np.log(m)), 0.0)
    return da, db


def mari_loss_and_gradient(
    ckpt: ModelCheckpoint,
    retain_batch: SequenceBatch,
    unlearn_batch: SequenceBatch,
    alpha: float,
    mode: str = "token_wise",
) -> tuple[MarIEstimate, np.ndarray]:
    """MarI estimate at θ together with its exact gradient w.r.t. θ."""
    _check_mode(mode)
    pr = averaged_marginals(ckpt, retain_batch, "retain")
    pu = averaged_marginals(ckpt, unlearn_batch, "unlearn")
    estimate = marginal_information(pr, pu, alpha, mode)

    T = pr.T
    if mode == "pooled":
        pr_bar = pr.pooled()
        pd_bar = mix(pr_bar, pu.pooled(), alpha)
        d_pd, d_pr = _js_partials(pd_bar, pr_bar)
        d_pd = np.broadcast_to(d_pd / T, pr.per_t.shape)
        d_pr = np.broadcast_to(d_pr / T, pr.per_t.shape)
    else:
        pd = mix(pr.per_t, pu.per_t, alpha)
        d_pd, d_pr = _js_partials(pd, pr.per_t)
        d_pd, d_pr = d_pd / T, d_pr / T

    grad = marginals_backward(ckpt, retain_batch, alpha * d_pd + d_pr)
    grad = grad + marginals_backward(ckpt, unlearn_batch, (1.0 - alpha) * d_pd)
    return estimate, grad


def mari_value(
    ckpt: ModelCheckpoint,
    retain_batch: SequenceBatch,
    unlearn_batch: SequenceBatch,
    alpha: float,
    mode: str = "token_wise",
) -> float:
    pr = averaged_marginals(ckpt, retain_batch, "retain")
    pu = averaged_marginals(ckpt, unlearn_batch, "unlearn")
    return marginal_information(pr, pu, alpha, mode).value


def mari_gradient(
    ckpt: ModelCheckpoint,
    retain_batch: SequenceBatch,
    unlearn_batch: SequenceBatch,
    alpha: float,
    mode: str = "token_wise",
) -> np.ndarray:
    return mari_loss_and_gradient(ckpt, retain_batch, unlearn_batch, alpha, mode)[1]
