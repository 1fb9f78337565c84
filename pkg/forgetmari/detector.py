"""
White-box membership-inference detectors and ROC-AUC.

Scores read "higher = the model is more confident it has seen the text" for
min-k%; perplexity reads the other way, which ``DETECTOR_ORIENTATION`` absorbs
so that a low AUC always means the detector believes the members were
trained on.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .const import DEFAULT_K_FRACTION, DETECTOR_ORIENTATION, DETECTORS, ORIENTATIONS
from .exceptions import DomainError, EmptyScores, EmptySequence
from .langmodel import (
    ModelCheckpoint,
    SequenceBatch,
    cross_entropy_score,
    forward,
    token_log_probs,
)

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectorConfig:
    detector: str = "min_k"
    k_fraction: float = DEFAULT_K_FRACTION

    def __post_init__(self):
        if self.detector not in DETECTORS:
            raise DomainError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        _check_k(self.k_fraction)


@dataclass
class DetectionReport:
    detector: str
    k_fraction: float
    auc: float
    scores_member: list[float] = field(default_factory=list)
    scores_nonmember: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_k(k_fraction: float) -> None:
    if not 0.0 < k_fraction <= 1.0:
        raise DomainError(f"k_fraction must lie in (0, 1], got {k_fraction}")


def min_k_from_log_probs(log_probs: Sequence[float], k_fraction: float) -> float:
    """Mean of the lowest ceil(k·T) per-token log-probabilities."""
    _check_k(k_fraction)
    lp = np.sort(np.asarray(log_probs, dtype=np.float64))
    if lp.size == 0:
        raise EmptySequence("cannot score an empty sequence")
    # guard against k·T landing a rounding error above an integer
    n = max(1, math.ceil(k_fraction * lp.size - 1e-9))
    return math.fsum(lp[:n]) / n


def min_k_score(ckpt: ModelCheckpoint, x: Sequence[int], k_fraction: float) -> float:
    _check_k(k_fraction)
    return min_k_from_log_probs(token_log_probs(ckpt, x), k_fraction)


def perplexity_score(ckpt: ModelCheckpoint, x: Sequence[int]) -> float:
    return math.exp(cross_entropy_score(ckpt, x, x))


def roc_auc(
    scores_member: Sequence[float],
    scores_nonmember: Sequence[float],
    orientation: str = "nonmember_positive",
) -> float:
    """Mann-Whitney AUC; ties count one half.

    ``nonmember_positive``: fraction of (member, non-member) pairs where the
    non-member scores higher. ``member_positive`` is its complement.
    """
    if orientation not in ORIENTATIONS:
        raise DomainError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    members = np.asarray(scores_member, dtype=np.float64)
    nonmembers = np.asarray(scores_nonmember, dtype=np.float64)
    if members.size == 0 or nonmembers.size == 0:
        raise EmptyScores("ROC-AUC needs at least one member and one non-member score")
    ranks = rankdata(np.concatenate([members, nonmembers]), method="average")
    n_m, n_n = members.size, nonmembers.size
    u_member = math.fsum(ranks[:n_m]) - n_m * (n_m + 1) / 2.0
    member_positive = u_member / (n_m * n_n)
    if orientation == "member_positive":
        return member_positive
    return 1.0 - member_positive


def _batch_log_probs(ckpt: ModelCheckpoint, batch: SequenceBatch) -> list[np.ndarray]:
    if batch.size == 0:
        return []
    probs = forward(ckpt, batch)
    out = []
    for b in range(batch.size):
        n = int(batch.lengths[b])
        if n == 0:
            raise EmptySequence(f"sequence {b} is empty")
        out.append(np.log(probs[b, np.arange(n), batch.tokens[b, :n]]))
    return out


def score_batch(ckpt: ModelCheckpoint, batch: SequenceBatch, cfg: DetectorConfig) -> list[float]:
    scores = []
    for lp in _batch_log_probs(ckpt, batch):
        if cfg.detector == "min_k":
            scores.append(min_k_from_log_probs(lp, cfg.k_fraction))
        else:
            scores.append(math.exp(-math.fsum(lp) / lp.size))
    return scores


def _overlap(batch: SequenceBatch, other: SequenceBatch) -> int:
    """Number of sequences of ``batch`` that also occur in ``other``."""
    keys = {tuple(other.tokens[i, : other.lengths[i]]) for i in range(other.size)}
    return sum(tuple(batch.tokens[i, : batch.lengths[i]]) in keys for i in range(batch.size))


def detect(
    ckpt: ModelCheckpoint,
    members: SequenceBatch,
    holdout: SequenceBatch,
    cfg: DetectorConfig = DetectorConfig(),
    retain: Optional[SequenceBatch] = None,
) -> DetectionReport:
    """Score D_u (members) and a held-out set, and report the AUC.

    Holdout sequences should be unseen in training; overlap with the members,
    or with ``retain`` when given, is logged as a warning.
    """
    shared = _overlap(holdout, members)
    if shared:
        _LOGGER.warning(f"{shared} holdout sequences also appear among the members")
    if retain is not None:
        seen = _overlap(holdout, retain)
        if seen:
            _LOGGER.warning(f"{seen} holdout sequences also appear in the retain set")
    scores_m = score_batch(ckpt, members, cfg)
    scores_n = score_batch(ckpt, holdout, cfg)
    auc = roc_auc(scores_m, scores_n, DETECTOR_ORIENTATION[cfg.detector])
    _LOGGER.debug(f"{cfg.detector} detector AUC {auc:.4f}")
    return DetectionReport(
        detector=cfg.detector,
        k_fraction=cfg.k_fraction,
        auc=auc,
        scores_member=scores_m,
        scores_nonmember=scores_n,
    )
