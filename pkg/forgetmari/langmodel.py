"""
Tiny fixed-context autoregressive language model with analytic gradients.

Architecture: the k tokens preceding position t (left-padded with <bos>) are
embedded with one shared table, concatenated, passed through a tanh hidden
layer and a softmax over the vocabulary.

Parameters are one flat float64 vector laid out as
``E (V, D) | W1 (k*D, H) | b1 (H) | W2 (H, V) | b2 (V)``.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import log_softmax

from .const import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    BOS_ID,
    DEFAULT_CONTEXT_LEN,
    DEFAULT_EMBED_DIM,
    DEFAULT_HIDDEN_DIM,
    INIT_SCALE,
    PAD_ID,
    PROB_SUM_TOL,
    SOURCE_TAGS,
)
from .exceptions import (
    ArchMismatch,
    DomainError,
    EmptyBatch,
    EmptySequence,
    NonFinite,
    ShapeMismatch,
)
from .rng import stream
from .vocab import Vocabulary

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelArch:
    vocab_size: int
    context_len: int = DEFAULT_CONTEXT_LEN
    embed_dim: int = DEFAULT_EMBED_DIM
    hidden_dim: int = DEFAULT_HIDDEN_DIM

    def __post_init__(self):
        for name in ("vocab_size", "context_len", "embed_dim", "hidden_dim"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be positive")

    @property
    def shapes(self) -> dict[str, tuple[int, ...]]:
        v, k, d, h = self.vocab_size, self.context_len, self.embed_dim, self.hidden_dim
        return {"E": (v, d), "W1": (k * d, h), "b1": (h,), "W2": (h, v), "b2": (v,)}

    @property
    def n_params(self) -> int:
        return sum(math.prod(s) for s in self.shapes.values())

    def to_dict(self) -> dict:
        return {
            "context_len": self.context_len,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "vocab_size": self.vocab_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelArch":
        return cls(
            vocab_size=int(d["vocab_size"]),
            context_len=int(d["context_len"]),
            embed_dim=int(d["embed_dim"]),
            hidden_dim=int(d["hidden_dim"]),
        )


@dataclass(frozen=True, eq=False)
class ModelCheckpoint:
    """Value-semantic snapshot of the model parameters θ."""

    arch: ModelArch
    params: np.ndarray
    rng_seed: int = 0
    step: int = 0
    vocab: Optional[Vocabulary] = None

    def __post_init__(self):
        params = np.array(self.params, dtype=np.float64)
        if params.shape != (self.arch.n_params,):
            raise ArchMismatch(
                f"expected {self.arch.n_params} parameters for {self.arch}, got {params.shape}"
            )
        if not np.all(np.isfinite(params)):
            raise NonFinite("checkpoint parameters contain NaN or Inf")
        if self.vocab is not None and self.vocab.size != self.arch.vocab_size:
            raise ArchMismatch(
                f"vocabulary has {self.vocab.size} symbols, architecture expects "
                f"{self.arch.vocab_size}"
            )
        params.setflags(write=False)
        object.__setattr__(self, "params", params)

    @classmethod
    def zeros(cls, arch: ModelArch, vocab: Optional[Vocabulary] = None) -> "ModelCheckpoint":
        return cls(arch=arch, params=np.zeros(arch.n_params), vocab=vocab)

    def unpack(self) -> dict[str, np.ndarray]:
        return unpack_params(self.params, self.arch)

    def with_params(self, params: np.ndarray) -> "ModelCheckpoint":
        return replace(self, params=params)


def unpack_params(flat: np.ndarray, arch: ModelArch) -> dict[str, np.ndarray]:
    """Views of the flat vector, in declaration order."""
    out, offset = {}, 0
    for name, shape in arch.shapes.items():
        n = math.prod(shape)
        out[name] = flat[offset : offset + n].reshape(shape)
        offset += n
    return out


def init_checkpoint(
    arch: ModelArch,
    seed: int,
    vocab: Optional[Vocabulary] = None,
    scale: float = INIT_SCALE,
) -> ModelCheckpoint:
    """Uniform(-scale, scale) initialization from the seeded ``init`` stream."""
    rng = stream(seed, "init")
    params = rng.uniform(-scale, scale, size=arch.n_params)
    return ModelCheckpoint(arch=arch, params=params, rng_seed=seed, step=0, vocab=vocab)


@dataclass(frozen=True, eq=False)
class SequenceBatch:
    """Token-id sequences, truncated/right-padded with <pad> to length T.

    The <bos> prefix is not stored: every context window is left-padded with
    <bos>, so position 0 is predicted from k <bos> tokens.
    """

    tokens: np.ndarray
    lengths: np.ndarray

    def __post_init__(self):
        tokens = np.array(self.tokens, dtype=np.int64)
        if tokens.ndim != 2 or tokens.shape[1] < 1:
            raise ShapeMismatch(f"tokens must have shape (B, T>=1), got {tokens.shape}")
        lengths = np.array(self.lengths, dtype=np.int64)
        if lengths.shape != (tokens.shape[0],):
            raise ShapeMismatch("one length per sequence is required")
        if np.any(tokens < 0):
            raise ShapeMismatch("token ids must be non-negative")
        tokens.setflags(write=False)
        lengths.setflags(write=False)
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def from_ids(cls, sequences: Sequence[Sequence[int]], T: int) -> "SequenceBatch":
        if T < 1:
            raise DomainError(f"T must be at least 1, got {T}")
        tokens = np.full((len(sequences), T), PAD_ID, dtype=np.int64)
        lengths = np.zeros(len(sequences), dtype=np.int64)
        for i, seq in enumerate(sequences):
            ids = list(seq)[:T]
            tokens[i, : len(ids)] = ids
            lengths[i] = len(ids)
        return cls(tokens=tokens, lengths=lengths)

    @classmethod
    def from_texts(cls, vocab: Vocabulary, texts: Sequence[str], T: int) -> "SequenceBatch":
        return cls.from_ids([vocab.encode(t) for t in texts], T)

    @property
    def T(self) -> int:
        return self.tokens.shape[1]

    @property
    def size(self) -> int:
        return self.tokens.shape[0]

    def __len__(self) -> int:
        return self.size

    def mask(self) -> np.ndarray:
        """True on real (non-padding) positions."""
        return np.arange(self.T)[None, :] < self.lengths[:, None]

    def subset(self, indices) -> "SequenceBatch":
        idx = np.asarray(indices, dtype=np.int64)
        return SequenceBatch(tokens=self.tokens[idx], lengths=self.lengths[idx])

    def concat(self, other: "SequenceBatch") -> "SequenceBatch":
        if other.T != self.T:
            raise ShapeMismatch(f"cannot concatenate T={self.T} with T={other.T}")
        return SequenceBatch(
            tokens=np.concatenate([self.tokens, other.tokens]),
            lengths=np.concatenate([self.lengths, other.lengths]),
        )


@dataclass(frozen=True, eq=False)
class PositionMarginals:
    """Averaged next-token marginals p^s_t, one row per position t."""

    per_t: np.ndarray
    source_tag: str = "retain"
    batch_size: int = 1

    def __post_init__(self):
        per_t = np.array(self.per_t, dtype=np.float64)
        if per_t.ndim != 2 or per_t.shape[0] < 1:
            raise ShapeMismatch(f"per_t must have shape (T>=1, V), got {per_t.shape}")
        if self.source_tag not in SOURCE_TAGS:
            raise DomainError(f"source_tag must be one of {SOURCE_TAGS}")
        if np.any(per_t < 0) or np.any(np.abs(per_t.sum(axis=1) - 1.0) > PROB_SUM_TOL):
            raise DomainError("every position must hold a probability distribution")
        per_t.setflags(write=False)
        object.__setattr__(self, "per_t", per_t)

    @property
    def T(self) -> int:
        return self.per_t.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.per_t.shape[1]

    def pooled(self) -> np.ndarray:
        """Position-mean distribution p̄^s."""
        return self.per_t.mean(axis=0)


# ============================================================
# Forward
# ============================================================


def _check_batch(arch: ModelArch, batch: SequenceBatch) -> None:
    if batch.size and int(batch.tokens.max()) >= arch.vocab_size:
        raise ArchMismatch(
            f"batch holds token id {int(batch.tokens.max())} but vocab_size is {arch.vocab_size}"
        )


def _contexts(batch: SequenceBatch, k: int) -> np.ndarray:
    """(B, T, k) ids of the k tokens preceding each position."""
    bos = np.full((batch.size, k), BOS_ID, dtype=np.int64)
    padded = np.concatenate([bos, batch.tokens], axis=1)
    return sliding_window_view(padded, k, axis=1)[:, : batch.T, :]


def _forward_full(ckpt: ModelCheckpoint, batch: SequenceBatch):
    arch = ckpt.arch
    _check_batch(arch, batch)
    w = ckpt.unpack()
    ctx = _contexts(batch, arch.context_len)
    x = w["E"][ctx].reshape(batch.size, batch.T, arch.context_len * arch.embed_dim)
    h = np.tanh(x @ w["W1"] + w["b1"])
    log_probs = log_softmax(h @ w["W2"] + w["b2"], axis=-1)
    return ctx, x, h, log_probs


def forward(ckpt: ModelCheckpoint, batch: SequenceBatch) -> np.ndarray:
    """Next-token distributions, shape (B, T, V); row [b, t] is p_θ(·|y_<t)."""
    return np.exp(_forward_full(ckpt, batch)[3])


def averaged_marginals(
    ckpt: ModelCheckpoint, batch: SequenceBatch, source_tag: str = "retain"
) -> PositionMarginals:
    """Mean over the batch of the forward distributions at every position."""
    if batch.size == 0:
        raise EmptyBatch("averaged marginals need at least one sequence")
    probs = forward(ckpt, batch)
    return PositionMarginals(probs.mean(axis=0), source_tag, batch.size)


def next_token_predictions(ckpt: ModelCheckpoint, batch: SequenceBatch) -> np.ndarray:
    """Argmax token per position; ties resolve to the lowest id."""
    return forward(ckpt, batch).argmax(axis=-1)


# ============================================================
# Scores
# ============================================================


def sequence_score(dists: np.ndarray, x: Sequence[int]) -> float:
    """Mean negative log-probability of ``x[t]`` under ``dists[t]``.

    Returns ``math.inf`` when some x_t has probability zero.
    """
    x = np.asarray(x, dtype=np.int64)
    if x.size == 0:
        raise EmptySequence("cannot score an empty sequence")
    dists = np.asarray(dists, dtype=np.float64)
    if dists.shape[0] < x.size:
        raise ShapeMismatch(f"{dists.shape[0]} positions cannot score a sequence of {x.size}")
    p = dists[np.arange(x.size), x]
    if np.any(p <= 0):
        _LOGGER.warning("Zero probability assigned to an observed token; score is +inf")
        return math.inf
    return math.fsum(-np.log(p)) / x.size


def token_log_probs(ckpt: ModelCheckpoint, x: Sequence[int]) -> np.ndarray:
    """ln p_θ(x_t | x_<t) for every position of ``x``."""
    x = list(x)
    if not x:
        raise EmptySequence("cannot score an empty sequence")
    log_probs = _forward_full(ckpt, SequenceBatch.from_ids([x], len(x)))[3][0]
    return log_probs[np.arange(len(x)), x]


def cross_entropy_score(
    ckpt: ModelCheckpoint,
    x: Sequence[int],
    context: Union[PositionMarginals, Sequence[int]],
) -> float:
    """S_θ(x, y): mean per-token negative log-likelihood of x.

    ``context`` is either a raw sequence y (contexts taken from y_<t) or a
    ``PositionMarginals`` (x_t scored against p^s_t).
    """
    x = list(x)
    if not x:
        raise EmptySequence("cannot score an empty sequence")
    if isinstance(context, PositionMarginals):
        return sequence_score(context.per_t, x)
    y = list(context)
    probs = forward(ckpt, SequenceBatch.from_ids([y], len(x)))[0]
    return sequence_score(probs, x)


def mean_cross_entropy(ckpt: ModelCheckpoint, batch: SequenceBatch) -> float:
    """Mean next-token cross-entropy over the non-padding positions of a batch."""
    return cross_entropy_gradient(ckpt, batch, with_grad=False)[0]


def cross_entropy_gradient(ckpt: ModelCheckpoint, batch: SequenceBatch, with_grad: bool = True):
    """(mean cross-entropy, gradient w.r.t. params) over non-padding positions."""
    mask = batch.mask()
    n = int(mask.sum())
    if n == 0:
        raise EmptyBatch("batch has no non-padding positions")
    ctx, x, h, log_probs = _forward_full(ckpt, batch)
    b_idx, t_idx = np.nonzero(mask)
    tok = batch.tokens[b_idx, t_idx]
    loss = math.fsum(-log_probs[b_idx, t_idx, tok]) / n
    if not with_grad:
        return loss, None
    # softmax cross-entropy: dL/dlogits = (p - onehot) / n on unmasked positions
    dlogits = np.exp(log_probs) * (mask[..., None] / n)
    dlogits[b_idx, t_idx, tok] -= 1.0 / n
    return loss, _backward_logits(ckpt, ctx, x, h, dlogits)


# ============================================================
# Backward
# ============================================================


def backward(ckpt: ModelCheckpoint, batch: SequenceBatch, dloss_ddist: np.ndarray) -> np.ndarray:
    """Reverse-mode gradient of a loss given its gradient w.r.t. ``forward`` output.

    Args:
        ckpt: Checkpoint the forward pass ran on.
        batch: The batch the forward pass ran on.
        dloss_ddist: dL/dp, same shape (B, T, V) as ``forward(ckpt, batch)``.

    Returns:
        Flat gradient vector laid out like ``ckpt.params``.
    """
    arch = ckpt.arch
    g = np.asarray(dloss_ddist, dtype=np.float64)
    expected = (batch.size, batch.T, arch.vocab_size)
    if g.shape != expected:
        raise ShapeMismatch(f"upstream gradient has shape {g.shape}, expected {expected}")

    ctx, x, h, log_probs = _forward_full(ckpt, batch)
    probs = np.exp(log_probs)
    # softmax Jacobian-vector product
    dlogits = probs * (g - (g * probs).sum(axis=-1, keepdims=True))
    return _backward_logits(ckpt, ctx, x, h, dlogits)


def _backward_logits(ckpt: ModelCheckpoint, ctx, x, h, dlogits: np.ndarray) -> np.ndarray:
    arch = ckpt.arch
    w = ckpt.unpack()
    dW2 = np.einsum("bth,btv->hv", h, dlogits)
    db2 = dlogits.sum(axis=(0, 1))
    dpre = (dlogits @ w["W2"].T) * (1.0 - h * h)
    dW1 = np.einsum("btj,bth->jh", x, dpre)
    db1 = dpre.sum(axis=(0, 1))
    dx = dpre @ w["W1"].T
    dE = np.zeros(arch.shapes["E"])
    np.add.at(dE, ctx.reshape(-1), dx.reshape(-1, arch.embed_dim))

    return np.concatenate([dE.ravel(), dW1.ravel(), db1, dW2.ravel(), db2])


def marginals_backward(
    ckpt: ModelCheckpoint, batch: SequenceBatch, d_marginals: np.ndarray
) -> np.ndarray:
    """Gradient of a loss expressed on ``averaged_marginals(ckpt, batch)``.

    ``d_marginals`` has shape (T, V); each sequence receives 1/|batch| of it.
    """
    if batch.size == 0:
        raise EmptyBatch("averaged marginals need at least one sequence")
    d = np.asarray(d_marginals, dtype=np.float64)
    if d.shape != (batch.T, ckpt.arch.vocab_size):
        raise ShapeMismatch(
            f"marginal gradient has shape {d.shape}, expected {(batch.T, ckpt.arch.vocab_size)}"
        )
    upstream = np.broadcast_to(d / batch.size, (batch.size, *d.shape))
    return backward(ckpt, batch, upstream)


def _checked_gradient(
    ckpt: ModelCheckpoint, grad: np.ndarray, clip_norm: Optional[float]
) -> np.ndarray:
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != ckpt.params.shape:
        raise ShapeMismatch(f"gradient has shape {grad.shape}, params {ckpt.params.shape}")
    if not np.all(np.isfinite(grad)):
        raise NonFinite("gradient contains NaN or Inf")
    if clip_norm is not None:
        norm = float(np.linalg.norm(grad))
        if norm > clip_norm:
            grad = grad * (clip_norm / norm)
    return grad


def sgd_step(
    ckpt: ModelCheckpoint,
    grad: np.ndarray,
    lr: float,
    clip_norm: Optional[float] = None,
) -> ModelCheckpoint:
    """params <- params - lr * grad (after optional norm clipping); step += 1."""
    if lr < 0:
        raise DomainError(f"learning rate must be non-negative, got {lr}")
    grad = _checked_gradient(ckpt, grad, clip_norm)
    return replace(ckpt, params=ckpt.params - lr * grad, step=ckpt.step + 1)


@dataclass
class AdamState:
    """First and second moment estimates; lives for one training run only."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n_params: int) -> "AdamState":
        return cls(np.zeros(n_params), np.zeros(n_params))


def adam_step(
    ckpt: ModelCheckpoint,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    clip_norm: Optional[float] = None,
) -> ModelCheckpoint:
    """Bias-corrected Adam update; ``state`` is advanced in place.

    Every coordinate moves by about ``lr`` per step whatever its gradient
    scale, so parameters that only rare tokens touch keep pace with the rest.
    """
    if lr < 0:
        raise DomainError(f"learning rate must be non-negative, got {lr}")
    grad = _checked_gradient(ckpt, grad, clip_norm)
    if state.m.shape != grad.shape:
        raise ShapeMismatch(f"optimizer state has shape {state.m.shape}, params {grad.shape}")
    state.t += 1
    state.m = ADAM_BETA1 * state.m + (1.0 - ADAM_BETA1) * grad
    state.v = ADAM_BETA2 * state.v + (1.0 - ADAM_BETA2) * grad**2
    m_hat = state.m / (1.0 - ADAM_BETA1**state.t)
    v_hat = state.v / (1.0 - ADAM_BETA2**state.t)
    update = lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return replace(ckpt, params=ckpt.params - update, step=ckpt.step + 1)
