"""
Finite-alphabet information-theory primitives.

All quantities are in nats. Every divergence accepts a ``TokenDistribution``
or any array-like whose last axis is the vocabulary; leading axes are
treated as a batch, so per-position computations over a ``(T, V)`` array
return a length-``T`` vector.

Conventions: ``0·log 0 = 0`` and ``0·log(0/0) = 0``. Zeros in externally
supplied distributions are never smoothed.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.optimize import bisect
from scipy.special import entr, rel_entr

from .const import BISECT_MAXITER, BISECT_XTOL, BOUNDARY_CLAMP, LN2, PROB_SUM_TOL
from .exceptions import DomainError, LengthMismatch, SupportMismatch

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TokenDistribution:
    """Probability vector over a finite vocabulary."""

    probs: np.ndarray

    @classmethod
    def from_probs(cls, probs, size: Optional[int] = None) -> "TokenDistribution":
        """Validate and wrap a probability vector.

        Raises:
            DomainError: negative entries, or entries not summing to 1.
            LengthMismatch: ``size`` given and the vector length differs.
        """
        arr = np.array(probs, dtype=np.float64)
        if arr.ndim != 1:
            raise DomainError(f"a token distribution is a vector, got shape {arr.shape}")
        if size is not None and arr.shape[0] != size:
            raise LengthMismatch(f"expected {size} entries, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise DomainError("probabilities must be finite and non-negative")
        if abs(math.fsum(arr) - 1.0) > PROB_SUM_TOL:
            raise DomainError(f"probabilities sum to {math.fsum(arr)!r}, not 1")
        arr.setflags(write=False)
        return cls(probs=arr)

    @classmethod
    def uniform(cls, size: int) -> "TokenDistribution":
        return cls.from_probs(np.full(size, 1.0 / size))

    def __len__(self) -> int:
        return self.probs.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)


Distribution = Union[TokenDistribution, np.ndarray, list, tuple]


def _as_array(x: Distribution) -> np.ndarray:
    if isinstance(x, TokenDistribution):
        return x.probs
    return np.asarray(x, dtype=np.float64)


def _pair(p: Distribution, q: Distribution) -> tuple[np.ndarray, np.ndarray]:
    a, b = _as_array(p), _as_array(q)
    if a.shape != b.shape:
        raise LengthMismatch(f"distribution shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _out(x):
    """Plain float for a single distribution, array for a batch."""
    if np.ndim(x) == 0:
        return float(x)
    return x


def kl_divergence(p: Distribution, q: Distribution):
    """D_KL(p || q) = sum_v p(v) log(p(v)/q(v)).

    Raises:
        SupportMismatch: p(v) > 0 where q(v) = 0.
        LengthMismatch: shapes differ.
    """
    a, b = _pair(p, q)
    if np.any((a > 0) & (b <= 0)):
        raise SupportMismatch("q(v) = 0 where p(v) > 0; KL divergence is infinite")
    return _out(np.maximum(rel_entr(a, b).sum(axis=-1), 0.0))


def js_divergence(p: Distribution, q: Distribution):
    """Jensen-Shannon divergence with m = (p + q)/2, in [0, ln 2].

    The summand is formed symmetrically so JS(p, q) == JS(q, p) bit for bit.
    """
    a, b = _pair(p, q)
    m = 0.5 * (a + b)
    terms = rel_entr(a, m) + rel_entr(b, m)
    return _out(np.clip(0.5 * terms.sum(axis=-1), 0.0, LN2))


def entropy(p: Distribution):
    """Shannon entropy in nats."""
    return _out(entr(_as_array(p)).sum(axis=-1))


def weighted_js_divergence(p: Distribution, q: Distribution, weight: float):
    """Mutual information I(X; Z) when X ~ q if Z=1 (prior ``weight``), p if Z=0.

    Equals ``js_divergence(p, q)`` at ``weight = 0.5``.
    """
    if not 0.0 < weight < 1.0:
        raise DomainError(f"weight must lie in (0, 1), got {weight}")
    if weight == 0.5:
        return js_divergence(p, q)
    a, b = _pair(p, q)
    m = (1.0 - weight) * a + weight * b
    value = (1.0 - weight) * rel_entr(a, m).sum(axis=-1) + weight * rel_entr(b, m).sum(axis=-1)
    return _out(np.maximum(value, 0.0))


def tv_distance(p: Distribution, q: Distribution):
    """Total variation distance, half the L1 distance."""
    a, b = _pair(p, q)
    return _out(0.5 * np.abs(a - b).sum(axis=-1))


def _check_unit(p: float, name: str = "p") -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {p}")
    return p


def binary_entropy(p: float) -> float:
    """H_2(p) = -p ln p - (1-p) ln(1-p)."""
    p = _check_unit(p)
    return float(entr(p) + entr(1.0 - p))


def binary_entropy_inv(h: float) -> float:
    """Inverse of H_2 restricted to [0, 1/2], by bisection.

    Inputs within 1e-12 outside [0, ln 2] are clamped onto the interval.
    """
    h = float(h)
    if h < -BOUNDARY_CLAMP or h > LN2 + BOUNDARY_CLAMP:
        raise DomainError(f"h must lie in [0, ln 2], got {h}")
    if h <= 0.0:
        return 0.0
    if h >= LN2:
        return 0.5
    return float(
        bisect(
            lambda x: binary_entropy(x) - h,
            0.0,
            0.5,
            xtol=BISECT_XTOL,
            maxiter=BISECT_MAXITER,
        )
    )


def kl_pointwise_coeff(M: float) -> float:
    """(ln M) M / (M - 1), the point-wise KL coefficient for ratio cap M."""
    M = float(M)
    if not M > 1.0:
        raise DomainError(f"M must exceed 1, got {M}")
    return math.log1p(M - 1.0) * M / (M - 1.0)


def mix(p: Distribution, q: Distribution, alpha: float):
    """alpha·p + (1 - alpha)·q; alpha weights the first argument."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    a, b = _pair(p, q)
    return alpha * a + (1.0 - alpha) * b


def to_bits(nats: float) -> float:
    return nats / LN2
