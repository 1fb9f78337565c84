"""Central finite-difference gradients for certifying analytic ones."""

from typing import Callable

import numpy as np

from .langmodel import ModelCheckpoint


def numerical_gradient(
    loss_fn: Callable[[ModelCheckpoint], float], ckpt: ModelCheckpoint, h: float = 1e-5
) -> np.ndarray:
    """(f(θ + h e_i) - f(θ - h e_i)) / 2h for every parameter i."""
    base = np.array(ckpt.params)
    grad = np.zeros_like(base)
    for i in range(base.size):
        plus = base.copy()
        plus[i] += h
        minus = base.copy()
        minus[i] -= h
        grad[i] = (loss_fn(ckpt.with_params(plus)) - loss_fn(ckpt.with_params(minus))) / (2 * h)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """max_i |a_i - n_i| relative to the larger of the two gradients' max-norms.

    The scale never drops below ``floor``.
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), floor)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)
