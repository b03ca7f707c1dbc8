"""Reference first-order optimizers: gradient descent, Nesterov, Adam.

Pure step functions; the caller owns the optimizer state.  These are the
comparison baselines for the symplectic optimizers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

__all__ = ["AdamParams", "gd_step", "nag_step", "adam_step"]


@dataclass(frozen=True)
class AdamParams:
    """Adam hyperparameters; the defaults are the standard ones."""

    beta1: float = 0.9
    beta2: float = 0.999
    h: float = 0.001
    eps: float = 1e-8

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1/beta2 must lie in [0, 1)")
        if self.h <= 0.0 or self.eps <= 0.0:
            raise ValueError("h and eps must be positive")


def gd_step(x: np.ndarray, grad: np.ndarray, h: float) -> np.ndarray:
    """Plain gradient descent:  x - h grad."""
    if h <= 0.0:
        raise ValueError("h must be positive")
    return x - h * grad


def nag_step(x_k: np.ndarray, x_prev: np.ndarray, k: int, h: float,
             grad_at: Callable[[np.ndarray], np.ndarray]
             ) -> Tuple[np.ndarray, np.ndarray]:
    """Nesterov accelerated gradient.

        y_k     = x_k + ((k-1)/(k+2)) (x_k - x_{k-1})
        x_{k+1} = y_k - h grad f(y_k)

    Start the recursion with y_0 = x_0 (i.e. x_1 = x_0 - h grad f(x_0)) and
    call with k = 1, 2, ...; k = 1 has momentum coefficient 0.  Returns
    (x_{k+1}, y_k).
    """
    if k < 1:
        raise ValueError("k starts at 1")
    y_k = x_k + ((k - 1.0) / (k + 2.0)) * (x_k - x_prev)
    x_next = y_k - h * grad_at(y_k)
    return x_next, y_k


def adam_step(x: np.ndarray, m: np.ndarray, v: np.ndarray, k: int,
              params: AdamParams, grad: np.ndarray
              ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One Adam update for step index k (0-based, with m0 = v0 = 0).

        m' = b1 m + (1-b1) g          mhat = m' / (1 - b1^{k+1})
        v' = b2 v + (1-b2) g*g        vhat = v' / (1 - b2^{k+1})
        x' = x - h mhat / (sqrt(vhat) + eps)

    Returns (x', m', v').
    """
    if k < 0:
        raise ValueError("k starts at 0")
    b1, b2 = params.beta1, params.beta2
    m_new = b1 * m + (1.0 - b1) * grad
    v_new = b2 * v + (1.0 - b2) * (grad * grad)
    m_hat = m_new / (1.0 - b1 ** (k + 1))
    v_hat = v_new / (1.0 - b2 ** (k + 1))
    x_new = x - params.h * m_hat / (np.sqrt(v_hat) + params.eps)
    return x_new, m_new, v_new
