"""Temporal looping: time resets against post-convergence blow-up.

The integrators' kick coefficients grow without bound with physical time (as
e^{2 eta t} or t^{2p-1}).  In exact arithmetic the decaying gradient beats
that growth, but in floating point the gradient bottoms out at roundoff while
the coefficient keeps growing, so a fully converged iterate is eventually
kicked away from the minimizer.  The cure is to reset physical time whenever
an instability test predicts the next position increment would dominate the
previous one, either multiplicatively (t <- max(eps, beta t), beta in (0,1))
or subtractively (t <- max(eps, t - nu h), nu > 1).  beta between 0.6 and
0.95 works well in practice; the checks and resets cost no extra gradient
evaluations.

The instability tests (strict inequalities; ties do not trigger):

* expo family:  C h^2 eta^2 e^{eta t} ||G||  >  e^{-eta h} ||dq||
* poly family:  C h^2 p^2 (t + h)^{p+1} ||G||  >  t ||dq||

evaluated with the pre-advance time of the loop, right after the restart
check and before the time advance and momentum kick.  Defined for the
non-adaptive base families only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bregman import BregmanConfig, ExtendedState, UnsupportedFamilyError

__all__ = ["LoopingStrategy", "instability_detected", "reset_time"]


@dataclass(frozen=True)
class LoopingStrategy:
    """off | multiplicative (beta) | subtractive (nu), with time floor eps."""

    mode: str = "off"
    beta: float = 0.8
    nu: float = 2.0
    eps: float = 0.001

    def __post_init__(self):
        if self.mode not in ("off", "multiplicative", "subtractive"):
            raise ValueError(f"unknown looping mode {self.mode!r}")
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")
        if self.nu <= 1.0:
            raise ValueError("nu must exceed 1")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")

    @classmethod
    def off(cls) -> "LoopingStrategy":
        return cls(mode="off")

    @classmethod
    def multiplicative(cls, beta: float = 0.8, eps: float = 0.001) -> "LoopingStrategy":
        return cls(mode="multiplicative", beta=beta, eps=eps)

    @classmethod
    def subtractive(cls, nu: float = 2.0, eps: float = 0.001) -> "LoopingStrategy":
        return cls(mode="subtractive", nu=nu, eps=eps)


def instability_detected(cfg: BregmanConfig, state: ExtendedState, h: float,
                         grad: np.ndarray, dq: np.ndarray) -> bool:
    """Strict instability test of the family, evaluated in log space.

    Log space keeps the test meaningful where (t+h)^{p+1} or e^{eta t} would
    overflow.  Zero gradient never triggers; zero increment with nonzero
    gradient always does.
    """
    if cfg.family not in ("poly", "expo"):
        raise UnsupportedFamilyError(
            "instability tests exist for the non-adaptive poly/expo families")
    gn = math.sqrt(float(grad @ grad))
    dn = math.sqrt(float(dq @ dq))
    if gn == 0.0:
        return False
    if dn == 0.0:
        return True
    t = state.t
    if cfg.family == "expo":
        eta = cfg.eta
        lhs = math.log(cfg.C * h * h * eta * eta) + eta * t + math.log(gn)
        rhs = -eta * h + math.log(dn)
    else:
        p = cfg.p
        lhs = math.log(cfg.C * h * h * p * p) \
            + (p + 1.0) * math.log(t + h) + math.log(gn)
        rhs = math.log(t) + math.log(dn)
    return lhs > rhs


def reset_time(strategy: LoopingStrategy, t: float, h: float) -> float:
    """Apply the reset rule; output always lies in [eps, t]."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    if strategy.mode == "off":
        return t
    if strategy.mode == "multiplicative":
        return max(strategy.eps, strategy.beta * t)
    return max(strategy.eps, t - strategy.nu * h)
