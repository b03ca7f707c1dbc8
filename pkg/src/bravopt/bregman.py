"""Dynamics families for accelerated optimization.

Two one-parameter families of time-dependent Lagrangian/Hamiltonian systems
drive the optimizers: a polynomial family (rate parameter ``p``, objective gap
decaying like t^-p along exact trajectories) and an exponential family (rate
``eta``, gap like e^{-eta t}).  Time rescaling maps any member to any other;
the rescaling is realized discretely through a monitor function g(t) = dt/dtau
and a Poincare-transformed Hamiltonian on extended phase space, where physical
time is a position coordinate with conjugate momentum.

Closed-form pieces provided here:

* ``parameter_functions`` -- the (alpha, beta, gamma) triple of each family,
* ``monitor``             -- g(t) for the four family-to-family rescalings,
* ``poincare_hamiltonian``-- the extended autonomous Hamiltonian (diagnostics),
* ``el_acceleration``     -- the continuous second-order equation of motion,

plus saturating exp/pow helpers: coefficients like e^{2 eta t} or t^{2p-1}
overflow for large t, and we clamp with a flag instead of producing inf so a
run is recorded as unstable rather than crashing.

The kinetic-energy metric is the Euclidean one, h(q) = <q, q>/2; general
Bregman divergences are out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

__all__ = [
    "FAMILIES",
    "BregmanConfig",
    "ExtendedState",
    "UnsupportedFamilyError",
    "exp_saturating",
    "pow_saturating",
    "parameter_functions",
    "monitor",
    "time_flow",
    "base_hamiltonian",
    "kinetic_dt",
    "potential_dt",
    "poincare_hamiltonian",
    "el_acceleration",
]

FAMILIES = ("poly", "expo", "expo2poly", "poly2expo")

# exp() overflows above this; used by the saturating helpers
_LOG_MAX = math.log(np.finfo(float).max)  # ~709.78
_SAT_VALUE = np.finfo(float).max


class UnsupportedFamilyError(ValueError):
    """Operation not defined for this dynamics family."""


@dataclass(frozen=True)
class BregmanConfig:
    """Family tag plus the parameters that family reads.

    poly:       p, p_ring, C     (non-adaptive when p_ring == p)
    expo:       eta, eta_ring, C (non-adaptive when eta_ring == eta)
    expo2poly:  eta, p, C        (exponential dynamics run on polynomial time)
    poly2expo:  p, eta, C        (polynomial dynamics run on exponential time)

    Target rates default to the base rate, i.e. configs are non-adaptive
    unless a different p_ring/eta_ring is given.
    """

    family: str
    p: Optional[float] = None
    p_ring: Optional[float] = None
    eta: Optional[float] = None
    eta_ring: Optional[float] = None
    C: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UnsupportedFamilyError(
                f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.C <= 0.0:
            raise ValueError("C must be positive")
        need_p = self.family in ("poly", "expo2poly", "poly2expo")
        need_eta = self.family in ("expo", "expo2poly", "poly2expo")
        if need_p:
            if self.p is None or self.p <= 0.0:
                raise ValueError(f"family {self.family!r} needs p > 0")
        if need_eta:
            if self.eta is None or self.eta <= 0.0:
                raise ValueError(f"family {self.family!r} needs eta > 0")
        if self.family == "poly":
            if self.p_ring is None:
                object.__setattr__(self, "p_ring", self.p)
            if self.p_ring <= 0.0:
                raise ValueError("p_ring must be positive")
        if self.family == "expo":
            if self.eta_ring is None:
                object.__setattr__(self, "eta_ring", self.eta)
            if self.eta_ring <= 0.0:
                raise ValueError("eta_ring must be positive")

    @property
    def adaptive(self) -> bool:
        """True when the time rescaling is non-trivial."""
        if self.family == "poly":
            return self.p_ring != self.p
        if self.family == "expo":
            return self.eta_ring != self.eta
        return True  # cross-family rescalings are always adaptive

    def with_target(self, p_ring=None, eta_ring=None) -> "BregmanConfig":
        out = self
        if p_ring is not None:
            out = replace(out, p_ring=p_ring)
        if eta_ring is not None:
            out = replace(out, eta_ring=eta_ring)
        return out


@dataclass(frozen=True)
class ExtendedState:
    """Iterate of the extended phase space.

    q, r    position / momentum vectors
    t       physical time (the extended position coordinate), > 0
    r_t     conjugate momentum of t; tracked only under energy monitoring
    k       completed step count
    """

    q: np.ndarray
    r: np.ndarray
    t: float
    r_t: Optional[float] = None
    k: int = 0

    def __post_init__(self):
        if self.t <= 0.0:
            raise ValueError("physical time must stay positive")


def exp_saturating(z: float) -> Tuple[float, bool]:
    """exp(z) clamped at the float max; second element flags saturation."""
    if z > _LOG_MAX:
        return _SAT_VALUE, True
    return math.exp(z), False


def pow_saturating(base: float, expo: float) -> Tuple[float, bool]:
    """base**expo for base > 0, computed in log space with overflow clamp."""
    if expo == 0.0:
        return 1.0, False
    if expo == 1.0:
        return base, False
    return exp_saturating(expo * math.log(base))


def parameter_functions(cfg: BregmanConfig, t: float) -> Tuple[float, float, float]:
    """(alpha_t, beta_t, gamma_t) for the base poly/expo families.

    poly: (ln p - ln t,  p ln t + ln C,  p ln t)
    expo: (ln eta,       eta t + ln C,   eta t)

    These satisfy the ideal-scaling conditions  d(gamma)/dt = e^alpha  and
    d(beta)/dt <= e^alpha  exactly (with equality for beta).
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    if cfg.family == "poly":
        logt = math.log(t)
        return (math.log(cfg.p) - logt,
                cfg.p * logt + math.log(cfg.C),
                cfg.p * logt)
    if cfg.family == "expo":
        return (math.log(cfg.eta),
                cfg.eta * t + math.log(cfg.C),
                cfg.eta * t)
    raise UnsupportedFamilyError(
        "parameter functions are defined for the base poly/expo families")


def monitor(cfg: BregmanConfig, t: float) -> float:
    """Monitor function g(t) = dt/dtau of the family's time rescaling.

    poly   -> poly:  (p/p_ring) t^{1 - p_ring/p}
    expo   -> expo:  eta/eta_ring
    expo   -> poly:  (eta/p) t
    poly   -> expo:  (p/eta) e^{-eta t / p}
    """
    if t <= 0.0:
        raise ValueError("t must be positive")
    if cfg.family == "poly":
        return (cfg.p / cfg.p_ring) * t ** (1.0 - cfg.p_ring / cfg.p)
    if cfg.family == "expo":
        return cfg.eta / cfg.eta_ring
    if cfg.family == "expo2poly":
        return (cfg.eta / cfg.p) * t
    if cfg.family == "poly2expo":
        return (cfg.p / cfg.eta) * math.exp(-cfg.eta * t / cfg.p)
    raise UnsupportedFamilyError(cfg.family)


def time_flow(cfg: BregmanConfig, t: float, s: float) -> float:
    """Exact flow of  dt/dtau = g(t)  for a fictive-time increment s.

    Used by the leapfrog-composition integrators, whose time sub-steps solve
    this scalar ODE in closed form:

    poly:       (t^{p_ring/p} + s)^{p/p_ring}
    expo:       t + s eta/eta_ring
    expo2poly:  t e^{s eta / p}
    poly2expo:  (p/eta) ln(e^{eta t / p} + s)
    """
    if cfg.family == "poly":
        ratio = cfg.p_ring / cfg.p
        if ratio == 1.0:
            return t + s
        return (t ** ratio + s) ** (1.0 / ratio)
    if cfg.family == "expo":
        return t + s * cfg.eta / cfg.eta_ring
    if cfg.family == "expo2poly":
        return t * math.exp(s * cfg.eta / cfg.p)
    if cfg.family == "poly2expo":
        a = cfg.eta / cfg.p
        return math.log(math.exp(a * t) + s) / a
    raise UnsupportedFamilyError(cfg.family)


def base_hamiltonian(cfg: BregmanConfig, q_sq_r: float, f_value: float,
                     t: float) -> float:
    """Time-dependent Hamiltonian H(q, r, t) of the base family.

    poly: (p / 2 t^{p+1}) <r,r> + C p t^{2p-1} f(q)
    expo: (eta / 2 e^{eta t}) <r,r> + C eta e^{2 eta t} f(q)

    ``q_sq_r`` is <r, r>.  Cross families use their base dynamics (expo2poly
    runs exponential dynamics, poly2expo polynomial dynamics).
    """
    if cfg.family in ("poly", "poly2expo"):
        p = cfg.p
        return (p / (2.0 * t ** (p + 1.0))) * q_sq_r \
            + cfg.C * p * t ** (2.0 * p - 1.0) * f_value
    if cfg.family in ("expo", "expo2poly"):
        eta = cfg.eta
        return (eta / (2.0 * math.exp(eta * t))) * q_sq_r \
            + cfg.C * eta * math.exp(2.0 * eta * t) * f_value
    raise UnsupportedFamilyError(cfg.family)


def kinetic_dt(cfg: BregmanConfig, q_sq_r: float, t: float) -> float:
    """Time derivative of the kinetic term of H (momentum frozen).

    Drives the time-conjugate momentum during the drift leg of the leapfrog
    composition; that leg is then the exact flow of the kinetic Hamiltonian.
    """
    if cfg.family in ("poly", "poly2expo"):
        p = cfg.p
        return -(p * (p + 1.0) / (2.0 * t ** (p + 2.0))) * q_sq_r
    if cfg.family in ("expo", "expo2poly"):
        eta = cfg.eta
        return -(eta ** 2 / (2.0 * math.exp(eta * t))) * q_sq_r
    raise UnsupportedFamilyError(cfg.family)


def potential_dt(cfg: BregmanConfig, f_value: float, t: float) -> float:
    """Time derivative of the potential term of H (position frozen).

    Drives the time-conjugate momentum during the kick legs.
    """
    if cfg.family in ("poly", "poly2expo"):
        p = cfg.p
        return cfg.C * p * (2.0 * p - 1.0) * t ** (2.0 * p - 2.0) * f_value
    if cfg.family in ("expo", "expo2poly"):
        eta = cfg.eta
        return 2.0 * cfg.C * eta ** 2 * math.exp(2.0 * eta * t) * f_value
    raise UnsupportedFamilyError(cfg.family)


def poincare_hamiltonian(cfg: BregmanConfig, s: ExtendedState,
                         f_value: float) -> float:
    """Extended autonomous Hamiltonian  g(t) (H(q, r, t) + r_t).

    Zero along the extended flow when r_t is initialized to -H at the start;
    its numerical drift is the energy diagnostic.  Requires r_t.
    """
    if s.r_t is None:
        raise ValueError("state has no time-conjugate momentum; "
                         "initialize with energy tracking enabled")
    rr = float(s.r @ s.r)
    return monitor(cfg, s.t) * (base_hamiltonian(cfg, rr, f_value, s.t) + s.r_t)


def el_acceleration(cfg: BregmanConfig, t: float, q: np.ndarray,
                    v: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Acceleration of the continuous equation of motion.

    poly:  qdd = -((p+1)/t) v - C p^2 t^{p-2} grad
    expo:  qdd = -eta v - C eta^2 e^{eta t} grad

    Cross-family dynamics are time reparametrizations of these, not separate
    equations, so only the base families are accepted.  The polynomial
    equation is singular at t = 0 and needs t > 0; the exponential one is
    defined for any t.
    """
    if cfg.family == "poly":
        if t <= 0.0:
            raise ValueError("t must be positive")
        p = cfg.p
        return -((p + 1.0) / t) * v - cfg.C * p * p * t ** (p - 2.0) * grad
    if cfg.family == "expo":
        eta = cfg.eta
        return -eta * v - cfg.C * eta * eta * math.exp(eta * t) * grad
    raise UnsupportedFamilyError(
        "continuous equations of motion exist only for the base families")
