"""One-step update rules for the symplectic optimizers.

Four integration schemes ("kinds") discretize the extended Hamiltonian flow of
any :class:`~bravopt.bregman.BregmanConfig` family:

* ``htvi`` -- symplectic-Euler-type update (order 1): momentum kick with the
  gradient at the current iterate, then position drift, then time advance.
* ``ltvi`` -- the variational-integrator form of the same map written purely
  in position differences.  In non-adaptive mode it reproduces the htvi
  iterates exactly (up to roundoff); in adaptive mode the two differ.
* ``sv``   -- Stoermer-Verlet: half kick, time advance (implicit for the
  polynomial-time rescalings), averaged drift, half kick (order 2).
* ``slc``  -- symmetric leapfrog composition of the component flows:
  half kick, half time flow, drift, half time flow, half kick (order 2).
  The time sub-flow is solved exactly per family.

All coefficients have the shape  exp(c + a ln t + b t); they are evaluated in
log space and clamped at the floating-point max with a ``saturated`` flag, so
runaway times surface as recorded instability instead of silent NaNs.

Fused stepping
--------------
For sv/slc the trailing half kick of one step and the leading half kick of
the next happen at the same time point with the same gradient, so they fuse
into a single full kick: steady-state cost is exactly one gradient evaluation
per step for every kind.  The fused and unfused paths produce the same
position iterates; the unfused path exists for the symmetry/energy
diagnostics, which also track the time-conjugate momentum.

A step consumes the gradient cached at the current iterate (returned by the
previous step's record) and evaluates objective and gradient once at the new
iterate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .bregman import (
    BregmanConfig,
    ExtendedState,
    UnsupportedFamilyError,
    base_hamiltonian,
    exp_saturating,
    kinetic_dt,
    monitor,
    potential_dt,
    time_flow,
)
from .problems import ObjectiveProblem

__all__ = [
    "KINDS",
    "StepRecord",
    "ImplicitSolveError",
    "Stepper",
    "init_state",
    "step",
    "solve_implicit_time",
]

KINDS = ("htvi", "ltvi", "slc", "sv")


class ImplicitSolveError(RuntimeError):
    """The implicit time update did not converge."""


@dataclass(frozen=True)
class StepRecord:
    """Result of one integrator step.

    dq is the position increment of this step; f_value/grad are evaluated at
    the new iterate and feed the termination and restart checks for free.
    """

    state: ExtendedState
    dq: np.ndarray
    f_value: float
    grad: np.ndarray
    grad_evals: int = 1
    saturated: bool = False


def _coef_params(cfg: BregmanConfig, h: float):
    """(c, a, b) pairs so kick/drift coefficients are sign(h) exp(c + a ln t + b t).

    A negative h gives the time-reversed map (adjoint-consistency checks).
    """
    C = cfg.C
    ah = abs(h)
    if ah == 0.0:
        raise ValueError("step size must be nonzero")
    if cfg.family == "poly":
        p, pr = cfg.p, cfg.p_ring
        scale = p * p / pr
        kick = (math.log(C * ah * scale), 2.0 * p - pr / p, 0.0)
        drift = (math.log(ah * scale), -p - pr / p, 0.0)
    elif cfg.family == "expo":
        e, er = cfg.eta, cfg.eta_ring
        scale = e * e / er
        kick = (math.log(C * ah * scale), 0.0, 2.0 * e)
        drift = (math.log(ah * scale), 0.0, -e)
    elif cfg.family == "expo2poly":
        e, p = cfg.eta, cfg.p
        scale = e * e / p
        kick = (math.log(C * ah * scale), 1.0, 2.0 * e)
        drift = (math.log(ah * scale), 1.0, -e)
    elif cfg.family == "poly2expo":
        p, e = cfg.p, cfg.eta
        scale = p * p / e
        kick = (math.log(C * ah * scale), 2.0 * p - 1.0, -e / p)
        drift = (math.log(ah * scale), -p - 1.0, -e / p)
    else:
        raise UnsupportedFamilyError(cfg.family)
    return kick, drift


def solve_implicit_time(cfg: BregmanConfig, t: float, h: float) -> float:
    """Solve  x = t + (h/2) (g(t) + g(x))  for the Verlet time update.

    Fixed-point iteration seeded at t + h g(t); stops when successive
    iterates agree to 1e-13 (or a few ulps at large t), at most 100 rounds.
    The accepted root satisfies the equation to 1e-12 (absolute, again
    relaxed to ulp scale for large t).  Negative h solves the time-reversed
    update (adjoint checks only).
    """
    if t <= 0.0 or h == 0.0:
        raise ValueError("need t > 0 and h != 0")
    gt = monitor(cfg, t)
    half = 0.5 * h
    x = t + h * gt
    base = t + half * gt
    for _ in range(100):
        x_next = base + half * monitor(cfg, x)
        if abs(x_next - x) <= max(1e-13, 4.0 * math.ulp(x)):
            x = x_next
            break
        x = x_next
    else:
        raise ImplicitSolveError(
            f"implicit time update did not converge from t={t!r}, h={h!r}")
    residual = abs(x - (base + half * monitor(cfg, x)))
    if residual > max(1e-12, 8.0 * math.ulp(x)):
        raise ImplicitSolveError(
            f"implicit time update residual {residual:.3e} too large")
    return x


class Stepper:
    """Bound update rule for one (family, kind, step size, problem) choice.

    ``fused=False`` selects the verbatim two-half-kick form of sv/slc (needed
    by the reversibility and energy tests); ``track_energy`` additionally
    updates the time-conjugate momentum through the composition bookends
    (slc only, non-adaptive families).
    """

    def __init__(self, cfg: BregmanConfig, kind: str, h: float,
                 problem: ObjectiveProblem, fused: bool = True,
                 track_energy: bool = False):
        if kind not in KINDS:
            raise ValueError(f"unknown integrator kind {kind!r}")
        if track_energy and (kind != "slc" or fused or cfg.adaptive):
            raise ValueError("energy tracking needs the unfused, "
                             "non-adaptive slc path")
        self.cfg = cfg
        self.kind = kind
        self.h = h
        self.problem = problem
        self.fused = fused
        self.track_energy = track_energy
        (self._kc, self._ka, self._kb), (self._dc, self._da, self._db) = \
            _coef_params(cfg, h)
        self._sign = math.copysign(1.0, h)
        self._sv_explicit_time = cfg.family in ("expo", "expo2poly")

    # -- coefficient helpers ------------------------------------------------

    def _kick(self, t: float):
        val, sat = exp_saturating(
            self._kc + self._ka * math.log(t) + self._kb * t)
        return self._sign * val, sat

    def _drift(self, t: float):
        val, sat = exp_saturating(
            self._dc + self._da * math.log(t) + self._db * t)
        return self._sign * val, sat

    def _advance_htvi(self, t: float) -> float:
        return t + self.h * monitor(self.cfg, t)

    def _advance_sv(self, t: float) -> float:
        cfg, h = self.cfg, self.h
        if cfg.family == "expo":
            return t + h * cfg.eta / cfg.eta_ring
        if cfg.family == "expo2poly":
            # trapezoidal update is linear in t and solves in closed form
            denom = 2.0 * cfg.p - cfg.eta * h
            if denom <= 0.0:
                raise ImplicitSolveError(
                    "Verlet time update needs eta * h < 2 p")
            return (2.0 * cfg.p + cfg.eta * h) / denom * t
        return solve_implicit_time(cfg, t, h)

    # -- initialization -----------------------------------------------------

    def initial_state(self, q0: np.ndarray, grad0: np.ndarray,
                      f0: Optional[float] = None,
                      init_momentum: Optional[str] = None) -> ExtendedState:
        return init_state(self.cfg, self.kind, q0, self.h, grad0,
                          track_energy=self.track_energy, f0=f0,
                          init_momentum=init_momentum,
                          _fused=self.fused)

    # -- stepping -----------------------------------------------------------

    def step(self, state: ExtendedState, grad: np.ndarray,
             f_value: Optional[float] = None) -> StepRecord:
        """Advance one step, consuming the cached gradient at state.q."""
        if self.kind == "htvi":
            return self._step_htvi(state, grad)
        if self.kind == "ltvi":
            return self._step_ltvi(state, grad)
        if self.kind == "slc":
            if self.fused:
                return self._step_slc_fused(state, grad)
            return self._step_slc_unfused(state, grad, f_value)
        if self.fused:
            return self._step_sv_fused(state, grad)
        return self._step_sv_unfused(state, grad)

    def _finish(self, q, r, t, r_t, k, dq, saturated) -> StepRecord:
        f_new = self.problem.eval(q)
        g_new = self.problem.grad(q)
        new = ExtendedState(q=q, r=r, t=t, r_t=r_t, k=k + 1)
        return StepRecord(state=new, dq=dq, f_value=f_new, grad=g_new,
                          grad_evals=1, saturated=saturated)

    def _step_htvi(self, s: ExtendedState, grad) -> StepRecord:
        kc, sat1 = self._kick(s.t)
        r = s.r - kc * grad
        dc, sat2 = self._drift(s.t)
        dq = dc * r
        q = s.q + dq
        t = self._advance_htvi(s.t)
        return self._finish(q, r, t, s.r_t, s.k, dq, sat1 or sat2)

    def _step_ltvi(self, s: ExtendedState, grad) -> StepRecord:
        g_t = monitor(self.cfg, s.t)
        kc, sat1 = self._kick(s.t)
        dc, sat2 = self._drift(s.t)
        dq = (g_t * dc) * s.r - (dc * kc) * grad
        q = s.q + dq
        t_new = self._advance_htvi(s.t)
        r = dq / (dc * monitor(self.cfg, t_new))
        return self._finish(q, r, t_new, s.r_t, s.k, dq, sat1 or sat2)

    def _step_slc_fused(self, s: ExtendedState, grad) -> StepRecord:
        # stored time lags one step: the full kick fuses this step's leading
        # half kick with the previous step's trailing one
        t, r = s.t, s.r
        saturated = False
        if s.k >= 1:
            t = time_flow(self.cfg, t, self.h)
            kc, sat = self._kick(t)
            saturated |= sat
            r = r - kc * grad
        t_mid = time_flow(self.cfg, t, 0.5 * self.h)
        dc, sat = self._drift(t_mid)
        saturated |= sat
        dq = dc * r
        q = s.q + dq
        return self._finish(q, r, t, s.r_t, s.k, dq, saturated)

    def _step_slc_unfused(self, s: ExtendedState, grad, f_value) -> StepRecord:
        # each leg is the exact flow of one split Hamiltonian piece; the
        # time-conjugate momentum therefore updates inside the kick legs
        # (potential part, position and time frozen) and the drift leg
        # (kinetic part, momentum and time frozen)
        cfg, h = self.cfg, self.h
        q, r, t, r_t = s.q, s.r, s.t, s.r_t
        energy = self.track_energy
        if energy and f_value is None:
            f_value = self.problem.eval(q)
        kc, sat1 = self._kick(t)
        r = r - 0.5 * kc * grad
        if energy:
            r_t = r_t - 0.5 * h * potential_dt(cfg, f_value, t)
        t = time_flow(cfg, t, 0.5 * h)
        dc, sat2 = self._drift(t)
        dq = dc * r
        q = q + dq
        if energy:
            r_t = r_t - h * kinetic_dt(cfg, float(r @ r), t)
        t = time_flow(cfg, t, 0.5 * h)
        f_new = self.problem.eval(q)
        g_new = self.problem.grad(q)
        kc2, sat3 = self._kick(t)
        r = r - 0.5 * kc2 * g_new
        if energy:
            r_t = r_t - 0.5 * h * potential_dt(cfg, f_new, t)
        new = ExtendedState(q=q, r=r, t=t, r_t=r_t, k=s.k + 1)
        return StepRecord(state=new, dq=dq, f_value=f_new, grad=g_new,
                          grad_evals=1, saturated=sat1 or sat2 or sat3)

    def _step_sv_fused(self, s: ExtendedState, grad) -> StepRecord:
        kc, sat1 = self._kick(s.t)
        if s.k == 0:
            kc = 0.5 * kc
        r = s.r - kc * grad
        t_new = self._advance_sv(s.t)
        d0, sat2 = self._drift(s.t)
        d1, sat3 = self._drift(t_new)
        dq = (0.5 * (d0 + d1)) * r
        q = s.q + dq
        return self._finish(q, r, t_new, s.r_t, s.k, dq, sat1 or sat2 or sat3)

    def _step_sv_unfused(self, s: ExtendedState, grad) -> StepRecord:
        kc, sat1 = self._kick(s.t)
        r = s.r - 0.5 * kc * grad
        t_new = self._advance_sv(s.t)
        d0, sat2 = self._drift(s.t)
        d1, sat3 = self._drift(t_new)
        dq = (0.5 * (d0 + d1)) * r
        q = s.q + dq
        f_new = self.problem.eval(q)
        g_new = self.problem.grad(q)
        kc2, sat4 = self._kick(t_new)
        r = r - 0.5 * kc2 * g_new
        new = ExtendedState(q=q, r=r, t=t_new, r_t=s.r_t, k=s.k + 1)
        return StepRecord(state=new, dq=dq, f_value=f_new, grad=g_new,
                          grad_evals=1, saturated=sat1 or sat2 or sat3 or sat4)


def init_state(cfg: BregmanConfig, kind: str, q0: np.ndarray, h: float,
               grad0: np.ndarray, *, track_energy: bool = False,
               f0: Optional[float] = None,
               init_momentum: Optional[str] = None,
               _fused: bool = True) -> ExtendedState:
    """Initial extended state at physical time 1.

    slc starts from the leading half kick  r0 = -(1/2) kick(1) grad0  (that is
    how its fused loop is written); the other kinds start from rest, r0 = 0.
    ``init_momentum`` ("zero" | "half-kick") overrides the per-kind default.
    With ``track_energy`` the time-conjugate momentum starts at -H(q0, 1, r0)
    so the extended Hamiltonian starts at exactly zero.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown integrator kind {kind!r}")
    if h <= 0.0:
        raise ValueError("step size must be positive")
    q0 = np.asarray(q0, dtype=float)
    grad0 = np.asarray(grad0, dtype=float)
    t0 = 1.0
    if init_momentum is None:
        init_momentum = "half-kick" if (kind == "slc" and _fused) else "zero"
    if init_momentum == "half-kick":
        (kc, ka, kb), _ = _coef_params(cfg, h)
        coef, _sat = exp_saturating(kc + ka * math.log(t0) + kb * t0)
        r0 = -0.5 * coef * grad0
    elif init_momentum == "zero":
        r0 = np.zeros_like(q0)
    else:
        raise ValueError("init_momentum must be 'zero' or 'half-kick'")
    r_t = None
    if track_energy:
        if f0 is None:
            raise ValueError("energy tracking needs the initial objective value")
        r_t = -base_hamiltonian(cfg, float(r0 @ r0), f0, t0)
    return ExtendedState(q=q0, r=r0, t=t0, r_t=r_t, k=0)


def step(cfg: BregmanConfig, kind: str, state: ExtendedState, h: float,
         problem: ObjectiveProblem, cached_grad: Optional[np.ndarray] = None,
         cached_f: Optional[float] = None, fused: bool = True,
         track_energy: bool = False) -> StepRecord:
    """Apply one full update of the selected rule.

    ``cached_grad`` is the gradient at ``state.q``; omitting it costs one
    extra gradient evaluation (that is the first-step cost of 2).
    """
    stepper = Stepper(cfg, kind, h, problem, fused=fused,
                      track_energy=track_energy)
    extra = 0
    if cached_grad is None:
        cached_grad = problem.grad(state.q)
        extra = 1
    rec = stepper.step(state, cached_grad, cached_f)
    if extra:
        rec = replace(rec, grad_evals=rec.grad_evals + extra)
    return rec
