"""Continuous-time reference trajectories.

Fixed-step classical RK4 on the second-order equations of motion (written as
first order in (q, v)) gives an independently trustworthy reference for the
convergence-rate statements and for the time-dilation property.  Intentional
simplicity: no adaptivity, every step stored.

Initial conditions: the polynomial equation has a 1/t singularity at t = 0,
so trajectories start at t0 = 1 (matching the discrete algorithms' initial
physical time) with v(t0) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .bregman import BregmanConfig, UnsupportedFamilyError, el_acceleration
from .problems import ObjectiveProblem

__all__ = [
    "OracleTrajectory",
    "RateFit",
    "integrate_el",
    "rate_envelope",
    "check_time_dilation",
]


@dataclass(frozen=True)
class OracleTrajectory:
    """Dense RK4 output: times (strictly increasing, starting at t0 >= 1),
    positions q[i], velocities v[i].  ``diverged`` marks truncation on a
    non-finite state."""

    times: np.ndarray
    q: np.ndarray
    v: np.ndarray
    problem_name: str
    cfg: BregmanConfig
    diverged: bool = False


@dataclass(frozen=True)
class RateFit:
    """Fitted envelope decay slope; ``reliable`` is False when the error is
    too close to roundoff (or constant) for the fit to mean anything."""

    slope: float
    reliable: bool


def integrate_el(cfg: BregmanConfig, problem: ObjectiveProblem,
                 q0: np.ndarray, t0: float = 1.0, T: float = 10.0,
                 h_ode: float = 1e-3) -> OracleTrajectory:
    """RK4 trajectory of the equation of motion from (q0, v0 = 0) at t0.

    Stores every step.  A non-finite state truncates the trajectory and sets
    the diverged flag instead of raising.
    """
    if cfg.family not in ("poly", "expo"):
        raise UnsupportedFamilyError("the oracle integrates the base families")
    if not (t0 >= 1.0 and T > t0 and h_ode > 0.0):
        raise ValueError("need t0 >= 1, T > t0, h_ode > 0")
    q = np.asarray(q0, dtype=float).copy()
    v = np.zeros_like(q)
    grad = problem.grad
    accel = el_acceleration
    n_steps = int(round((T - t0) / h_ode))
    times = t0 + h_ode * np.arange(n_steps + 1)
    qs = np.empty((n_steps + 1, q.size))
    vs = np.empty_like(qs)
    qs[0], vs[0] = q, v
    diverged = False
    h = h_ode
    half = 0.5 * h
    for i in range(n_steps):
        t = times[i]
        k1v = accel(cfg, t, q, v, grad(q))
        q2 = q + half * v
        v2 = v + half * k1v
        k2v = accel(cfg, t + half, q2, v2, grad(q2))
        q3 = q + half * v2
        v3 = v + half * k2v
        k3v = accel(cfg, t + half, q3, v3, grad(q3))
        q4 = q + h * v3
        v4 = v + h * k3v
        k4v = accel(cfg, t + h, q4, v4, grad(q4))
        # position slopes are the stage velocities (v, v2, v3, v4)
        q = q + (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v))):
            diverged = True
            times = times[: i + 1]
            qs = qs[: i + 1]
            vs = vs[: i + 1]
            break
        qs[i + 1], vs[i + 1] = q, v
    return OracleTrajectory(times=times, q=qs, v=vs,
                            problem_name=problem.name, cfg=cfg,
                            diverged=diverged)


def rate_envelope(traj: OracleTrajectory, f_star: float,
                  problem: ObjectiveProblem, n_windows: int = 24,
                  max_evals: int = 200_000) -> RateFit:
    """Fitted decay slope of the error envelope over the trajectory's last
    decade (t in [T/10, T]).

    The objective gap oscillates, so each window contributes its running
    maximum; the fit is natural-log error against ln t for the polynomial
    family and against t for the exponential family.  A slope of -p (poly)
    or -eta (expo) matches the theoretical rate.
    """
    times = traj.times
    T = times[-1]
    lo = T / 10.0
    mask = times >= lo
    ts = times[mask]
    qs = traj.q[mask]
    stride = max(1, len(ts) // max_evals)
    ts = ts[::stride]
    qs = qs[::stride]
    errs = np.array([problem.eval(qi) for qi in qs]) - f_star
    eps_floor = 100.0 * np.finfo(float).eps * max(1.0, abs(f_star))
    if not np.any(errs > eps_floor):
        return RateFit(slope=float("nan"), reliable=False)
    if traj.cfg.family == "poly":
        coord = np.log(ts)
        edges = np.linspace(coord[0], coord[-1], n_windows + 1)
    else:
        coord = ts
        edges = np.linspace(ts[0], ts[-1], n_windows + 1)
    xs, ys = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (coord >= a) & (coord <= b)
        if not np.any(sel):
            continue
        emax = errs[sel].max()
        if emax <= eps_floor:
            continue
        i = np.argmax(errs[sel])
        xs.append(coord[sel][i])
        ys.append(math.log(emax))
    if len(xs) < 3:
        return RateFit(slope=float("nan"), reliable=False)
    slope = float(np.polyfit(xs, ys, 1)[0])
    return RateFit(slope=slope, reliable=True)


def check_time_dilation(cfg_base: BregmanConfig, cfg_target: BregmanConfig,
                        problem: ObjectiveProblem, q0: np.ndarray,
                        horizon: float, h_ode: float = 1e-4,
                        dt_sample: float = 1e-4) -> float:
    """Sup-norm residual of the rescaled trajectory in the target equation.

    Integrates the base-p dynamics q(s), resamples y(t) = q(t^{p_target/p})
    on a uniform t grid over [1, horizon], and evaluates the target family's
    equation of motion on y by central finite differences.  Closure of the
    family under time dilation makes the residual vanish up to finite
    difference and interpolation error.
    """
    if cfg_base.family != "poly" or cfg_target.family != "poly":
        raise UnsupportedFamilyError("the dilation check covers the poly family")
    if cfg_base.C != cfg_target.C:
        raise ValueError("base and target configs must share C")
    p, pr = cfg_base.p, cfg_target.p
    S = horizon ** (pr / p)
    traj = integrate_el(cfg_base, problem, q0, t0=1.0,
                        T=S * (1.0 + 1e-9) + 2 * h_ode, h_ode=h_ode)
    if traj.diverged:
        raise RuntimeError("base trajectory diverged; lower C or horizon")
    spline = CubicSpline(traj.times, traj.q, axis=0)
    ts = np.arange(1.0 + dt_sample, horizon - dt_sample, dt_sample)
    taus_mid = ts ** (pr / p)
    taus_lo = (ts - dt_sample) ** (pr / p)
    taus_hi = (ts + dt_sample) ** (pr / p)
    if taus_hi[-1] > traj.times[-1] or taus_lo[0] < traj.times[0]:
        raise ValueError("resampling leaves the integrated range")
    y_mid = spline(taus_mid)
    y_lo = spline(taus_lo)
    y_hi = spline(taus_hi)
    yd = (y_hi - y_lo) / (2.0 * dt_sample)
    ydd = (y_hi - 2.0 * y_mid + y_lo) / dt_sample ** 2
    worst = 0.0
    C = cfg_target.C
    for i, t in enumerate(ts):
        g = problem.grad(y_mid[i])
        res = ydd[i] + ((pr + 1.0) / t) * yd[i] \
            + C * pr * pr * t ** (pr - 2.0) * g
        worst = max(worst, float(np.max(np.abs(res))))
    return worst
