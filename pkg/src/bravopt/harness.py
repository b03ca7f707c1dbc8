"""Run loop, parameter sweeps, and results persistence.

A single run executes the loop of the restarted/looped optimizers:

    init -> repeat { step; restart check; instability check + time reset;
                     termination check }

terminating when |f_k - f_{k-1}| < delta and ||grad f_k|| < delta both hold,
when the iterate goes non-finite or a coefficient saturates (diverged), or at
the iteration cap.  Runs are deterministic: the same config always produces
the same result.

Sweeps fill a 1- to 3-axis grid over (C, h, p, eta, p_ring, eta_ring) with
independent runs; cells share nothing mutable, so concurrent and sequential
fills agree exactly.  Results go to CSV (full round-trip float precision) and
2-D grids render as SVG heatmaps in the style of the convergence-region
contour plots: iteration count on a log color scale, non-converged cells
left blank.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .bregman import BregmanConfig, ExtendedState
from .integrators import KINDS, Stepper, init_state
from .looping import LoopingStrategy, instability_detected, reset_time
from .problems import ObjectiveProblem, problem_by_name
from .restart import RestartScheme, apply_restart, should_restart

__all__ = [
    "ConfigError",
    "ProblemSpec",
    "RunConfig",
    "RunResult",
    "Axis",
    "SweepGrid",
    "run",
    "sweep",
    "best_cell",
    "write_csv",
    "read_csv",
    "render_heatmap",
    "default_q0",
    "poly_preset",
    "expo_preset",
]

CONVERGED = "converged"
MAX_ITERS = "max_iters"
DIVERGED = "diverged"


class ConfigError(ValueError):
    """Inconsistent run configuration, reported before any iteration."""


@dataclass(frozen=True)
class ProblemSpec:
    """Problem selection by name, resolvable anywhere (threads, CLI)."""

    name: str
    dim: int = 2
    rows: Optional[int] = None
    seed: int = 0
    reg: str = "none"
    lam: float = 1.0

    def build(self) -> ObjectiveProblem:
        return problem_by_name(self.name, dim=self.dim, rows=self.rows,
                               seed=self.seed, reg=self.reg, lam=self.lam)


def default_q0(problem: ObjectiveProblem) -> np.ndarray:
    """Documented per-problem interior starting points."""
    name = problem.name.split("-")[0]
    d = problem.dim
    if name == "quartic":
        return np.zeros(d)
    if name == "logbarrier":
        return np.array([2.0, 2.0])
    if name == "entropy":
        return np.ones(d)
    if name == "illcond":
        return np.ones(3)
    # regression-type problems start at the origin
    return np.zeros(d)


def poly_preset(**overrides) -> dict:
    """Polynomial-family tuning defaults: p=6, C=0.1, h=0.01."""
    out = dict(cfg=BregmanConfig(family="poly", p=6.0, C=0.1), h=0.01)
    out.update(overrides)
    return out


def expo_preset(**overrides) -> dict:
    """Exponential-family tuning defaults: eta=0.01, C=1, h=4."""
    out = dict(cfg=BregmanConfig(family="expo", eta=0.01, C=1.0), h=4.0)
    out.update(overrides)
    return out


@dataclass(frozen=True)
class RunConfig:
    problem: Union[ObjectiveProblem, ProblemSpec]
    cfg: BregmanConfig
    kind: str = "slc"
    h: float = 0.01
    restart: RestartScheme = field(default_factory=RestartScheme)
    looping: LoopingStrategy = field(default_factory=LoopingStrategy.off)
    delta: float = 1e-8
    max_iters: int = 10 ** 6
    q0: Optional[np.ndarray] = None
    track_energy: bool = False
    record_trace: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown integrator kind {self.kind!r}")
        if self.delta <= 0.0:
            raise ConfigError("delta must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if self.h <= 0.0:
            raise ConfigError("step size must be positive")


@dataclass(frozen=True)
class RunResult:
    """status is converged | max_iters | diverged; final_error is |f - f*|
    when the problem knows its minimum, else the last objective value (with
    ``error_is_gap`` False).  trace rows are (f, ||grad||) per iteration,
    starting at iteration 0."""

    status: str
    iters: int
    final_error: float
    error_is_gap: bool
    restart_count: int
    loop_count: int
    trace: Optional[np.ndarray] = None


def _resolve(problem) -> ObjectiveProblem:
    return problem.build() if isinstance(problem, ProblemSpec) else problem


def run(config: RunConfig) -> RunResult:
    """Execute one optimization run."""
    problem = _resolve(config.problem)
    cfg = config.cfg
    looping_on = config.looping.mode != "off"
    if looping_on and (cfg.family not in ("poly", "expo") or cfg.adaptive):
        raise ConfigError("temporal looping is defined for the "
                          "non-adaptive poly/expo families only")
    if config.track_energy and (config.kind != "slc" or cfg.adaptive):
        raise ConfigError("energy tracking needs the non-adaptive slc kind")

    q0 = default_q0(problem) if config.q0 is None else \
        np.asarray(config.q0, dtype=float)
    if q0.shape != (problem.dim,):
        raise ConfigError(f"q0 must have shape ({problem.dim},)")

    fused = not config.track_energy
    stepper = Stepper(cfg, config.kind, config.h, problem, fused=fused,
                      track_energy=config.track_energy)
    f_prev = problem.eval(q0)
    grad = problem.grad(q0)
    trace = [] if config.record_trace else None
    if trace is not None:
        trace.append((f_prev, math.sqrt(float(grad @ grad))))
    if not (math.isfinite(f_prev) and np.all(np.isfinite(grad))):
        return _result(DIVERGED, 0, f_prev, problem, 0, 0, trace)

    state = stepper.initial_state(q0, grad, f0=f_prev)
    scheme = config.restart
    strategy = config.looping
    delta = config.delta
    f_cached = f_prev
    dq_prev = None
    restarts = loops = 0
    since_restart = scheme.min_gap  # allow a restart on the first iteration

    status = MAX_ITERS
    iters = config.max_iters
    f_last = f_prev
    for k in range(1, config.max_iters + 1):
        rec = stepper.step(state, grad, f_cached)
        state = rec.state
        f_k = rec.f_value
        g_k = rec.grad
        gnorm = math.sqrt(float(g_k @ g_k))
        if trace is not None:
            trace.append((f_k, gnorm))
        f_last = f_k
        if rec.saturated or not (math.isfinite(f_k) and math.isfinite(gnorm)):
            status, iters = DIVERGED, k
            break
        if should_restart(scheme, f_k, f_prev, g_k, rec.dq, dq_prev,
                          since_restart):
            state = apply_restart(state)
            restarts += 1
            since_restart = 0
        else:
            since_restart += 1
        if looping_on and instability_detected(cfg, state, config.h,
                                               g_k, rec.dq):
            new_t = reset_time(strategy, state.t, config.h)
            if new_t != state.t:
                state = replace(state, t=new_t)
                loops += 1
        if abs(f_k - f_prev) < delta and gnorm < delta:
            status, iters = CONVERGED, k
            break
        f_prev = f_k
        f_cached = f_k
        grad = g_k
        dq_prev = rec.dq
    return _result(status, iters, f_last, problem, restarts, loops, trace)


def _result(status, iters, f_last, problem, restarts, loops, trace):
    if problem.known_minimum is not None:
        err = abs(f_last - problem.known_minimum)
        is_gap = True
    else:
        err = f_last
        is_gap = False
    arr = np.asarray(trace) if trace is not None else None
    return RunResult(status=status, iters=iters, final_error=err,
                     error_is_gap=is_gap, restart_count=restarts,
                     loop_count=loops, trace=arr)


# -- sweeps -----------------------------------------------------------------

AXIS_NAMES = ("C", "h", "p", "eta", "p_ring", "eta_ring")


@dataclass(frozen=True)
class Axis:
    """One sweep axis: name, bounds, cell count, log or linear spacing."""

    name: str
    lo: float
    hi: float
    count: int
    spacing: str = "log"

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ConfigError(f"unknown axis {self.name!r}")
        if self.spacing not in ("log", "linear"):
            raise ConfigError("spacing must be 'log' or 'linear'")
        if self.spacing == "log" and self.lo <= 0.0:
            raise ConfigError("log axes need positive bounds")
        if self.count < 1 or self.hi < self.lo:
            raise ConfigError("need count >= 1 and hi >= lo")

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.lo])
        if self.spacing == "log":
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)


@dataclass
class SweepGrid:
    """Axis specs plus the per-cell results (filled by :func:`sweep`)."""

    axes: Sequence[Axis]
    results: Optional[np.ndarray] = None  # object array, shape = axis counts

    def __post_init__(self):
        if not (1 <= len(self.axes) <= 3):
            raise ConfigError("sweeps use 1 to 3 axes")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ConfigError("axes must be distinct")

    @property
    def shape(self):
        return tuple(a.count for a in self.axes)


def _cell_config(base: RunConfig, axes, values) -> RunConfig:
    cfg = base.cfg
    h = base.h
    cfg_updates = {}
    for ax, val in zip(axes, values):
        if ax.name == "h":
            h = float(val)
        else:
            cfg_updates[ax.name] = float(val)
    if cfg_updates:
        cfg = replace(cfg, **cfg_updates)
    return replace(base, cfg=cfg, h=h)


def sweep(grid: SweepGrid, base: RunConfig, workers: int = 1) -> SweepGrid:
    """Fill every cell of the grid with an independent run.

    With ``workers > 1`` cells run on a thread pool; results are identical to
    the sequential fill because cells share only immutable inputs.
    """
    for ax in grid.axes:
        if ax.name != "h" and getattr(base.cfg, ax.name, None) is None:
            raise ConfigError(
                f"axis {ax.name!r} is not a parameter of family "
                f"{base.cfg.family!r}")
    problem = _resolve(base.problem)
    base = replace(base, problem=problem)
    axis_values = [a.values() for a in grid.axes]
    shape = grid.shape
    results = np.empty(shape, dtype=object)
    cells = list(np.ndindex(*shape))

    def fill(idx):
        vals = [axis_values[j][idx[j]] for j in range(len(idx))]
        try:
            results[idx] = run(_cell_config(base, grid.axes, vals))
        except ConfigError:
            raise
        except Exception:
            # an unstable cell must not kill the sweep
            results[idx] = RunResult(status=DIVERGED, iters=0,
                                     final_error=float("inf"),
                                     error_is_gap=False,
                                     restart_count=0, loop_count=0)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, cells))
    else:
        for idx in cells:
            fill(idx)
    grid.results = results
    return grid


def best_cell(grid: SweepGrid):
    """(params, iters) of the fastest converged cell.

    Ties break toward smaller h, then smaller C, then row-major order; an
    all-unconverged grid returns None.
    """
    if grid.results is None:
        raise ValueError("sweep the grid first")
    axis_values = [a.values() for a in grid.axes]
    names = [a.name for a in grid.axes]
    best = None
    for flat, idx in enumerate(np.ndindex(*grid.shape)):
        res = grid.results[idx]
        if res.status != CONVERGED:
            continue
        params = {names[j]: float(axis_values[j][idx[j]])
                  for j in range(len(idx))}
        key = (res.iters, params.get("h", 0.0), params.get("C", 0.0), flat)
        if best is None or key < best[0]:
            best = (key, params, res.iters)
    if best is None:
        return None
    return best[1], best[2]


# -- persistence ------------------------------------------------------------

def write_csv(obj, path) -> None:
    """Write a swept grid (one row per cell, row-major) or a run trace.

    Grid columns:  <axis names...>, status, iters, final_error, restarts, loops
    Trace columns: iter, f_value, grad_norm

    Floats are written with full round-trip precision.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(obj, SweepGrid):
            if obj.results is None:
                raise ValueError("sweep the grid first")
            names = [a.name for a in obj.axes]
            w.writerow(names + ["status", "iters", "final_error",
                                "restarts", "loops"])
            axis_values = [a.values() for a in obj.axes]
            for idx in np.ndindex(*obj.shape):
                res = obj.results[idx]
                row = [repr(float(axis_values[j][idx[j]]))
                       for j in range(len(idx))]
                row += [res.status, res.iters, repr(res.final_error),
                        res.restart_count, res.loop_count]
                w.writerow(row)
        elif isinstance(obj, RunResult):
            if obj.trace is None:
                raise ValueError("run with record_trace=True to get a trace")
            w.writerow(["iter", "f_value", "grad_norm"])
            for i, (fv, gn) in enumerate(obj.trace):
                w.writerow([i, repr(float(fv)), repr(float(gn))])
        else:
            raise TypeError("write_csv takes a SweepGrid or a RunResult")


def read_csv(path):
    """Read back a CSV written by :func:`write_csv`.

    Returns (header, rows) with numeric fields parsed; used to verify the
    round-trip contract.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for raw in reader:
            row = []
            for cell in raw:
                try:
                    row.append(int(cell))
                except ValueError:
                    try:
                        row.append(float(cell))
                    except ValueError:
                        row.append(cell)
            rows.append(row)
    return header, rows


def render_heatmap(grid: SweepGrid, path, title: Optional[str] = None) -> None:
    """SVG heatmap of iteration counts for a 2-D swept grid.

    Cells are colored on a log scale; diverged/capped cells stay uncolored.
    """
    if grid.results is None:
        raise ValueError("sweep the grid first")
    if len(grid.axes) != 2:
        raise ValueError("heatmaps need exactly 2 axes")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.colors import LogNorm

    ax_x, ax_y = grid.axes
    iters = np.full(grid.shape, np.nan)
    for idx in np.ndindex(*grid.shape):
        res = grid.results[idx]
        if res.status == CONVERGED:
            iters[idx] = res.iters
    masked = np.ma.masked_invalid(iters.T)  # rows = y axis

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    xs = ax_x.values()
    ys = ax_y.values()
    norm = None
    if masked.count():
        norm = LogNorm(vmin=max(1, masked.min()), vmax=masked.max())
    mesh = ax.pcolormesh(xs, ys, masked, shading="nearest", norm=norm,
                         cmap="viridis")
    if ax_x.spacing == "log":
        ax.set_xscale("log")
    if ax_y.spacing == "log":
        ax.set_yscale("log")
    ax.set_xlabel(ax_x.name)
    ax.set_ylabel(ax_y.name)
    if title:
        ax.set_title(title)
    if masked.count():
        fig.colorbar(mesh, ax=ax, label="iterations to converge")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
