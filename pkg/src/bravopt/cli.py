"""Command-line interface.

Subcommands:
  solve       one run -> summary line (+ optional trace CSV)
  sweep       fill a parameter grid -> CSV (+ optional SVG heatmap)
  compare     bravo vs gd/nag/adam on one problem -> per-method trace CSVs
  rate-check  continuous-dynamics rate oracle -> (t, error) CSV

Exit codes: 0 converged/completed, 2 not converged, 3 configuration error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import baselines
from .bregman import BregmanConfig, UnsupportedFamilyError
from .harness import (
    Axis,
    ConfigError,
    ProblemSpec,
    RunConfig,
    SweepGrid,
    best_cell,
    default_q0,
    expo_preset,
    poly_preset,
    render_heatmap,
    run,
    sweep,
    write_csv,
)
from .looping import LoopingStrategy
from .oracle import integrate_el
from .problems import InvalidProblemError, PROBLEM_NAMES
from .restart import RestartScheme

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_CONFIG = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with the config exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _add_problem_args(p):
    p.add_argument("--problem", required=True, choices=PROBLEM_NAMES)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--rows", type=int, default=None,
                   help="data rows for regression problems (default 3*dim)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reg", choices=("none", "l1", "l2"), default="none")
    p.add_argument("--lam", type=float, default=1.0)


def _add_method_args(p):
    p.add_argument("--integrator", default=None,
                   help="family-kind, e.g. poly-slc, expo-htvi, "
                        "expo2poly-sv, poly2expo-ltvi (default expo-slc)")
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--pring", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--etaring", type=float, default=None)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--restart", choices=("none", "function", "gradient",
                                         "velocity"), default="gradient")
    p.add_argument("--loop", default="mult:0.8",
                   help="off | mult:BETA | sub:NU (default mult:0.8)")
    p.add_argument("--loop-eps", type=float, default=0.001)
    p.add_argument("--delta", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=10 ** 6)
    p.add_argument("--q0", default=None,
                   help="comma-separated start point (default per problem)")


def _problem_spec(args) -> ProblemSpec:
    return ProblemSpec(name=args.problem, dim=args.dim, rows=args.rows,
                       seed=args.seed, reg=args.reg, lam=args.lam)


def _parse_integrator(name):
    fam, _, kind = name.partition("-")
    if kind not in ("htvi", "ltvi", "slc", "sv") or \
            fam not in ("poly", "expo", "expo2poly", "poly2expo"):
        raise ConfigError(f"bad integrator {name!r}; use "
                          "{poly|expo|expo2poly|poly2expo}-{htvi|ltvi|slc|sv}")
    return fam, kind


def _looping(args) -> LoopingStrategy:
    spec = args.loop
    if spec == "off":
        return LoopingStrategy.off()
    mode, _, val = spec.partition(":")
    try:
        if mode == "mult":
            return LoopingStrategy.multiplicative(float(val), eps=args.loop_eps)
        if mode == "sub":
            return LoopingStrategy.subtractive(float(val), eps=args.loop_eps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"bad --loop value {spec!r}")


def _method_config(args) -> RunConfig:
    """Assemble a RunConfig from flags; unset family parameters fall back to
    the tuning presets (poly: p=6, C=0.1, h=0.01; expo: eta=0.01, C=1, h=4)."""
    fam, kind = _parse_integrator(args.integrator or "expo-slc")
    if fam == "poly":
        preset = poly_preset()
    elif fam == "expo":
        preset = expo_preset()
    else:
        # cross-family rescalings have no preset; require explicit parameters
        preset = dict(cfg=None, h=None)
    p = args.p if args.p is not None else (
        preset["cfg"].p if fam == "poly" else None)
    eta = args.eta if args.eta is not None else (
        preset["cfg"].eta if fam == "expo" else None)
    C = args.C if args.C is not None else (
        preset["cfg"].C if preset["cfg"] is not None else None)
    h = args.h if args.h is not None else preset["h"]
    if C is None or h is None:
        raise ConfigError(f"family {fam!r} needs explicit --C and --h")
    try:
        cfg = BregmanConfig(family=fam, p=p, p_ring=args.pring,
                            eta=eta, eta_ring=args.etaring, C=C)
    except (ValueError, UnsupportedFamilyError) as exc:
        raise ConfigError(str(exc)) from exc
    looping = _looping(args)
    if looping.mode != "off" and (fam not in ("poly", "expo") or cfg.adaptive):
        looping = LoopingStrategy.off()  # presets only make sense non-adaptive
    q0 = None
    if args.q0 is not None:
        q0 = np.array([float(v) for v in args.q0.split(",")])
    return RunConfig(problem=_problem_spec(args), cfg=cfg, kind=kind, h=h,
                     restart=RestartScheme(scheme=args.restart),
                     looping=looping, delta=args.delta,
                     max_iters=args.max_iters, q0=q0)


def _cmd_solve(args) -> int:
    config = _method_config(args)
    if args.out:
        config = RunConfig(**{**config.__dict__, "record_trace": True})
    result = run(config)
    if args.out:
        write_csv(result, args.out)
    gap = "gap" if result.error_is_gap else "f"
    print(f"status={result.status} iters={result.iters} "
          f"final_{gap}={result.final_error:.6e} "
          f"restarts={result.restart_count} loops={result.loop_count}")
    return EXIT_OK if result.status == "converged" else EXIT_NOT_CONVERGED


def _parse_axis(spec: str) -> Axis:
    parts = spec.split(":")
    if len(parts) != 5:
        raise ConfigError(f"bad --axis {spec!r}; use NAME:SPACING:LO:HI:COUNT")
    name, spacing, lo, hi, count = parts
    try:
        return Axis(name=name, lo=float(lo), hi=float(hi),
                    count=int(count), spacing=spacing)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_sweep(args) -> int:
    base = _method_config(args)
    grid = SweepGrid(axes=[_parse_axis(s) for s in args.axis])
    sweep(grid, base, workers=args.threads)
    write_csv(grid, args.out)
    if args.svg:
        render_heatmap(grid, args.svg)
    best = best_cell(grid)
    if best is None:
        print("no converged cell")
        return EXIT_NOT_CONVERGED
    params, iters = best
    pretty = ", ".join(f"{k}={v:.6g}" for k, v in params.items())
    print(f"best: {iters} iterations at {pretty}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    spec = _problem_spec(args)
    problem = spec.build()
    q0 = default_q0(problem) if args.q0 is None else \
        np.array([float(v) for v in args.q0.split(",")])
    methods = args.method or ["gd", "nag", "adam", "bravo"]
    delta, cap = args.delta, args.max_iters
    any_converged = False
    for method in methods:
        if method == "bravo":
            cfg = _method_config(args)
            cfg = RunConfig(**{**cfg.__dict__, "record_trace": True,
                               "q0": q0, "problem": problem})
            result = run(cfg)
            trace = result.trace
            status = result.status
            iters = result.iters
        else:
            trace, status, iters = _run_baseline(method, problem, q0,
                                                 args.lr, delta, cap)
        if args.out_prefix:
            path = f"{args.out_prefix}{method}.csv"
            _write_trace(path, trace)
        print(f"{method}: status={status} iters={iters} "
              f"final_f={trace[-1][0]:.6e}")
        any_converged |= status == "converged"
    return EXIT_OK if any_converged else EXIT_NOT_CONVERGED


def _run_baseline(method, problem, q0, lr, delta, cap):
    x = q0.copy()
    f_prev = problem.eval(x)
    g = problem.grad(x)
    trace = [(f_prev, float(np.linalg.norm(g)))]
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    params = baselines.AdamParams(h=lr) if method == "adam" else None
    x_prev = x.copy()
    status = "max_iters"
    iters = cap
    for k in range(1, cap + 1):
        if method == "gd":
            x = baselines.gd_step(x, g, lr)
        elif method == "adam":
            x, m, v = baselines.adam_step(x, m, v, k - 1, params, g)
        elif method == "nag":
            if k == 1:
                x, x_prev = baselines.gd_step(x, g, lr), x
            else:
                x_next, _ = baselines.nag_step(x, x_prev, k - 1, lr,
                                               problem.grad)
                x_prev, x = x, x_next
        else:
            raise ConfigError(f"unknown method {method!r}")
        f_k = problem.eval(x)
        g = problem.grad(x)
        gnorm = float(np.linalg.norm(g))
        trace.append((f_k, gnorm))
        if not np.isfinite(f_k) or not np.isfinite(gnorm):
            status, iters = "diverged", k
            break
        if abs(f_k - f_prev) < delta and gnorm < delta:
            status, iters = "converged", k
            break
        f_prev = f_k
    return trace, status, iters


def _write_trace(path, trace):
    import csv as _csv
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["iter", "f_value", "grad_norm"])
        for i, (fv, gn) in enumerate(trace):
            w.writerow([i, repr(float(fv)), repr(float(gn))])


def _cmd_rate_check(args) -> int:
    spec = _problem_spec(args)
    problem = spec.build()
    if args.family == "poly":
        cfg = BregmanConfig(family="poly", p=args.p or 6.0, C=args.C or 1e-3)
    else:
        cfg = BregmanConfig(family="expo", eta=args.eta or 0.5, C=args.C or 1e-3)
    q0 = default_q0(problem) if args.q0 is None else \
        np.array([float(v) for v in args.q0.split(",")])
    traj = integrate_el(cfg, problem, q0, t0=args.t0, T=args.T,
                        h_ode=args.h_ode)
    f_star = problem.known_minimum
    import csv as _csv
    with open(args.out, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["t", "error" if f_star is not None else "f"])
        stride = max(1, len(traj.times) // args.samples)
        for t, qi in zip(traj.times[::stride], traj.q[::stride]):
            val = problem.eval(qi)
            if f_star is not None:
                val = abs(val - f_star)
            w.writerow([repr(float(t)), repr(float(val))])
    print(f"wrote {args.out} ({'diverged' if traj.diverged else 'ok'})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bravopt",
                     description="Symplectic accelerated optimization "
                                 "benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="run one configuration")
    _add_problem_args(ps)
    _add_method_args(ps)
    ps.add_argument("--out", default=None, help="trace CSV path")
    ps.set_defaults(func=_cmd_solve)

    pw = sub.add_parser("sweep", help="fill a parameter grid")
    _add_problem_args(pw)
    _add_method_args(pw)
    pw.add_argument("--axis", action="append", required=True,
                    help="NAME:SPACING:LO:HI:COUNT, repeat for 2-3 axes")
    pw.add_argument("--out", required=True, help="grid CSV path")
    pw.add_argument("--svg", default=None, help="heatmap SVG path (2-D only)")
    pw.add_argument("--threads", type=int, default=1)
    pw.set_defaults(func=_cmd_sweep)

    pc = sub.add_parser("compare", help="bravo vs gd/nag/adam")
    _add_problem_args(pc)
    _add_method_args(pc)
    pc.add_argument("--method", action="append",
                    choices=("gd", "nag", "adam", "bravo"), default=None)
    pc.add_argument("--lr", type=float, default=0.001,
                    help="baseline step size")
    pc.add_argument("--out-prefix", default=None,
                    help="write <prefix><method>.csv traces")
    pc.set_defaults(func=_cmd_compare)

    pr = sub.add_parser("rate-check", help="continuous-rate oracle")
    _add_problem_args(pr)
    pr.add_argument("--family", choices=("poly", "expo"), required=True)
    pr.add_argument("--p", type=float, default=None)
    pr.add_argument("--eta", type=float, default=None)
    pr.add_argument("--C", type=float, default=None)
    pr.add_argument("--t0", type=float, default=1.0)
    pr.add_argument("--T", type=float, default=20.0)
    pr.add_argument("--h-ode", type=float, default=1e-3)
    pr.add_argument("--q0", default=None)
    pr.add_argument("--samples", type=int, default=500)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=_cmd_rate_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidProblemError, UnsupportedFamilyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
