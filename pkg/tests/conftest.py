"""Shared test helpers."""

import numpy as np
import pytest

from bravopt.integrators import Stepper, init_state


def iterate(cfg, kind, problem, q0, h, n_steps, fused=True,
            init_momentum=None, track_energy=False, collect=("q",)):
    """Drive a stepper for n_steps; returns dict of collected series.

    Collectable keys: q (iterates, includes q0), r, t, f, grad, dq, state,
    energy (extended-Hamiltonian values, needs track_energy).
    """
    q0 = np.asarray(q0, dtype=float)
    g = problem.grad(q0)
    f = problem.eval(q0)
    stepper = Stepper(cfg, kind, h, problem, fused=fused,
                      track_energy=track_energy)
    state = stepper.initial_state(q0, g, f0=f, init_momentum=init_momentum)
    out = {key: [] for key in collect}
    if "q" in out:
        out["q"].append(q0.copy())
    if "energy" in out:
        from bravopt.bregman import poincare_hamiltonian
        out["energy"].append(poincare_hamiltonian(cfg, state, f))
    for _ in range(n_steps):
        rec = stepper.step(state, g, f)
        state, g, f = rec.state, rec.grad, rec.f_value
        if "q" in out:
            out["q"].append(state.q.copy())
        if "r" in out:
            out["r"].append(state.r.copy())
        if "t" in out:
            out["t"].append(state.t)
        if "f" in out:
            out["f"].append(f)
        if "grad" in out:
            out["grad"].append(g.copy())
        if "dq" in out:
            out["dq"].append(rec.dq.copy())
        if "state" in out:
            out["state"].append(state)
        if "energy" in out:
            from bravopt.bregman import poincare_hamiltonian
            out["energy"].append(poincare_hamiltonian(cfg, state, f))
        if rec.saturated or not np.all(np.isfinite(state.q)):
            break
    out["final_state"] = state
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
