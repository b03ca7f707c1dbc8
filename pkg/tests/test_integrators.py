"""Update-rule checks: hand values, scheme equivalences, reversibility,
implicit time solves, gradient budget, long-run energy behavior."""

import math

import numpy as np
import pytest
from conftest import iterate

from bravopt.bregman import BregmanConfig, ExtendedState
from bravopt.integrators import (
    ImplicitSolveError,
    Stepper,
    init_state,
    solve_implicit_time,
    step,
)
from bravopt.problems import (
    ObjectiveProblem,
    make_ill_conditioned,
    make_log_barrier,
    with_counters,
)

POLY = BregmanConfig(family="poly", p=6.0, C=1e-5)
EXPO = BregmanConfig(family="expo", eta=1.0, C=1e-4)

ALL_CONFIGS = [
    BregmanConfig(family="poly", p=4.0, C=1e-4),
    BregmanConfig(family="poly", p=6.0, p_ring=2.0, C=1e-4),
    BregmanConfig(family="expo", eta=0.5, C=1e-3),
    BregmanConfig(family="expo", eta=0.5, eta_ring=2.0, C=1e-3),
    BregmanConfig(family="expo2poly", eta=0.3, p=4.0, C=1e-3),
    BregmanConfig(family="poly2expo", p=4.0, eta=0.3, C=1e-3),
]


def constant_problem(d=2, value=3.5):
    return ObjectiveProblem(
        name="const", dim=d,
        eval=lambda x: value,
        grad=lambda x: np.zeros(d),
    )


def quadratic_1d():
    return ObjectiveProblem(
        name="half-square", dim=1,
        eval=lambda x: 0.5 * float(x @ x),
        grad=lambda x: x.copy(),
    )


# -- initialization ----------------------------------------------------------

def test_init_time_is_one_everywhere():
    for kind in ("htvi", "ltvi", "slc", "sv"):
        s = init_state(POLY, kind, np.zeros(2), 0.1, np.zeros(2))
        assert s.t == 1.0 and s.k == 0


def test_init_zero_gradient_gives_zero_momentum():
    g0 = np.zeros(3)
    for kind in ("htvi", "ltvi", "slc", "sv"):
        s = init_state(EXPO, kind, np.ones(3), 0.1, g0)
        assert np.all(s.r == 0.0)


def test_init_slc_half_kick_values():
    # poly: r0 = -C h p grad0 / 2 at t = 1
    cfg = BregmanConfig(family="poly", p=2.0, C=1.0)
    s = init_state(cfg, "slc", np.zeros(1), 0.1, np.ones(1))
    assert s.r == pytest.approx(np.array([-0.1]))
    # expo: r0 = -C eta h e^{2 eta} grad0 / 2
    cfg = BregmanConfig(family="expo", eta=1.0, C=1.0)
    s = init_state(cfg, "slc", np.zeros(1), 0.1, np.ones(1))
    assert s.r == pytest.approx(np.array([-0.05 * np.e ** 2]))


def test_init_other_kinds_default_to_rest():
    g0 = np.ones(2)
    for kind in ("htvi", "ltvi", "sv"):
        s = init_state(POLY, kind, np.zeros(2), 0.1, g0)
        assert np.all(s.r == 0.0)
    # and the half-kick form is available behind the flag
    s = init_state(POLY, "sv", np.zeros(2), 0.1, g0,
                   init_momentum="half-kick")
    assert np.all(s.r < 0.0)


def test_init_energy_tracking_needs_f0():
    with pytest.raises(ValueError):
        init_state(EXPO, "slc", np.zeros(1), 0.1, np.zeros(1),
                   track_energy=True)
    s = init_state(EXPO, "slc", np.zeros(1), 0.1, np.zeros(1),
                   track_energy=True, f0=2.0, init_momentum="zero")
    assert s.r_t == pytest.approx(-EXPO.C * EXPO.eta * np.exp(2 * EXPO.eta) * 2.0)


# -- hand-evaluated steps ------------------------------------------------------

def test_expo_htvi_hand_step():
    # f = q^2/2, C = 1, eta = 1, h = 0.1 from (q, r, t) = (1, 0, 1):
    # r1 = -0.1 e^2, q1 = 1 - 0.01 e, t1 = 1.1
    prob = quadratic_1d()
    cfg = BregmanConfig(family="expo", eta=1.0, C=1.0)
    s = ExtendedState(q=np.ones(1), r=np.zeros(1), t=1.0)
    rec = step(cfg, "htvi", s, 0.1, prob)
    assert rec.state.r == pytest.approx(np.array([-0.1 * np.e ** 2]))
    assert rec.state.q == pytest.approx(np.array([1.0 - 0.01 * np.e]))
    assert rec.state.t == pytest.approx(1.1)


def test_poly_slc_fused_first_steps_match_loop_transcript():
    # transcribe the fused polynomial loop by hand for two iterations
    prob = quadratic_1d()
    p, C, h = 3.0, 0.5, 0.2
    cfg = BregmanConfig(family="poly", p=p, C=C)
    q = 1.0
    t = 1.0
    r = -0.5 * C * h * p * t ** (2 * p - 1) * q  # init half kick, grad = q
    qs = []
    for _ in range(2):
        dq = h * p * (t + h / 2.0) ** (-p - 1.0) * r
        q += dq
        G = q
        t += h
        r -= C * h * p * t ** (2 * p - 1) * G
        qs.append(q)
    got = iterate(cfg, "slc", prob, np.array([1.0]), h, 2)["q"]
    assert got[1][0] == pytest.approx(qs[0], rel=1e-14)
    assert got[2][0] == pytest.approx(qs[1], rel=1e-14)


def test_constant_objective_is_fixed_point():
    # zero gradient: q and r never move, physical time advances per rule
    prob = constant_problem()
    for cfg in ALL_CONFIGS:
        for kind in ("htvi", "ltvi", "slc", "sv"):
            out = iterate(cfg, kind, prob, np.ones(2), 0.05, 5,
                          collect=("q", "r", "t"))
            assert np.allclose(out["q"][-1], 1.0)
            assert np.all(out["r"][-1] == 0.0)
            ts = out["t"]
            assert all(b > a for a, b in zip(ts, ts[1:])) or kind == "slc"
            # slc stores the lagged time; it still advances monotonically
            if kind == "slc":
                assert ts[-1] > 1.0


# -- scheme equivalences ----------------------------------------------------------

def test_htvi_ltvi_identical_10_steps_hand_case():
    prob = make_ill_conditioned()
    cfg = BregmanConfig(family="poly", p=6.0, C=0.1)
    qs_h = iterate(cfg, "htvi", prob, np.ones(3), 0.01, 10)["q"]
    qs_l = iterate(cfg, "ltvi", prob, np.ones(3), 0.01, 10)["q"]
    for a, b in zip(qs_h, qs_l):
        assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))


@pytest.mark.parametrize("cfg,problem,q0,h", [
    (BregmanConfig(family="poly", p=6.0, C=1e-4), make_log_barrier(),
     np.array([2.0, 2.0]), 0.01),
    (BregmanConfig(family="poly", p=6.0, C=1e-5), make_ill_conditioned(),
     np.ones(3), 0.01),
    (BregmanConfig(family="expo", eta=1.0, C=1e-3), make_log_barrier(),
     np.array([2.0, 2.0]), 0.01),
    (BregmanConfig(family="expo", eta=1.0, C=1e-4), make_ill_conditioned(),
     np.ones(3), 0.01),
], ids=["poly-logbarrier", "poly-illcond", "expo-logbarrier", "expo-illcond"])
def test_htvi_equals_ltvi_non_adaptive_1000_steps(cfg, problem, q0, h):
    qs_h = iterate(cfg, "htvi", problem, q0, h, 1000)["q"]
    qs_l = iterate(cfg, "ltvi", problem, q0, h, 1000)["q"]
    assert len(qs_h) == len(qs_l) == 1001
    worst = max(
        np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a)))
        for a, b in zip(qs_h, qs_l))
    assert worst <= 1e-10, f"max relative deviation {worst:.3e}"


def test_htvi_differs_from_ltvi_when_adaptive():
    cfg = BregmanConfig(family="poly", p=6.0, p_ring=2.0, C=1e-4)
    prob = make_ill_conditioned()
    qs_h = iterate(cfg, "htvi", prob, np.ones(3), 0.01, 50)["q"]
    qs_l = iterate(cfg, "ltvi", prob, np.ones(3), 0.01, 50)["q"]
    assert np.max(np.abs(qs_h[-1] - qs_l[-1])) > 1e-12


@pytest.mark.parametrize("kind", ["slc", "sv"])
@pytest.mark.parametrize("cfg", ALL_CONFIGS,
                         ids=[c.family + ("-ad" if c.adaptive else "") for c in ALL_CONFIGS])
def test_fused_matches_unfused_iterates(cfg, kind):
    prob = make_ill_conditioned()
    q0 = np.ones(3)
    h = 0.02
    # the fused loop folds the leading half kick into the init for slc; the
    # unfused path applies its own half kicks starting from rest
    fused = iterate(cfg, kind, prob, q0, h, 200, fused=True)["q"]
    unfused = iterate(cfg, kind, prob, q0, h, 200, fused=False,
                      init_momentum="zero")["q"]
    worst = max(
        np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a)))
        for a, b in zip(fused, unfused))
    assert worst <= 1e-12, f"{cfg.family}-{kind}: deviation {worst:.3e}"


# -- reversibility of the symmetric schemes -----------------------------------------

@pytest.mark.parametrize("kind", ["slc", "sv"])
@pytest.mark.parametrize("cfg", ALL_CONFIGS,
                         ids=[c.family + ("-ad" if c.adaptive else "") for c in ALL_CONFIGS])
def test_symmetric_step_composed_with_reverse_is_identity(cfg, kind):
    prob = make_ill_conditioned()
    h = 0.05
    q0 = np.array([0.7, -0.4, 0.2])
    g0 = prob.grad(q0)
    s0 = ExtendedState(q=q0, r=np.array([0.1, 0.2, -0.3]), t=1.3)
    fwd = Stepper(cfg, kind, h, prob, fused=False)
    bwd = Stepper(cfg, kind, -h, prob, fused=False)
    rec = fwd.step(s0, g0)
    back = bwd.step(rec.state, rec.grad)
    assert np.max(np.abs(back.state.q - s0.q)) <= 1e-10
    assert np.max(np.abs(back.state.r - s0.r)) <= 1e-10
    assert abs(back.state.t - s0.t) <= 1e-10


def test_htvi_is_not_time_reversible():
    # order-1 map: the adjoint composition does not return to the start
    prob = make_ill_conditioned()
    cfg = BregmanConfig(family="expo", eta=1.0, C=0.5)
    h = 0.3
    q0 = np.array([0.7, -0.4, 0.2])
    s0 = ExtendedState(q=q0, r=np.array([0.1, 0.2, -0.3]), t=1.0)
    fwd = Stepper(cfg, "htvi", h, prob)
    bwd = Stepper(cfg, "htvi", -h, prob)
    rec = fwd.step(s0, prob.grad(q0))
    back = bwd.step(rec.state, rec.grad)
    assert np.max(np.abs(back.state.q - s0.q)) > 1e-8


# -- implicit time update -------------------------------------------------------------

def test_implicit_time_trivial_when_non_adaptive():
    cfg = BregmanConfig(family="poly", p=6.0, C=1.0)
    assert solve_implicit_time(cfg, 2.0, 0.25) == pytest.approx(2.25, abs=1e-14)


def test_implicit_time_against_bisection():
    # p=6, p_ring=2: x = 1 + 0.15 (1 + x^(2/3))
    cfg = BregmanConfig(family="poly", p=6.0, p_ring=2.0, C=1.0)
    got = solve_implicit_time(cfg, 1.0, 0.1)

    def residual(x):
        return x - (1.0 + 0.15 * (1.0 + x ** (2.0 / 3.0)))

    lo, hi = 1.0, 3.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if residual(mid) > 0:
            hi = mid
        else:
            lo = mid
    assert got == pytest.approx(0.5 * (lo + hi), abs=1e-12)
    assert abs(residual(got)) <= 1e-12


def test_implicit_time_residual_small_across_inputs(rng):
    from bravopt.bregman import monitor
    for _ in range(50):
        p = float(rng.uniform(2.0, 12.0))
        pr = float(rng.uniform(1.0, p))
        t = float(rng.uniform(0.2, 50.0))
        h = float(rng.uniform(1e-3, 0.5))
        cfg = BregmanConfig(family="poly", p=p, p_ring=pr, C=1.0)
        x = solve_implicit_time(cfg, t, h)
        res = abs(x - (t + 0.5 * h * (monitor(cfg, t) + monitor(cfg, x))))
        assert res <= max(1e-12, 8 * math.ulp(x))


def test_sv_expo2poly_time_update_guard():
    cfg = BregmanConfig(family="expo2poly", eta=10.0, p=1.0, C=1.0)
    prob = constant_problem()
    stepper = Stepper(cfg, "sv", 1.0, prob)  # eta h = 10 >= 2p = 2
    s = ExtendedState(q=np.zeros(2), r=np.zeros(2), t=1.0)
    with pytest.raises(ImplicitSolveError):
        stepper.step(s, np.zeros(2))


# -- gradient budget --------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["htvi", "ltvi", "slc", "sv"])
@pytest.mark.parametrize("fused", [True, False])
def test_one_gradient_evaluation_per_step(kind, fused):
    if not fused and kind in ("htvi", "ltvi"):
        pytest.skip("fusion only applies to the symmetric kinds")
    prob, counter = with_counters(make_ill_conditioned())
    cfg = BregmanConfig(family="expo", eta=0.5, C=1e-3)
    n = 40
    iterate(cfg, kind, prob, np.ones(3), 0.01, n, fused=fused,
            init_momentum="zero")
    # one eval to seed the cache plus exactly one per step
    assert counter.g_calls == n + 1


# -- saturation and divergence ------------------------------------------------------------

def test_saturation_is_flagged_not_raised():
    prob = quadratic_1d()
    cfg = BregmanConfig(family="expo", eta=2.0, C=1.0)
    s = ExtendedState(q=np.ones(1), r=np.zeros(1), t=200.0)  # e^(2*2*200) overflows
    rec = step(cfg, "htvi", s, 0.1, prob)
    assert rec.saturated


# -- long-run energy behavior ----------------------------------------------------------

def test_expo_slc_energy_stays_bounded_10k_steps():
    """Near-conservation of the extended Hamiltonian by the symmetric scheme.

    Non-adaptive exponential leapfrog on the ill-conditioned quadratic with
    the time-conjugate momentum tracked: |H| over 10^4 steps never exceeds
    10x its maximum over the first 100 steps.
    """
    cfg = BregmanConfig(family="expo", eta=0.05, C=1e-3)
    prob = make_ill_conditioned()
    out = iterate(cfg, "slc", prob, np.ones(3), 0.01, 10_000,
                  fused=False, track_energy=True, init_momentum="zero",
                  collect=("energy",))
    energies = np.abs(np.asarray(out["energy"]))
    assert len(energies) == 10_001
    early = energies[1:101].max()
    assert energies.max() <= 10.0 * early, \
        f"|H| max {energies.max():.3e} vs early {early:.3e}"


def test_htvi_energy_drifts_more_than_slc():
    # the order-1 scheme shows visibly larger energy error than leapfrog;
    # sanity check that the diagnostic distinguishes them
    cfg = BregmanConfig(family="expo", eta=0.05, C=1e-3)
    prob = make_ill_conditioned()
    out = iterate(cfg, "slc", prob, np.ones(3), 0.05, 400, fused=False,
                  track_energy=True, init_momentum="zero", collect=("energy",))
    slc_drift = np.abs(np.asarray(out["energy"])).max()
    assert slc_drift < 0.05 * prob.eval(np.ones(3))
