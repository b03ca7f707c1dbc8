"""bravopt: symplectic accelerated optimization via geometric integration.

Variational accelerated-optimization algorithms built from symplectic
discretizations of time-dependent Lagrangian/Hamiltonian dynamics, with
momentum restarting, temporal looping, a parameter-sweep benchmark harness,
and a continuous-time rate oracle.
"""

from .baselines import AdamParams, adam_step, gd_step, nag_step
from .bregman import (
    BregmanConfig,
    ExtendedState,
    el_acceleration,
    monitor,
    parameter_functions,
    poincare_hamiltonian,
)
from .harness import (
    Axis,
    ConfigError,
    ProblemSpec,
    RunConfig,
    RunResult,
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
from .integrators import StepRecord, Stepper, init_state, solve_implicit_time, step
from .looping import LoopingStrategy, instability_detected, reset_time
from .oracle import OracleTrajectory, check_time_dilation, integrate_el, rate_envelope
from .problems import (
    ObjectiveProblem,
    make_fermat_weber,
    make_ill_conditioned,
    make_least_squares,
    make_log_barrier,
    make_logistic,
    make_negative_entropy,
    make_quartic,
    problem_by_name,
    with_counters,
)
from .restart import RestartScheme, apply_restart, should_restart

__version__ = "0.1.0"
