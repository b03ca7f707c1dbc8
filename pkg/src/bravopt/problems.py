"""Convex benchmark objectives with analytic gradients.

Each factory returns an immutable :class:`ObjectiveProblem` bundling the
objective, its gradient, and (when available) the known minimizer/minimum.
Objectives defined only on the positive orthant (log barrier, negative
entropy) return ``+inf`` outside their domain instead of raising, so a
diverging trajectory is recorded as non-convergent rather than crashing a
parameter sweep.  At non-smooth points (l1 kinks, distance-sum anchors) the
gradient uses the zero element of the subdifferential for the offending term.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ObjectiveProblem",
    "make_quartic",
    "make_log_barrier",
    "make_negative_entropy",
    "make_ill_conditioned",
    "make_least_squares",
    "make_logistic",
    "make_logistic_instance",
    "make_fermat_weber",
    "make_fermat_weber_instance",
    "PROBLEM_NAMES",
    "problem_by_name",
    "with_counters",
]


class InvalidProblemError(ValueError):
    """Raised for malformed problem parameters (bad dimension, labels, ...)."""


@dataclass(frozen=True)
class ObjectiveProblem:
    """A differentiable objective f: R^dim -> R with gradient.

    ``eval``/``grad`` are pure and safe to call concurrently.  ``eval`` may
    return ``+inf`` (domain sentinel); ``grad`` then returns NaNs, which
    callers treat as divergence.
    """

    name: str
    dim: int
    eval: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    known_minimizer: Optional[np.ndarray] = None
    known_minimum: Optional[float] = None


def _as_vector(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise InvalidProblemError(f"expected shape ({dim},), got {x.shape}")
    return x


def make_quartic(d: int) -> ObjectiveProblem:
    """f(x) = 1 + [(x-1)^T S (x-1)]^2 with S_ij = 0.9^|i-j|.

    Global minimum 1 at x = (1, ..., 1).  S is dense and built once; fine at
    desk scale (d up to a few hundred).
    """
    if d < 1:
        raise InvalidProblemError("quartic requires d >= 1")
    idx = np.arange(d)
    sigma = 0.9 ** np.abs(idx[:, None] - idx[None, :])
    ones = np.ones(d)

    def f(x):
        x = _as_vector(x, d)
        z = x - ones
        return 1.0 + float(z @ (sigma @ z)) ** 2

    def g(x):
        x = _as_vector(x, d)
        z = x - ones
        sz = sigma @ z
        return 4.0 * float(z @ sz) * sz

    return ObjectiveProblem(
        name="quartic",
        dim=d,
        eval=f,
        grad=g,
        known_minimizer=ones.copy(),
        known_minimum=1.0,
    )


def make_log_barrier() -> ObjectiveProblem:
    """f(x1, x2) = x1 + x2^2 - ln(x1 x2) on the positive orthant.

    Minimum 1.5 + ln(2)/2 at (1, sqrt(2)/2).  Nonpositive coordinates give
    +inf (sentinel) and NaN gradient.
    """

    def f(x):
        x = _as_vector(x, 2)
        if x[0] <= 0.0 or x[1] <= 0.0:
            return np.inf
        return float(x[0] + x[1] ** 2 - np.log(x[0]) - np.log(x[1]))

    def g(x):
        x = _as_vector(x, 2)
        if x[0] <= 0.0 or x[1] <= 0.0:
            return np.full(2, np.nan)
        return np.array([1.0 - 1.0 / x[0], 2.0 * x[1] - 1.0 / x[1]])

    return ObjectiveProblem(
        name="logbarrier",
        dim=2,
        eval=f,
        grad=g,
        known_minimizer=np.array([1.0, np.sqrt(2.0) / 2.0]),
        known_minimum=1.5 + 0.5 * np.log(2.0),
    )


def make_negative_entropy(d: int) -> ObjectiveProblem:
    """f(x) = sum_k x_k ln x_k on the positive orthant (negative entropy).

    Minimum -d/e at x = (1/e, ..., 1/e); +inf sentinel off-domain.
    """
    if d < 1:
        raise InvalidProblemError("negative entropy requires d >= 1")

    def f(x):
        x = _as_vector(x, d)
        if np.any(x <= 0.0):
            return np.inf
        return float(np.sum(x * np.log(x)))

    def g(x):
        x = _as_vector(x, d)
        if np.any(x <= 0.0):
            return np.full(d, np.nan)
        return np.log(x) + 1.0

    return ObjectiveProblem(
        name="entropy",
        dim=d,
        eval=f,
        grad=g,
        known_minimizer=np.full(d, np.exp(-1.0)),
        known_minimum=-d * np.exp(-1.0),
    )


def make_ill_conditioned() -> ObjectiveProblem:
    """f(x) = 1 + 0.01 x1^2 + x2^2 + 100 x3^2 (condition number 1e4)."""
    coeffs = np.array([0.01, 1.0, 100.0])

    def f(x):
        x = _as_vector(x, 3)
        return 1.0 + float(coeffs @ (x * x))

    def g(x):
        x = _as_vector(x, 3)
        return 2.0 * coeffs * x

    return ObjectiveProblem(
        name="illcond",
        dim=3,
        eval=f,
        grad=g,
        known_minimizer=np.zeros(3),
        known_minimum=1.0,
    )


def make_least_squares(m: int, n: int, reg: str = "none",
                       lam: float = 1.0, seed: int = 0,
                       A: Optional[np.ndarray] = None,
                       b: Optional[np.ndarray] = None) -> ObjectiveProblem:
    """Linear regression with standard-normal data from a seeded generator.

    reg="none":  f = x^T A^T A x / 2 - b^T A x       (normal-equation minimizer)
    reg="l2":    f = ||Ax-b||^2 + lam ||x||^2        (ridge, (A^T A + lam I)^{-1} A^T b)
    reg="l1":    f = ||Ax-b||^2 / 2 + lam ||x||_1    (lasso; sign subgradient, 0 at kinks)

    Pass explicit (A, b) to bypass the generator.  Rank-deficient A^T A just
    omits the known minimizer.
    """
    if not (m >= n >= 1):
        raise InvalidProblemError("least squares requires m >= n >= 1")
    if reg not in ("none", "l1", "l2"):
        raise InvalidProblemError(f"unknown regularization {reg!r}")
    if reg != "none" and lam <= 0.0:
        raise InvalidProblemError("regularization weight must be positive")
    if A is None or b is None:
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((m, n))
        b = rng.standard_normal(m)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    ata = A.T @ A
    atb = A.T @ b

    minimizer = None
    if reg == "none":
        def f(x):
            x = _as_vector(x, n)
            return float(0.5 * x @ (ata @ x) - atb @ x)

        def g(x):
            x = _as_vector(x, n)
            return ata @ x - atb

        if np.linalg.matrix_rank(ata) == n:
            minimizer = np.linalg.solve(ata, atb)
    elif reg == "l2":
        def f(x):
            x = _as_vector(x, n)
            r = A @ x - b
            return float(r @ r + lam * (x @ x))

        def g(x):
            x = _as_vector(x, n)
            return 2.0 * (ata @ x - atb) + 2.0 * lam * x

        minimizer = np.linalg.solve(ata + lam * np.eye(n), atb)
    else:  # l1
        def f(x):
            x = _as_vector(x, n)
            r = A @ x - b
            return float(0.5 * (r @ r) + lam * np.sum(np.abs(x)))

        def g(x):
            x = _as_vector(x, n)
            return ata @ x - atb + lam * np.sign(x)

    known_min = f(minimizer) if minimizer is not None else None
    return ObjectiveProblem(
        name=f"lstsq-{reg}",
        dim=n,
        eval=f,
        grad=g,
        known_minimizer=minimizer,
        known_minimum=known_min,
    )


def make_logistic(features: np.ndarray, labels: np.ndarray,
                  reg: str = "none", lam: float = 1.0) -> ObjectiveProblem:
    """Binary-classification log loss  f(w) = sum_i log(1 + exp(-y_i w.x_i)).

    Labels must be +-1.  Uses the softplus form log1p(exp(-|z|)) + max(0,-z)
    so large |w.x| cannot overflow.  Optional l1/l2 penalty on w.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise InvalidProblemError("features must be (m, n), labels (m,)")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidProblemError("labels must be in {-1, +1}")
    if reg not in ("none", "l1", "l2"):
        raise InvalidProblemError(f"unknown regularization {reg!r}")
    if reg != "none" and lam <= 0.0:
        raise InvalidProblemError("regularization weight must be positive")
    m, n = X.shape
    yX = y[:, None] * X

    def softplus(z):
        # log(1 + e^z), stable for both signs
        return np.logaddexp(0.0, z)

    def f(w):
        w = _as_vector(w, n)
        z = yX @ w
        val = float(np.sum(softplus(-z)))
        if reg == "l2":
            val += lam * float(w @ w)
        elif reg == "l1":
            val += lam * float(np.sum(np.abs(w)))
        return val

    def g(w):
        w = _as_vector(w, n)
        z = yX @ w
        # sigma(-z) computed stably
        s = np.where(z >= 0, np.exp(-np.logaddexp(0.0, z)),
                     1.0 / (1.0 + np.exp(z)))
        gv = -(yX.T @ s)
        if reg == "l2":
            gv = gv + 2.0 * lam * w
        elif reg == "l1":
            gv = gv + lam * np.sign(w)
        return gv

    return ObjectiveProblem(name=f"logistic-{reg}", dim=n, eval=f, grad=g)


def make_logistic_instance(m: int = 100, n: int = 4, seed: int = 0,
                           reg: str = "none", lam: float = 1.0) -> ObjectiveProblem:
    """Seeded synthetic logistic instance: gaussian features, labels from a
    random linear teacher with 10% flips."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, n))
    w_true = rng.standard_normal(n)
    y = np.sign(X @ w_true + 0.1 * rng.standard_normal(m))
    y[y == 0.0] = 1.0
    flip = rng.random(m) < 0.1
    y[flip] *= -1.0
    return make_logistic(X, y, reg=reg, lam=lam)


def make_fermat_weber(anchors, weights) -> ObjectiveProblem:
    """Weighted sum of distances  f(x) = sum_j w_j ||x - y_j||.

    At x exactly equal to an anchor the corresponding term contributes the
    zero subgradient.
    """
    Y = np.asarray(anchors, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    w = np.asarray(weights, dtype=float)
    if len(Y) != len(w) or len(w) < 1:
        raise InvalidProblemError("need equally many anchors and weights, >= 1")
    if np.any(w <= 0.0):
        raise InvalidProblemError("weights must be positive")
    n = Y.shape[1]

    def f(x):
        x = _as_vector(x, n)
        return float(w @ np.linalg.norm(x - Y, axis=1))

    def g(x):
        x = _as_vector(x, n)
        diff = x - Y
        dist = np.linalg.norm(diff, axis=1)
        ok = dist > 0.0
        gv = np.zeros(n)
        if np.any(ok):
            gv = (w[ok] / dist[ok]) @ diff[ok]
        return gv

    return ObjectiveProblem(name="fermat-weber", dim=n, eval=f, grad=g)


def make_fermat_weber_instance(m: int = 20, n: int = 3, seed: int = 0) -> ObjectiveProblem:
    """Seeded instance: gaussian anchors, uniform(0.5, 1.5) weights."""
    rng = np.random.default_rng(seed)
    anchors = rng.standard_normal((m, n))
    weights = 0.5 + rng.random(m)
    return make_fermat_weber(anchors, weights)


PROBLEM_NAMES = (
    "quartic", "logbarrier", "entropy", "illcond",
    "lstsq", "logistic", "fermat-weber",
)


def problem_by_name(name: str, *, dim: int = 2, rows: Optional[int] = None,
                    seed: int = 0, reg: str = "none", lam: float = 1.0) -> ObjectiveProblem:
    """Build a problem from its CLI name.

    ``dim`` is the variable dimension; ``rows`` the number of data rows for
    the regression problems (defaults to 3*dim).  ``seed`` drives the data
    generators and is ignored by the deterministic problems.
    """
    if rows is None:
        rows = 3 * dim
    if name == "quartic":
        return make_quartic(dim)
    if name == "logbarrier":
        return make_log_barrier()
    if name == "entropy":
        return make_negative_entropy(dim)
    if name == "illcond":
        return make_ill_conditioned()
    if name == "lstsq":
        return make_least_squares(rows, dim, reg=reg, lam=lam, seed=seed)
    if name == "logistic":
        return make_logistic_instance(rows, dim, seed=seed, reg=reg, lam=lam)
    if name == "fermat-weber":
        return make_fermat_weber_instance(rows, dim, seed=seed)
    raise InvalidProblemError(f"unknown problem {name!r}; choose from {PROBLEM_NAMES}")


@dataclass
class EvalCounter:
    """Mutable tally of objective/gradient calls (for budget assertions)."""
    f_calls: int = 0
    g_calls: int = 0


def with_counters(problem: ObjectiveProblem):
    """Wrap a problem so every eval/grad call is counted.

    Returns ``(counted_problem, counter)``.
    """
    counter = EvalCounter()

    def f(x):
        counter.f_calls += 1
        return problem.eval(x)

    def g(x):
        counter.g_calls += 1
        return problem.grad(x)

    counted = ObjectiveProblem(
        name=problem.name, dim=problem.dim, eval=f, grad=g,
        known_minimizer=problem.known_minimizer,
        known_minimum=problem.known_minimum,
    )
    return counted, counter
