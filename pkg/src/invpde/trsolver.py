"""Nonlinear least squares: trust-region core plus perturbation restarts.

``trust_region_solve`` minimizes 0.5 * ||r(theta)||^2 for a smooth residual
with analytic Jacobian, using a trust-region reflective Gauss-Newton method
with exact (SVD-based) subproblem solves.  ``nllsq_perturb`` wraps it in the
random-restart loop used throughout: solve once from the supplied initial
guess, and while the cost stays above a threshold retry from randomly
perturbed starting points, keeping the best result seen.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import least_squares

from .exceptions import InvalidInputError, NumericFailureError


@dataclass
class NllsqProblem:
    """A residual/Jacobian pair defining a nonlinear least-squares problem."""

    residual: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    dim_theta: int
    dim_residual: int


@dataclass
class TrustRegionConfig:
    """Settings of the damped/trust-region solve.

    The solve runs in up to three monotone phases, each starting from the
    previous iterate: (1) a cheap Levenberg-Marquardt descent using
    normal-equation steps, which makes fast progress far from the optimum
    but stalls once the Gauss-Newton subproblems get ill-conditioned;
    (2) a trust-region reflective pass with exact (SVD) subproblem solves;
    (3) a second reflective pass with Jacobian-based variable scaling,
    which tightens the parameter components.  ``max_nfev`` caps each
    reflective phase; the LM phase has its own iteration cap and stall
    detector.
    """

    max_nfev: int = 80
    ftol: float = 1e-14
    xtol: float = 1e-14
    gtol: float = 1e-14
    lm_phase: bool = True
    lm_max_iter: int = 250
    lm_stall_tol: float = 3e-4
    lm_patience: int = 4
    # hand off to the reflective phases as soon as the cost drops below
    # this value; 0 disables the early exit
    lm_cost_target: float = 0.0


@dataclass
class PerturbConfig:
    """Parameters of the perturbation-restart loop.

    delta                 base magnitude of the random perturbations
    eta                   0: restart from the perturbation itself;
                          nonzero: restart from best-theta + perturbation
    epsilon               cost threshold below which the result is accepted
    max_nllsq_iterations  iteration budget handed to the inner solver
    max_sub_iterations    number of restart attempts after the initial solve
    theta0                initial guess for the first solve
    """

    delta: float = 1.0
    eta: float = 1.0
    epsilon: float = 1e-8
    max_nllsq_iterations: int = 80
    max_sub_iterations: int = 2
    theta0: Optional[np.ndarray] = None


@dataclass
class SolveOutcome:
    theta: np.ndarray
    cost: float
    nfev: int
    n_restarts: int = 0
    converged: bool = True
    history: list = field(default_factory=list)


def _wrap_checked(fn, expect_cols, name):
    def wrapped(theta):
        out = np.asarray(fn(theta), dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise NumericFailureError(
                f"{name} returned non-finite values", theta=np.array(theta))
        return out
    return wrapped


def _lm_descent(fun, jac, x0, config):
    """Levenberg-Marquardt descent on normal equations.

    Cheap per iteration (one Gram matrix and Cholesky solves) and strictly
    monotone; stops when the cost drops below ``lm_cost_target``, when
    relative cost improvement stays below ``lm_stall_tol`` for
    ``lm_patience`` consecutive accepted steps, when no damping value
    yields a decrease, or at the iteration cap.
    """
    from scipy.linalg import cho_factor, cho_solve

    x = x0.copy()
    r = fun(x)
    cost = 0.5 * float(r @ r)
    lam = 1e-3
    nfev = 1
    slow = 0
    for _ in range(config.lm_max_iter):
        if cost < config.lm_cost_target:
            break
        j = jac(x)
        a = j.T @ j
        g = j.T @ r
        d2 = np.maximum(np.diag(a), 1e-300)
        improved = False
        for _trial in range(25):
            try:
                c = cho_factor(a + lam * np.diag(d2), lower=True)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            step = -cho_solve(c, g)
            rn = fun(x + step)
            nfev += 1
            cn = 0.5 * float(rn @ rn)
            if cn < cost:
                rel = (cost - cn) / max(cost, 1e-300)
                x, r, cost = x + step, rn, cn
                lam = max(lam * 0.3, 1e-14)
                improved = True
                break
            lam *= 4.0
        if not improved:
            break
        slow = slow + 1 if rel < config.lm_stall_tol else 0
        if slow >= config.lm_patience:
            break
    return x, cost, nfev


def trust_region_solve(problem, theta0, config=None):
    """Run the damped least-squares solver from ``theta0``.

    The returned cost never exceeds the cost at theta0 (accepted steps are
    monotone, and each phase starts from the previous phase's iterate).
    Non-finite residuals or Jacobians raise NumericFailureError.
    """
    config = config or TrustRegionConfig()
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=np.float64))
    if theta0.shape != (problem.dim_theta,):
        raise InvalidInputError(
            f"theta0 has shape {theta0.shape}, expected ({problem.dim_theta},)")
    if not np.all(np.isfinite(theta0)):
        raise InvalidInputError("theta0 contains non-finite entries")

    fun = _wrap_checked(problem.residual, None, "residual")
    jac = _wrap_checked(problem.jacobian, problem.dim_theta, "jacobian")

    x = theta0
    nfev = 0
    if config.lm_phase:
        x, _, n = _lm_descent(fun, jac, x, config)
        nfev += n

    res = None
    for x_scale in (1.0, "jac"):
        res = least_squares(
            fun, x, jac=jac, method="trf", tr_solver="exact",
            x_scale=x_scale, ftol=config.ftol, xtol=config.xtol,
            gtol=config.gtol, max_nfev=config.max_nfev)
        x = res.x
        nfev += int(res.nfev)
    if not np.all(np.isfinite(res.x)) or not np.isfinite(res.cost):
        raise NumericFailureError("solver produced non-finite iterate",
                                  theta=res.x)
    return SolveOutcome(theta=res.x, cost=float(res.cost), nfev=nfev,
                        converged=res.status > 0)


def nllsq_perturb(problem, pcfg, rng, trcfg=None):
    """Nonlinear least squares with random perturbation restarts.

    First solves from ``pcfg.theta0`` (zeros if None).  If the cost is below
    ``pcfg.epsilon`` that result is returned immediately.  Otherwise up to
    ``pcfg.max_sub_iterations`` restarts are attempted: draw xi ~ U[0,1],
    set delta1 = xi * delta, draw a perturbation Dtheta ~ U[-delta1, delta1]
    per component, and restart from Dtheta (eta == 0) or best-theta + Dtheta
    (eta != 0).  The best result over all attempts is returned; the loop
    short-circuits as soon as a cost drops below epsilon.

    Inner solves that fail numerically still consume a sub-iteration.  If
    every attempt fails a NumericFailureError propagates.
    """
    trcfg = trcfg or TrustRegionConfig()
    trcfg = TrustRegionConfig(max_nfev=pcfg.max_nllsq_iterations,
                              ftol=trcfg.ftol, xtol=trcfg.xtol,
                              gtol=trcfg.gtol,
                              lm_cost_target=pcfg.epsilon)
    theta0 = pcfg.theta0
    if theta0 is None:
        theta0 = np.zeros(problem.dim_theta)
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=np.float64))

    best = None
    failure = None
    history = []
    total_nfev = 0

    try:
        best = trust_region_solve(problem, theta0, trcfg)
        history.append(best.cost)
        total_nfev += best.nfev
    except NumericFailureError as exc:
        failure = exc

    n_restarts = 0
    if best is None or best.cost >= pcfg.epsilon:
        for _ in range(pcfg.max_sub_iterations):
            n_restarts += 1
            xi = rng.uniform(0.0, 1.0)
            delta1 = xi * pcfg.delta
            dtheta = rng.uniform(-delta1, delta1, size=problem.dim_theta)
            if pcfg.eta == 0 or best is None:
                start = dtheta
            else:
                start = best.theta + dtheta
            try:
                out = trust_region_solve(problem, start, trcfg)
            except NumericFailureError as exc:
                failure = exc
                continue
            history.append(out.cost)
            total_nfev += out.nfev
            if best is None or out.cost < best.cost:
                best = out
            if best.cost < pcfg.epsilon:
                break

    if best is None:
        raise failure
    best.n_restarts = n_restarts
    best.nfev = total_nfev
    best.history = history
    return best
