"""The three inverse-problem solvers.

* ``solve_nllsq``      joint nonlinear least squares over (alpha, beta) with
                       perturbation restarts.
* ``solve_varpro_f1``  variable projection eliminating alpha: the outer
                       nonlinear solve runs over beta and alpha is recovered
                       by a linear solve at the optimum.
* ``solve_varpro_f2``  variable projection eliminating beta, for problems
                       whose operator terms are linear in u; nonlinear
                       kernels are handled by an outer Newton loop that
                       re-linearizes around the current field iterate.

``DEFAULTS`` records, per benchmark and solver, the restart parameters and
random-weight magnitude that work well for the built-in benchmarks.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError, UnsupportedOperationError
from .trsolver import NllsqProblem, PerturbConfig, SolveOutcome, nllsq_perturb

SOLVER_CHOICES = ("nllsq", "varpro_f1", "varpro_f2")


@dataclass
class NewtonConfig:
    max_iterations: int = 15
    tol: float = 1e-12


@dataclass
class InverseSolution:
    alpha: np.ndarray
    beta: np.ndarray
    cost: float
    nfev: int
    n_restarts: int
    converged: bool
    newton_iterations: int = 0


def resolve_theta0(mode, dim, delta, rng):
    """Initial-guess policies: 'zero', 'perturb' (a restart-style draw of
    magnitude up to delta), or 'uniform' (componentwise U[-1, 1])."""
    if mode == "zero":
        return np.zeros(dim)
    if mode == "perturb":
        delta1 = rng.uniform(0.0, 1.0) * delta
        return rng.uniform(-delta1, delta1, size=dim)
    if mode == "uniform":
        return rng.uniform(-1.0, 1.0, size=dim)
    raise InvalidInputError(f"unknown theta0 mode {mode!r}")


def solve_nllsq(tables, pcfg, rng):
    """Full nonlinear least squares over the joint unknown [alpha, beta]."""
    dim = tables.n_alpha_cols + tables.n_beta_cols
    prob = NllsqProblem(residual=tables.full_residual,
                        jacobian=tables.full_jacobian,
                        dim_theta=dim, dim_residual=tables.layout.total)
    out = nllsq_perturb(prob, pcfg, rng)
    alpha, beta = tables.split_theta(out.theta)
    return InverseSolution(alpha=alpha.copy(), beta=beta.copy(),
                           cost=out.cost, nfev=out.nfev,
                           n_restarts=out.n_restarts, converged=out.converged)


def solve_varpro_f1(tables, pcfg, rng):
    """Variable projection over beta; alpha recovered by least squares."""
    dim = tables.n_beta_cols
    n_res = tables.layout.total
    prob = NllsqProblem(residual=tables.varpro1_residual,
                        jacobian=tables.varpro1_reduced_jacobian,
                        dim_theta=dim, dim_residual=n_res)
    out = nllsq_perturb(prob, pcfg, rng)
    _, _, alpha = tables.varpro1_system(out.theta)
    return InverseSolution(alpha=np.atleast_1d(alpha).copy(),
                           beta=out.theta.copy(), cost=out.cost,
                           nfev=out.nfev, n_restarts=out.n_restarts,
                           converged=out.converged)


def _f2_solve_once(tables, pcfg, rng, lin):
    dim = tables.n_alpha_cols
    prob = NllsqProblem(
        residual=lambda a: tables.varpro2_residual(a, lin),
        jacobian=lambda a: tables.varpro2_reduced_jacobian(a, lin),
        dim_theta=dim, dim_residual=0)
    return nllsq_perturb(prob, pcfg, rng)


def solve_varpro_f2(tables, pcfg, rng, newton=None):
    """Variable projection over alpha.

    For problems whose kernels are all linear in u a single reduced solve
    suffices.  Otherwise an outer Newton loop linearizes the kernels around
    the current field iterate (starting from u = 0), solves the linear
    reduced problem, and repeats until the field stops changing.
    """
    if tables.problem.mode != "scalar":
        raise UnsupportedOperationError(
            "varpro_f2 does not support field-coefficient problems")
    all_linear = (all(k.is_linear for k in tables.problem.kernels)
                  and tables.problem.f_kernel.is_linear)
    if all_linear:
        out = _f2_solve_once(tables, pcfg, rng, None)
        _, _, beta = tables.varpro2_system(out.theta)
        return InverseSolution(alpha=out.theta.copy(), beta=beta,
                               cost=out.cost, nfev=out.nfev,
                               n_restarts=out.n_restarts,
                               converged=out.converged)

    newton = newton or NewtonConfig()
    beta = np.zeros(tables.n_beta_cols)
    u_vals = tables.u_jets(beta).val.copy()
    out = None
    alpha = None
    total_nfev = 0
    total_restarts = 0
    iters = 0
    for iters in range(1, newton.max_iterations + 1):
        lin = tables.newton_linearize(tables.u_jets(beta))
        step_cfg = pcfg if alpha is None else \
            dataclasses.replace(pcfg, theta0=alpha)
        out = _f2_solve_once(tables, step_cfg, rng, lin)
        alpha = out.theta
        total_nfev += out.nfev
        total_restarts += out.n_restarts
        _, _, beta = tables.varpro2_system(alpha, lin)
        new_vals = tables.u_jets(beta).val
        du = float(np.max(np.abs(new_vals - u_vals)))
        u_vals = new_vals.copy()
        if du < newton.tol:
            break
    return InverseSolution(alpha=alpha.copy(), beta=beta, cost=out.cost,
                           nfev=total_nfev, n_restarts=total_restarts,
                           converged=out.converged, newton_iterations=iters)


def solve(tables, method, pcfg, rng, newton=None):
    """Dispatch on the solver name: nllsq, varpro_f1, or varpro_f2."""
    if method == "nllsq":
        return solve_nllsq(tables, pcfg, rng)
    if method == "varpro_f1":
        return solve_varpro_f1(tables, pcfg, rng)
    if method == "varpro_f2":
        return solve_varpro_f2(tables, pcfg, rng, newton=newton)
    raise InvalidInputError(
        f"unknown solver {method!r}; choose from {SOLVER_CHOICES}")


def _cfg(max_it, sub_it, eps, delta, eta, theta0, r_m, max_newton=None):
    return {"max_nllsq_iterations": max_it, "max_sub_iterations": sub_it,
            "epsilon": eps, "delta": delta, "eta": eta, "theta0": theta0,
            "r_m": r_m, "max_newton": max_newton}


#: Reference solver settings per benchmark, as used in the bundled studies.
DEFAULTS = {
    "poisson": {
        "nllsq": _cfg(80, 2, 1e-8, 1.0, 1, "zero", 3.0),
        "varpro_f1": _cfg(80, 2, 1e-8, 1.0, 1, "zero", 2.8),
        "varpro_f2": _cfg(80, 2, 1e-8, 1.0, 1, "zero", 2.0),
    },
    "advection": {
        "nllsq": _cfg(80, 2, 1e-8, 5.0, 0, "datafit", 2.5),
        "varpro_f1": _cfg(80, 2, 1e-8, 5.0, 0, "datafit", 2.5),
        "varpro_f2": _cfg(80, 2, 1e-8, 5.0, 0, "uniform", 2.0),
    },
    "helmholtz": {
        "nllsq": _cfg(80, 2, 1e-8, 0.5, 1, "zero", 2.25),
        "varpro_f1": _cfg(80, 2, 1e-8, 0.5, 1, "zero", 2.25),
        "varpro_f2": _cfg(80, 0, 1e-8, 0.5, 1, "zero", 2.5, 15),
    },
    "burgers": {
        "nllsq": _cfg(80, 2, 1e-8, 0.5, 1, "zero", 1.9),
        "varpro_f1": _cfg(80, 2, 1e-8, 1.0, 1, "zero", 1.9),
        "varpro_f2": _cfg(20, 0, 1e-12, 1.0, 0, "zero", 2.0, 8),
    },
    "sine_gordan": {
        "nllsq": _cfg(50, 5, 1e-8, 5.0, 0, "zero", 1.5),
        "varpro_f1": _cfg(80, 5, 1e-8, 5.0, 0, "zero", 1.3),
        "varpro_f2": _cfg(80, 5, 1e-8, 1.0, 0, "zero", 1.3, 15),
    },
    "var_helmholtz": {
        "nllsq": _cfg(80, 2, 1e-8, 1.0, 1, "zero", 1.5),
        "varpro_f1": _cfg(80, 2, 1e-8, 0.01, 1, "zero", 1.5),
    },
}


def datafit_theta0(tables, method):
    """Start from the beta best fitting the alpha-independent rows
    (boundary, continuity, measurement), with alpha at zero.  Selects the
    right basin on problems with oscillatory cost landscapes."""
    from .linalg import min_norm_lstsq
    beta0 = min_norm_lstsq(tables.b_lin, tables.rhs_lin,
                           rcond=tables.rcond).x
    if method == "nllsq":
        return np.concatenate([np.zeros(tables.n_alpha_cols), beta0])
    if method == "varpro_f1":
        return beta0
    raise InvalidInputError("theta0 mode 'datafit' needs a beta-valued unknown")


def default_pcfg(benchmark, method, dim, rng, tables=None):
    """PerturbConfig (and Newton settings) for a benchmark/solver pair."""
    try:
        cfg = DEFAULTS[benchmark][method]
    except KeyError:
        raise InvalidInputError(
            f"no default settings for {benchmark!r}/{method!r}") from None
    if cfg["theta0"] == "datafit":
        if tables is None:
            raise InvalidInputError(
                "datafit initial guess needs assembled tables")
        theta0 = datafit_theta0(tables, method)
    else:
        theta0 = resolve_theta0(cfg["theta0"], dim, cfg["delta"], rng)
    pcfg = PerturbConfig(delta=cfg["delta"], eta=cfg["eta"],
                         epsilon=cfg["epsilon"],
                         max_nllsq_iterations=cfg["max_nllsq_iterations"],
                         max_sub_iterations=cfg["max_sub_iterations"],
                         theta0=theta0)
    newton = None
    if cfg["max_newton"]:
        newton = NewtonConfig(max_iterations=cfg["max_newton"])
    return pcfg, newton
