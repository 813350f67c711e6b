"""Benchmark driving: configuration, error metrics, and parameter sweeps.

Errors follow the usual manufactured-solution conventions: parameter errors
are relative component-wise, field errors are evaluated on a uniform
``q_eval`` x ``q_eval`` grid per subdomain and normalized by the RMS of the
exact field over the same grid.
"""

import itertools
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from .elm_basis import Architecture, eval_basis_values, init_hidden
from .exceptions import InvalidInputError, NumericFailureError
from .geometry import build_discretization
from .problem import BENCHMARK_NAMES, NoiseSpec, make_benchmark
from .solvers import (DEFAULTS, SOLVER_CHOICES, InverseSolution, NewtonConfig,
                      PerturbConfig, datafit_theta0, resolve_theta0, solve)
from .assembly import SystemTables


@dataclass
class RunConfig:
    """One benchmark run; every field has a sensible default except the
    benchmark name."""

    benchmark: str
    solver: str = "nllsq"
    n_sub: Tuple[int, int] = (1, 1)
    q: Tuple[int, int] = (20, 20)
    q_s: int = 100
    m: int = 400
    hidden: Optional[Tuple[int, ...]] = None   # hidden widths; default (m,)
    r_m: Optional[float] = None                # default per benchmark/solver
    activation: str = "gaussian"
    identical_basis: bool = False
    lam_mea: float = 1.0
    lam_alpha: float = 0.0
    lam_beta: float = 0.0
    noise_level: float = 0.0
    seed_basis: int = 0
    seed_noise: int = 0
    seed_measurement: int = 0
    seed_solver: int = 0
    q_eval: int = 101
    rcond: float = 1e-12
    # inner least-squares driver ("qr" or "svd"); None picks per benchmark
    lstsq_driver: Optional[str] = None
    # solver-parameter overrides; None means benchmark default
    delta: Optional[float] = None
    eta: Optional[float] = None
    epsilon: Optional[float] = None
    max_nllsq_iterations: Optional[int] = None
    max_sub_iterations: Optional[int] = None
    theta0: Optional[str] = None
    max_newton: Optional[int] = None

    def __post_init__(self):
        if self.benchmark not in BENCHMARK_NAMES:
            raise InvalidInputError(
                f"unknown benchmark {self.benchmark!r}; "
                f"known: {', '.join(BENCHMARK_NAMES)}")
        if self.solver not in SOLVER_CHOICES:
            raise InvalidInputError(
                f"unknown solver {self.solver!r}; known: "
                f"{', '.join(SOLVER_CHOICES)}")
        if self.q_s < 0:
            raise InvalidInputError("q_s must be non-negative")
        if self.m < 1:
            raise InvalidInputError("m must be positive")
        if self.q_eval < 2:
            raise InvalidInputError("q_eval must be at least 2")
        if self.noise_level < 0:
            raise InvalidInputError("noise_level must be non-negative")
        if self.lstsq_driver not in (None, "qr", "svd"):
            raise InvalidInputError(
                f"unknown lstsq driver {self.lstsq_driver!r}")
        if self.lam_mea < 0 or self.lam_alpha < 0 or self.lam_beta < 0:
            raise InvalidInputError("weights must be non-negative")
        if self.r_m is not None and self.r_m <= 0:
            raise InvalidInputError("r_m must be positive")


@dataclass
class ErrorReport:
    e_alpha: np.ndarray
    linf_u: float
    l2_u: float
    linf_gamma: Optional[float] = None
    l2_gamma: Optional[float] = None


def _eval_grids(problem, disc, q_eval):
    """Uniform q_eval x q_eval points per subdomain, (N, q_eval^2, 2)."""
    (a1, b1), (a2, b2) = problem.domain.bounds
    n1, n2 = problem.domain.n_sub
    x_edges = np.linspace(a1, b1, n1 + 1)
    y_edges = np.linspace(a2, b2, n2 + 1)
    grids = np.empty((problem.domain.n_subdomains, q_eval * q_eval, 2))
    for i in range(n1):
        for j in range(n2):
            e = problem.domain.subdomain_index(i, j)
            xs = np.linspace(x_edges[i], x_edges[i + 1], q_eval)
            ys = np.linspace(y_edges[j], y_edges[j + 1], q_eval)
            xv, yv = np.meshgrid(xs, ys, indexing="ij")
            grids[e, :, 0] = xv.ravel()
            grids[e, :, 1] = yv.ravel()
    return grids


def _field_errors(num, exact):
    err = num - exact
    rms = np.sqrt(np.mean(exact ** 2))
    return float(np.max(np.abs(err)) / rms), \
        float(np.sqrt(np.mean(err ** 2)) / rms)


def compute_errors(tables, solution, q_eval=101):
    """Relative parameter and field errors of an InverseSolution."""
    problem, disc = tables.problem, tables.disc
    grids = _eval_grids(problem, disc, q_eval)
    n, m = tables.n_sub, tables.m
    beta = solution.beta.reshape(n, m)
    phi_vals = [eval_basis_values(tables.bases[e], grids[e])
                for e in range(n)]
    u_num = np.stack([phi_vals[e] @ beta[e] for e in range(n)])
    u_ex = problem.exact_values(grids[..., 0], grids[..., 1])
    linf_u, l2_u = _field_errors(u_num, u_ex)

    if problem.mode == "field":
        a = solution.alpha.reshape(n, m)
        g_num = np.stack([phi_vals[e] @ a[e] for e in range(n)])
        g_ex = problem.gamma_ex(grids[..., 0], grids[..., 1])
        linf_g, l2_g = _field_errors(g_num, g_ex)
        return ErrorReport(e_alpha=np.array([]), linf_u=linf_u, l2_u=l2_u,
                           linf_gamma=linf_g, l2_gamma=l2_g)

    e_alpha = np.abs(solution.alpha - problem.alpha_ex) \
        / np.abs(problem.alpha_ex)
    return ErrorReport(e_alpha=e_alpha, linf_u=linf_u, l2_u=l2_u)


def build_tables(cfg):
    """Assemble SystemTables (grids, bases, data) for a RunConfig."""
    problem = make_benchmark(cfg.benchmark, n_sub=cfg.n_sub)
    disc = build_discretization(
        problem.domain, cfg.q, cfg.q_s,
        np.random.default_rng([cfg.seed_measurement]))
    hidden = cfg.hidden or (cfg.m,)
    arch = Architecture(layers=(2, *hidden, 1))
    r_m = cfg.r_m
    if r_m is None:
        r_m = DEFAULTS.get(cfg.benchmark, {}).get(
            cfg.solver, {"r_m": 1.0})["r_m"]
    bases = [init_hidden(arch, r_m, cfg.seed_basis, subdomain=e,
                         identical=cfg.identical_basis,
                         activation=cfg.activation,
                         bounds=problem.domain.subdomain_bounds(e))
             for e in range(disc.n_subdomains)]
    noise = NoiseSpec(level=cfg.noise_level, seed=cfg.seed_noise) \
        if cfg.noise_level else None
    driver = cfg.lstsq_driver
    if driver is None:
        # the advection beta-elimination landscape is conditioning-limited;
        # exact singular-value truncation keeps its behavior, everything
        # else takes the faster factorization
        driver = "svd" if (cfg.benchmark == "advection"
                           and cfg.solver == "varpro_f2") else "qr"
    return SystemTables(problem, disc, bases, lam_mea=cfg.lam_mea,
                        lam_alpha=cfg.lam_alpha, lam_beta=cfg.lam_beta,
                        noise=noise, rcond=cfg.rcond, lstsq_driver=driver)


def _solver_settings(cfg, tables, rng):
    defaults = DEFAULTS.get(cfg.benchmark, {}).get(cfg.solver)
    if defaults is None:
        defaults = {"delta": 1.0, "eta": 1, "epsilon": 1e-8,
                    "max_nllsq_iterations": 80, "max_sub_iterations": 2,
                    "theta0": "zero", "max_newton": None}
    get = lambda key: getattr(cfg, key) if getattr(cfg, key) is not None \
        else defaults[key]
    if cfg.solver == "nllsq":
        dim = tables.n_alpha_cols + tables.n_beta_cols
    elif cfg.solver == "varpro_f1":
        dim = tables.n_beta_cols
    else:
        dim = tables.n_alpha_cols
    delta = get("delta")
    mode = get("theta0")
    if mode == "datafit":
        theta0 = datafit_theta0(tables, cfg.solver)
    else:
        theta0 = resolve_theta0(mode, dim, delta, rng)
    pcfg = PerturbConfig(
        delta=delta, eta=get("eta"), epsilon=get("epsilon"),
        max_nllsq_iterations=get("max_nllsq_iterations"),
        max_sub_iterations=get("max_sub_iterations"), theta0=theta0)
    max_newton = get("max_newton")
    newton = NewtonConfig(max_iterations=max_newton) if max_newton else None
    return pcfg, newton


def run_single(cfg):
    """Run one configuration; returns a flat result dict (one CSV row)."""
    t0 = time.perf_counter()
    tables = build_tables(cfg)
    rng = np.random.default_rng([cfg.seed_solver])
    pcfg, newton = _solver_settings(cfg, tables, rng)
    try:
        sol = solve(tables, cfg.solver, pcfg, rng, newton=newton)
        report = compute_errors(tables, sol, q_eval=cfg.q_eval)
        status = "ok"
    except NumericFailureError as exc:
        sol = InverseSolution(alpha=np.full(tables.n_alpha_cols, np.nan),
                              beta=np.full(tables.n_beta_cols, np.nan),
                              cost=np.nan, nfev=0, n_restarts=0,
                              converged=False)
        report = ErrorReport(
            e_alpha=np.full(len(tables.problem.alpha_ex), np.nan),
            linf_u=np.nan, l2_u=np.nan)
        status = f"failed: {exc}"
    elapsed = time.perf_counter() - t0

    row = {
        "status": status,
        "benchmark": cfg.benchmark, "solver": cfg.solver,
        "n_sub_x": cfg.n_sub[0], "n_sub_y": cfg.n_sub[1],
        "q1": tables.disc.q1, "q2": tables.disc.q2, "q_s": cfg.q_s,
        "m": cfg.m, "r_m": cfg.r_m if cfg.r_m is not None else
        DEFAULTS.get(cfg.benchmark, {}).get(cfg.solver, {"r_m": 1.0})["r_m"],
        "lam_mea": cfg.lam_mea, "noise_level": cfg.noise_level,
        "seed_basis": cfg.seed_basis, "seed_noise": cfg.seed_noise,
        "seed_measurement": cfg.seed_measurement,
        "seed_solver": cfg.seed_solver,
        "cost": sol.cost, "nfev": sol.nfev, "n_restarts": sol.n_restarts,
        "newton_iterations": sol.newton_iterations,
        "converged": int(sol.converged),
        "linf_u": report.linf_u, "l2_u": report.l2_u,
        "linf_gamma": report.linf_gamma, "l2_gamma": report.l2_gamma,
        "walltime_s": elapsed,
    }
    for i, (a, err) in enumerate(zip(
            np.atleast_1d(sol.alpha)[:len(report.e_alpha)], report.e_alpha)):
        row[f"alpha{i + 1}"] = a
        row[f"e_alpha{i + 1}"] = err
    return row


def expand_sweep(cfg, sweep):
    """Cartesian expansion of {field: [values]} over a base RunConfig."""
    if not sweep:
        return [cfg]
    keys = sorted(sweep)
    out = []
    for combo in itertools.product(*(sweep[k] for k in keys)):
        out.append(replace(cfg, **dict(zip(keys, combo))))
    return out


def run_sweep(cfg, sweep=None, parallel=False):
    """Run a config (optionally swept over parameter lists); returns rows."""
    configs = expand_sweep(cfg, sweep)
    if parallel and len(configs) > 1:
        import concurrent.futures
        with concurrent.futures.ProcessPoolExecutor() as ex:
            return list(ex.map(run_single, configs))
    return [run_single(c) for c in configs]


CSV_COLUMNS = [
    "status", "benchmark", "solver","n_sub_x", "n_sub_y", "q1", "q2", "q_s", "m",
    "r_m", "lam_mea", "noise_level", "seed_basis", "seed_noise",
    "seed_measurement", "seed_solver",
    "alpha1", "alpha2", "alpha3", "e_alpha1", "e_alpha2", "e_alpha3",
    "linf_u", "l2_u", "linf_gamma", "l2_gamma",
    "cost", "nfev", "n_restarts", "newton_iterations", "converged",
    "walltime_s",
]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".15g")
    return str(value)


def write_csv(rows, path):
    """Write result rows with a fixed header and 15-significant-digit
    floating-point formatting."""
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c)) for c in CSV_COLUMNS) + "\n")
