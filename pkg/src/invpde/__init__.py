"""Inverse parametric PDE problems with randomized local bases.

The package solves inverse problems of the form

    sum_i alpha_i L_i(u) + F(u) = f,   Bu = g,   u(xi) = S(xi),

on decomposed rectangular domains.  Each subdomain carries a random-weight
feed-forward basis whose output coefficients are trained together with the
unknown parameters alpha by full nonlinear least squares or by one of two
variable-projection formulations.
"""

from .bench import (ErrorReport, RunConfig, compute_errors, run_single,
                    run_sweep, write_csv)
from .elm_basis import Architecture, Jets, eval_basis_jets, init_hidden
from .exceptions import (InvalidInputError, NumericFailureError,
                         UnsupportedOperationError)
from .geometry import DomainSpec, build_discretization
from .linalg import LstsqSolution, min_norm_lstsq
from .problem import (BENCHMARK_NAMES, BoundaryRow, InverseProblem, NoiseSpec,
                      OperatorKernel, apply_noise, make_benchmark)
from .assembly import SystemTables
from .solvers import (InverseSolution, NewtonConfig, solve, solve_nllsq,
                      solve_varpro_f1, solve_varpro_f2)
from .trsolver import (NllsqProblem, PerturbConfig, SolveOutcome,
                       TrustRegionConfig, nllsq_perturb, trust_region_solve)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
