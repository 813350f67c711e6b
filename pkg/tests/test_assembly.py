"""Residual/Jacobian assembly and the two variable-projection reductions."""

import numpy as np
import pytest

from invpde.assembly import SystemTables
from invpde.bench import RunConfig, build_tables
from invpde.exceptions import UnsupportedOperationError
from invpde.problem import BENCHMARK_NAMES, make_benchmark


def small_tables(name, **kw):
    cfg = RunConfig(benchmark=name, q=kw.pop("q", (6, 6)),
                    q_s=kw.pop("q_s", 10), m=kw.pop("m", 40),
                    r_m=kw.pop("r_m", 1.0), **kw)
    return build_tables(cfg)


def fd_jacobian(fun, theta, h=1e-6):
    theta = np.asarray(theta, dtype=float)
    cols = []
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        cols.append((fun(theta + e) - fun(theta - e)) / (2 * h))
    return np.column_stack(cols)


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))


@pytest.mark.parametrize("name", BENCHMARK_NAMES)
def test_full_jacobian_matches_fd(name):
    t = small_tables(name)
    rng = np.random.default_rng(0)
    dim = t.n_alpha_cols + t.n_beta_cols
    for _ in range(3):
        theta = rng.uniform(-0.5, 0.5, dim)
        assert rel_err(t.full_jacobian(theta),
                       fd_jacobian(t.full_residual, theta)) <= 1e-5


def test_layout_counts_dirichlet():
    # for a full-Dirichlet problem every collocation point on the outer
    # boundary contributes one row: N_bc = 2 N1 Q1 + 2 N2 Q2 counted
    # per subdomain-edge block
    t = small_tables("poisson", n_sub=(2, 2))
    lay = t.layout
    n, q = t.disc.n_subdomains, t.disc.q
    assert lay.n_pde == n * q
    assert sum(lay.n_bc) == 2 * 2 * t.disc.q1 + 2 * 2 * t.disc.q2
    assert lay.n_mea == n * t.disc.q_s
    assert lay.n_ck == t.disc.n_continuity_rows()
    assert lay.total == t.b_lin.shape[0] + lay.n_pde
    assert lay.total == len(t.full_residual(np.zeros(
        t.n_alpha_cols + t.n_beta_cols)))


def solved_poisson():
    """A converged small Poisson solve, shared near-optimum fixture."""
    from invpde.solvers import solve
    from invpde.trsolver import PerturbConfig
    t = small_tables("poisson", m=300, q=(15, 15), q_s=80, r_m=3.0)
    sol = solve(t, "nllsq",
                PerturbConfig(theta0=np.zeros(t.n_alpha_cols + t.n_beta_cols),
                              epsilon=1e-12, max_sub_iterations=1),
                np.random.default_rng(0))
    assert sol.cost < 1e-8
    return t, sol


def test_exact_alpha_residual_small_at_optimum():
    # with a well-trained beta the residual at the exact alpha is pure
    # basis-approximation error, orders below the data scale
    t, sol = solved_poisson()
    r = t.full_residual(np.concatenate([t.problem.alpha_ex, sol.beta]))
    assert np.max(np.abs(r)) < 1e-4


def test_varpro1_residual_identity():
    # reduced residual at beta equals the full residual at (alpha_ls, beta)
    t = small_tables("helmholtz")
    rng = np.random.default_rng(1)
    beta = rng.standard_normal(t.n_beta_cols) * 0.1
    _, _, alpha_ls = t.varpro1_system(beta)
    full = t.full_residual(np.concatenate([np.atleast_1d(alpha_ls), beta]))
    assert np.max(np.abs(t.varpro1_residual(beta) - full)) <= 1e-13


def test_varpro2_residual_identity():
    t = small_tables("poisson")
    rng = np.random.default_rng(2)
    alpha = rng.standard_normal(t.n_alpha_cols)
    h, b, beta_ls = t.varpro2_system(alpha)
    # the reduced residual is H beta_ls - b up to row ordering shared with
    # the full residual at (alpha, beta_ls)
    red = t.varpro2_residual(alpha)
    assert np.max(np.abs(red - (h @ beta_ls - b))) <= 1e-13
    full = t.full_residual(np.concatenate([alpha, beta_ls]))
    scale = max(1.0, float(np.linalg.norm(full)))
    assert abs(np.linalg.norm(red) - np.linalg.norm(full)) <= 1e-13 * scale


def test_varpro_reduced_jacobians_match_fd_near_optimum():
    # the term dropped from the exact projector derivative scales with the
    # residual, so FD agreement is asserted near the minimizer; columns of
    # the (large) beta Jacobian are sampled
    t, sol = solved_poisson()
    beta = sol.beta
    jac = t.varpro1_reduced_jacobian(beta)
    h = 1e-7
    for i in range(0, beta.size, 30):
        e = np.zeros_like(beta)
        e[i] = h
        col = (t.varpro1_residual(beta + e)
               - t.varpro1_residual(beta - e)) / (2 * h)
        assert rel_err(jac[:, i], col) <= 1e-4

    # for the alpha-reduction the dropped term is amplified by the
    # conditioning of the basis block, so the tolerance is looser
    alpha = sol.alpha.copy()
    jac2 = t.varpro2_reduced_jacobian(alpha)
    fd2 = fd_jacobian(t.varpro2_residual, alpha, h=1e-7)
    assert rel_err(jac2, fd2) <= 1e-2


def test_newton_linearization_consistency():
    # linearized kernels agree with the nonlinear ones to first order
    t = small_tables("helmholtz")
    rng = np.random.default_rng(3)
    beta = rng.standard_normal(t.n_beta_cols) * 0.05
    u = t.u_jets(beta)
    k_coeffs, k_corr, f_coeffs, f_corr = t.newton_linearize(u)
    for ker, c, corr in zip(t.problem.kernels, k_coeffs, k_corr):
        lin = c.apply(u) - (corr if corr is not None else 0.0)
        assert np.allclose(lin, ker.eval(u), atol=1e-12)


def test_field_mode_columns_and_gamma():
    t = small_tables("var_helmholtz", q_s=20)
    n, m = t.disc.n_subdomains, t.bases[0].arch.n_basis
    assert t.n_alpha_cols == n * m
    rng = np.random.default_rng(4)
    alpha = rng.standard_normal(t.n_alpha_cols)
    gam = t.gamma_values(alpha)
    assert gam.shape == (n, t.disc.q)
    theta = np.concatenate([alpha, rng.standard_normal(t.n_beta_cols)])
    assert rel_err(t.full_jacobian(theta),
                   fd_jacobian(t.full_residual, theta)) <= 1e-5


def test_varpro2_rejects_field_mode():
    t = small_tables("var_helmholtz", q_s=20)
    with pytest.raises(UnsupportedOperationError):
        t.varpro2_system(np.zeros(t.n_alpha_cols))


def test_measurement_scaling():
    t1 = small_tables("poisson")
    t2 = small_tables("poisson", lam_mea=0.5)
    lay = t1.layout
    lo = lay.n_pde + sum(lay.n_bc)
    theta = np.zeros(t1.n_alpha_cols + t1.n_beta_cols)
    r1 = t1.full_residual(theta)[lo:lo + lay.n_mea]
    r2 = t2.full_residual(theta)[lo:lo + lay.n_mea]
    assert np.allclose(r2, 0.5 * r1, atol=1e-14)
