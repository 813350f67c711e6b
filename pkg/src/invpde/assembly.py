"""Discrete system assembly: residuals, Jacobians, and variable projection.

Given a problem, a discretization, and one frozen random basis per
subdomain, ``SystemTables`` precomputes every quantity that does not depend
on the unknowns: basis jets at collocation points, basis values at
measurement points, the (always linear) boundary / measurement / continuity
rows as a dense matrix acting on the stacked output coefficients beta, the
manufactured source values, and the (possibly noisy) measurement data.

The full residual is ordered [pde | bc1..bc4 | mea | ck | reg], states
stacked subdomain-major.  The unknown vector theta is [alpha, beta] with
beta = (beta_1, ..., beta_N) flattened row-major; in field-coefficient mode
alpha is itself a stacked coefficient vector of the same basis.

Variable projection comes in two forms:
  * ``varpro1_system``: eliminate alpha. H(beta) alpha = b(beta), linear in
    alpha for any problem; the reduced Jacobian uses the Kaufman
    approximation J = (I - H H^+)(J0 - db/dbeta).
  * ``varpro2_system``: eliminate beta, valid when every kernel acting on u
    is linear (or has been linearized by ``newton_linearize``).
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from .elm_basis import JET_COMPONENTS, Jets, eval_basis_jets, eval_basis_values
from .exceptions import InvalidInputError, UnsupportedOperationError
from .linalg import min_norm_lstsq
from .problem import JetCoeffs, apply_noise


@dataclass
class ResidualLayout:
    """Row counts of each residual block, in order."""

    n_pde: int
    n_bc: List[int]
    n_mea: int
    n_ck: int
    n_reg_alpha: int
    n_reg_beta: int

    @property
    def total(self):
        return (self.n_pde + sum(self.n_bc) + self.n_mea + self.n_ck
                + self.n_reg_alpha + self.n_reg_beta)


class SystemTables:
    """Precomputed tables and assembly routines for one solver run."""

    def __init__(self, problem, disc, bases, lam_mea=1.0, lam_alpha=0.0,
                 lam_beta=0.0, noise=None, rcond=1e-12, cache=True,
                 lstsq_driver="qr"):
        if len(bases) != disc.n_subdomains:
            raise InvalidInputError("one basis per subdomain required")
        m = bases[0].arch.n_basis
        if any(b.arch.n_basis != m for b in bases):
            raise InvalidInputError("all subdomains must share the basis size")
        self.problem = problem
        self.disc = disc
        self.bases = bases
        self.n_sub = disc.n_subdomains
        self.m = m
        self.q = disc.q
        self.lam_mea = float(lam_mea)
        self.lam_alpha = float(lam_alpha)
        self.lam_beta = float(lam_beta)
        self.rcond = rcond
        # least-squares driver for the variable-projection inner solves;
        # "qr" is much faster, "svd" reproduces exact rcond truncation on
        # marginally conditioned systems
        self.lstsq_driver = lstsq_driver
        self.cache_enabled = cache
        self._jets_cache = None
        self._v1_cache = None

        n, q = self.n_sub, self.q
        # basis jets at collocation points, stacked (N, Q, M)
        comps = {name: np.empty((n, q, m)) for name in JET_COMPONENTS}
        for e in range(n):
            jt = eval_basis_jets(bases[e], disc.colloc[e])
            for name in JET_COMPONENTS:
                comps[name][e] = getattr(jt, name)
        self.phi = Jets(**comps)

        # source and measurement data
        xc, yc = disc.colloc[..., 0], disc.colloc[..., 1]
        self.f = problem.source(xc, yc)
        xm, ym = disc.measurement[..., 0], disc.measurement[..., 1]
        self.s_exact = problem.exact_values(xm, ym)
        self.s_data = apply_noise(self.s_exact, noise)

        # measurement basis values (N, Q_s, M)
        self.mea_vals = np.stack([
            eval_basis_values(bases[e], disc.measurement[e])
            for e in range(n)])

        self._build_linear_rows()

        if problem.mode == "field":
            self.n_alpha_cols = n * m
        else:
            self.n_alpha_cols = problem.n_alpha
        self.n_beta_cols = n * m
        self.layout = ResidualLayout(
            n_pde=n * q,
            n_bc=[len(b) for b in self.bc_blocks],
            n_mea=n * disc.q_s,
            n_ck=self.b_ck.shape[0],
            n_reg_alpha=self.n_alpha_cols if self.lam_alpha > 0 else 0,
            n_reg_beta=self.n_beta_cols if self.lam_beta > 0 else 0)

    # -- construction -----------------------------------------------------

    def _basis_row(self, e, p, comp):
        return self.phi.component(comp)[e, p]

    def _build_linear_rows(self):
        n, m, disc = self.n_sub, self.m, self.disc
        nm = n * m
        self.bc_blocks = self.problem.bc_builder(self.problem, disc)
        if len(self.bc_blocks) != 4:
            raise InvalidInputError("bc builder must return four blocks")

        rows = [r for block in self.bc_blocks for r in block]
        self.b_bc = np.zeros((len(rows), nm))
        self.rhs_bc = np.zeros(len(rows))
        for i, row in enumerate(rows):
            for (e, p, comp, coeff) in row.terms:
                self.b_bc[i, e * m:(e + 1) * m] += \
                    coeff * self._basis_row(e, p, comp)
            self.rhs_bc[i] = row.rhs

        # continuity rows: value match, then normal-derivative match when
        # the continuity order in that direction is 1
        kx, ky = disc.spec.cont_order
        ck_terms = []
        for comp in ["val"] + (["dx"] if kx else []):
            ck_terms.extend((pair, comp) for pair in disc.interfaces_x)
        for comp in ["val"] + (["dy"] if ky else []):
            ck_terms.extend((pair, comp) for pair in disc.interfaces_y)
        self.b_ck = np.zeros((len(ck_terms), nm))
        for i, ((e1, p1, e2, p2), comp) in enumerate(ck_terms):
            self.b_ck[i, e1 * m:(e1 + 1) * m] = self._basis_row(e1, p1, comp)
            self.b_ck[i, e2 * m:(e2 + 1) * m] = -self._basis_row(e2, p2, comp)

        # measurement rows, scaled by lam_mea
        qs = disc.q_s
        self.b_mea = np.zeros((n * qs, nm))
        for e in range(n):
            self.b_mea[e * qs:(e + 1) * qs, e * m:(e + 1) * m] = \
                self.lam_mea * self.mea_vals[e]
        self.rhs_mea = self.lam_mea * self.s_data.ravel()

        self.b_lin = np.vstack([self.b_bc, self.b_mea, self.b_ck])
        self.rhs_lin = np.concatenate(
            [self.rhs_bc, self.rhs_mea, np.zeros(self.b_ck.shape[0])])

    # -- state helpers ----------------------------------------------------

    def split_theta(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        expect = self.n_alpha_cols + self.n_beta_cols
        if theta.shape != (expect,):
            raise InvalidInputError(
                f"theta has shape {theta.shape}, expected ({expect},)")
        alpha = theta[:self.n_alpha_cols]
        beta = theta[self.n_alpha_cols:]
        return alpha, beta

    def u_jets(self, beta):
        """Jets of u at the collocation points, (N, Q) arrays."""
        beta = np.asarray(beta, dtype=np.float64).reshape(self.n_sub, self.m)
        if self.cache_enabled and self._jets_cache is not None:
            key, jets = self._jets_cache
            if key.shape == beta.shape and np.array_equal(key, beta):
                return jets
        jets = Jets(**{
            name: np.einsum("nqm,nm->nq", self.phi.component(name), beta)
            for name in JET_COMPONENTS})
        if self.cache_enabled:
            self._jets_cache = (beta.copy(), jets)
        return jets

    def gamma_values(self, alpha):
        """Field-mode coefficient field at collocation points, (N, Q)."""
        a = np.asarray(alpha, dtype=np.float64).reshape(self.n_sub, self.m)
        return np.einsum("nqm,nm->nq", self.phi.val, a)

    def _coeff_grid(self, coeffs, name):
        c = getattr(coeffs, name)
        if np.ndim(c) == 0:
            return None if c == 0.0 else float(c)
        return c

    def _apply_coeffs_to_basis(self, coeffs, scale=None):
        """Block-diagonal matrix of a pointwise linear-in-u operator applied
        to the basis: rows (e, p), cols (e, q).  ``scale`` multiplies the
        coefficients pointwise (used for field-mode gamma weighting)."""
        n, q, m = self.n_sub, self.q, self.m
        out = np.zeros((n * q, n * m))
        for e in range(n):
            block = None
            for name in JET_COMPONENTS:
                c = self._coeff_grid(coeffs, name)
                if c is None:
                    continue
                ce = c if np.ndim(c) == 0 else c[e][:, None]
                term = ce * self.phi.component(name)[e]
                block = term if block is None else block + term
            if block is None:
                continue
            if scale is not None:
                block = scale[e][:, None] * block
            out[e * q:(e + 1) * q, e * m:(e + 1) * m] = block
        return out

    def _sum_coeffs(self, pieces):
        """Sum of (weight, JetCoeffs) into one JetCoeffs with array entries
        broadcast against the collocation grid where needed."""
        acc = {}
        for weight, coeffs in pieces:
            for name in JET_COMPONENTS:
                c = getattr(coeffs, name)
                if np.ndim(c) == 0 and c == 0.0:
                    continue
                term = weight * np.asarray(c, dtype=float)
                acc[name] = acc.get(name, 0.0) + term
        return JetCoeffs(**acc)

    # -- full system -------------------------------------------------------

    def full_residual(self, theta):
        alpha, beta = self.split_theta(theta)
        u = self.u_jets(beta)
        if self.problem.mode == "field":
            gamma = self.gamma_values(alpha)
            pde = (self.problem.f_kernel.eval(u)
                   + gamma * self.problem.field_kernel.eval(u) - self.f)
        else:
            pde = self.problem.f_kernel.eval(u) - self.f
            for a, ker in zip(alpha, self.problem.kernels):
                pde = pde + a * ker.eval(u)
        parts = [pde.ravel(), self.b_lin @ beta - self.rhs_lin]
        if self.layout.n_reg_alpha:
            parts.append(self.lam_alpha * alpha)
        if self.layout.n_reg_beta:
            parts.append(self.lam_beta * beta)
        return np.concatenate(parts)

    def full_jacobian(self, theta):
        alpha, beta = self.split_theta(theta)
        u = self.u_jets(beta)
        lay = self.layout
        n_lin = self.b_lin.shape[0]
        jac = np.zeros((lay.total, self.n_alpha_cols + self.n_beta_cols))
        n, q, m = self.n_sub, self.q, self.m

        # pde rows, alpha columns
        if self.problem.mode == "field":
            lval = self.problem.field_kernel.eval(u)
            for e in range(n):
                jac[e * q:(e + 1) * q, e * m:(e + 1) * m] = \
                    lval[e][:, None] * self.phi.val[e]
        else:
            for i, ker in enumerate(self.problem.kernels):
                jac[:lay.n_pde, i] = ker.eval(u).ravel()

        # pde rows, beta columns
        if self.problem.mode == "field":
            gamma = self.gamma_values(alpha)
            coeffs = self._sum_coeffs(
                [(1.0, self.problem.f_kernel.gateaux_coeffs(u)),
                 (gamma, self.problem.field_kernel.gateaux_coeffs(u))])
        else:
            pieces = [(1.0, self.problem.f_kernel.gateaux_coeffs(u))]
            pieces += [(a, ker.gateaux_coeffs(u))
                       for a, ker in zip(alpha, self.problem.kernels)]
            coeffs = self._sum_coeffs(pieces)
        jac[:lay.n_pde, self.n_alpha_cols:] = \
            self._apply_coeffs_to_basis(coeffs)

        # linear rows
        jac[lay.n_pde:lay.n_pde + n_lin, self.n_alpha_cols:] = self.b_lin

        # regularization rows
        r0 = lay.n_pde + n_lin
        if lay.n_reg_alpha:
            idx = np.arange(self.n_alpha_cols)
            jac[r0 + idx, idx] = self.lam_alpha
            r0 += lay.n_reg_alpha
        if lay.n_reg_beta:
            idx = np.arange(self.n_beta_cols)
            jac[r0 + idx, self.n_alpha_cols + idx] = self.lam_beta
        return jac

    # -- variable projection, form 1 (alpha eliminated) --------------------

    def varpro1_system(self, beta):
        """Linear system H(beta) alpha = b(beta) plus its minimum-norm
        solution.  Returns (H, b, alpha_ls); results are cached on beta."""
        beta = np.asarray(beta, dtype=np.float64)
        if self.cache_enabled and self._v1_cache is not None:
            key, payload = self._v1_cache
            if np.array_equal(key, beta):
                return payload
        u = self.u_jets(beta)
        lay = self.layout
        n_rows = lay.total
        h = np.zeros((n_rows, self.n_alpha_cols))
        n, q, m = self.n_sub, self.q, self.m
        if self.problem.mode == "field":
            lval = self.problem.field_kernel.eval(u)
            for e in range(n):
                h[e * q:(e + 1) * q, e * m:(e + 1) * m] = \
                    lval[e][:, None] * self.phi.val[e]
        else:
            for i, ker in enumerate(self.problem.kernels):
                h[:lay.n_pde, i] = ker.eval(u).ravel()
        if lay.n_reg_alpha:
            r0 = lay.n_pde + self.b_lin.shape[0]
            idx = np.arange(self.n_alpha_cols)
            h[r0 + idx, idx] = self.lam_alpha

        b = np.zeros(n_rows)
        b[:lay.n_pde] = (self.f - self.problem.f_kernel.eval(u)).ravel()
        n_lin = self.b_lin.shape[0]
        b[lay.n_pde:lay.n_pde + n_lin] = self.rhs_lin - self.b_lin @ beta
        if lay.n_reg_beta:
            b[-self.n_beta_cols:] = -self.lam_beta * beta

        alpha_ls = min_norm_lstsq(h, b, rcond=self.rcond,
                                  driver=self.lstsq_driver).x
        payload = (h, b, alpha_ls)
        if self.cache_enabled:
            self._v1_cache = (beta.copy(), payload)
        return payload

    def varpro1_residual(self, beta):
        h, b, alpha_ls = self.varpro1_system(beta)
        return h @ alpha_ls - b

    def varpro1_reduced_jacobian(self, beta):
        """Kaufman-approximation Jacobian of the reduced residual wrt beta."""
        h, b, alpha_ls = self.varpro1_system(beta)
        u = self.u_jets(np.asarray(beta, dtype=np.float64))
        lay = self.layout
        n_lin = self.b_lin.shape[0]

        # J0 = d(H alpha_ls)/dbeta with alpha_ls frozen: pde rows only
        j0 = np.zeros((lay.total, self.n_beta_cols))
        if self.problem.mode == "field":
            gamma_ls = self.gamma_values(alpha_ls)
            coeffs = self._sum_coeffs(
                [(gamma_ls, self.problem.field_kernel.gateaux_coeffs(u))])
        else:
            coeffs = self._sum_coeffs(
                [(a, ker.gateaux_coeffs(u))
                 for a, ker in zip(alpha_ls, self.problem.kernels)])
        j0[:lay.n_pde] = self._apply_coeffs_to_basis(coeffs)

        # db/dbeta: pde rows -F'(u) phi; linear rows -B; reg-beta rows
        db = np.zeros_like(j0)
        db[:lay.n_pde] = -self._apply_coeffs_to_basis(
            self.problem.f_kernel.gateaux_coeffs(u))
        db[lay.n_pde:lay.n_pde + n_lin] = -self.b_lin
        if lay.n_reg_beta:
            idx = np.arange(self.n_beta_cols)
            db[lay.total - self.n_beta_cols + idx, idx] = -self.lam_beta

        j1 = j0 - db
        k = min_norm_lstsq(h, j1, rcond=self.rcond,
                           driver=self.lstsq_driver).x
        return j1 - h @ k

    # -- variable projection, form 2 (beta eliminated) ---------------------

    def newton_linearize(self, u):
        """Linearize every kernel around the current state u.

        Returns (coeff list, correction list, F coeffs, F correction): for a
        nonlinear kernel K, K(v) ~ K'(u)v - [K'(u)u - K(u)], so the b-vector
        gains the bracketed correction; linear kernels contribute zero."""
        k_coeffs, k_corr = [], []
        for ker in self.problem.kernels:
            c = ker.gateaux_coeffs(None if ker.is_linear else u)
            k_coeffs.append(c)
            if ker.is_linear:
                k_corr.append(None)
            else:
                k_corr.append(c.apply(u) - ker.eval(u))
        fk = self.problem.f_kernel
        f_coeffs = fk.gateaux_coeffs(None if fk.is_linear else u)
        f_corr = None if fk.is_linear else f_coeffs.apply(u) - fk.eval(u)
        return k_coeffs, k_corr, f_coeffs, f_corr

    def _require_scalar_mode(self):
        if self.problem.mode != "scalar":
            raise UnsupportedOperationError(
                "beta-elimination requires scalar inverse parameters")

    def varpro2_system(self, alpha, lin=None):
        """Linear system H(alpha) beta = b(alpha) and its minimum-norm
        solution.  All kernels must be linear unless a linearization from
        ``newton_linearize`` is supplied."""
        self._require_scalar_mode()
        alpha = np.asarray(alpha, dtype=np.float64)
        if lin is None:
            if not all(k.is_linear for k in self.problem.kernels) \
                    or not self.problem.f_kernel.is_linear:
                raise UnsupportedOperationError(
                    "nonlinear kernels need newton_linearize")
            lin = self.newton_linearize(None)
        k_coeffs, k_corr, f_coeffs, f_corr = lin
        lay = self.layout
        n_lin = self.b_lin.shape[0]
        n_rows = lay.n_pde + n_lin + lay.n_reg_beta

        coeffs = self._sum_coeffs(
            [(1.0, f_coeffs)] + list(zip(alpha, k_coeffs)))
        h = np.zeros((n_rows, self.n_beta_cols))
        h[:lay.n_pde] = self._apply_coeffs_to_basis(coeffs)
        h[lay.n_pde:lay.n_pde + n_lin] = self.b_lin
        if lay.n_reg_beta:
            idx = np.arange(self.n_beta_cols)
            h[lay.n_pde + n_lin + idx, idx] = self.lam_beta

        b = np.zeros(n_rows)
        bp = self.f.ravel().copy()
        if f_corr is not None:
            bp += f_corr.ravel()
        for a, corr in zip(alpha, k_corr):
            if corr is not None:
                bp += a * corr.ravel()
        b[:lay.n_pde] = bp
        b[lay.n_pde:lay.n_pde + n_lin] = self.rhs_lin

        beta_ls = min_norm_lstsq(h, b, rcond=self.rcond,
                                  driver=self.lstsq_driver).x
        return h, b, beta_ls

    def varpro2_residual(self, alpha, lin=None):
        h, b, beta_ls = self.varpro2_system(alpha, lin)
        r = h @ beta_ls - b
        if self.layout.n_reg_alpha:
            r = np.concatenate([r, self.lam_alpha * np.asarray(alpha)])
        return r

    def varpro2_reduced_jacobian(self, alpha, lin=None):
        """Kaufman-approximation Jacobian of the beta-reduced residual."""
        self._require_scalar_mode()
        alpha = np.asarray(alpha, dtype=np.float64)
        h, b, beta_ls = self.varpro2_system(alpha, lin)
        if lin is None:
            lin = self.newton_linearize(None)
        k_coeffs, k_corr, _, _ = lin
        u_ls = self.u_jets(beta_ls)
        lay = self.layout

        j0 = np.zeros((h.shape[0], self.n_alpha_cols))
        for i, (c, corr) in enumerate(zip(k_coeffs, k_corr)):
            col = c.apply(u_ls)
            if corr is not None:
                col = col - corr
            j0[:lay.n_pde, i] = col.ravel()
        k = min_norm_lstsq(h, j0, rcond=self.rcond,
                           driver=self.lstsq_driver).x
        jred = j0 - h @ k
        if lay.n_reg_alpha:
            tail = self.lam_alpha * np.eye(self.n_alpha_cols)
            jred = np.vstack([jred, tail])
        return jred
