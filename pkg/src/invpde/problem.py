"""Inverse-problem definitions: operator kernels, boundary rows, benchmarks.

A problem has the normalized form

    sum_i alpha_i L_i(u) + F(u) = f   on the domain,
    (boundary rows)                    on edges/interfaces,
    u(xi) = S(xi)                      at measurement points,

with unknown parameters alpha and unknown field u.  Each L_i and F is an
``OperatorKernel``: a pointwise map of the second-order jet of u (value,
u_x, u_y, u_xx, u_yy) whose Gateaux derivative is again a pointwise linear
functional of the perturbation's jet, returned as coefficient arrays.

The bundled benchmarks carry manufactured exact solutions; the source term
and boundary data are generated from the exact jets, so the exact (alpha, u)
satisfies the equations to machine precision by construction.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .elm_basis import Jets
from .exceptions import InvalidInputError
from .geometry import DomainSpec

JET_NAMES = ("val", "dx", "dy", "dxx", "dyy")


@dataclass
class JetCoeffs:
    """Coefficients of a pointwise linear functional of a jet:
    c_val * v + c_dx * v_x + c_dy * v_y + c_dxx * v_xx + c_dyy * v_yy.
    Entries may be scalars or arrays broadcastable against the jet."""

    val: float = 0.0
    dx: float = 0.0
    dy: float = 0.0
    dxx: float = 0.0
    dyy: float = 0.0

    def apply(self, jets):
        out = None
        for name in JET_NAMES:
            c = getattr(self, name)
            if np.ndim(c) == 0 and c == 0.0:
                continue
            term = c * getattr(jets, name)
            out = term if out is None else out + term
        if out is None:
            out = np.zeros_like(jets.val)
        return out


@dataclass
class OperatorKernel:
    """Pointwise operator term with its directional derivative.

    eval(jets)           -> array of operator values
    gateaux_coeffs(jets) -> JetCoeffs of the derivative at jets; for linear
                            kernels the coefficients are state-independent
                            and jets may be None.
    """

    eval_fn: Callable[[Jets], np.ndarray]
    gateaux_fn: Callable[[Optional[Jets]], JetCoeffs]
    is_linear: bool = False
    name: str = ""

    def eval(self, jets):
        return self.eval_fn(jets)

    def gateaux_coeffs(self, jets=None):
        return self.gateaux_fn(jets)

    def gateaux(self, jets, pert):
        """Apply the Gateaux derivative at ``jets`` to perturbation jets."""
        return self.gateaux_coeffs(jets).apply(pert)


def linear_kernel(name="", **coeffs):
    """Kernel for a constant-coefficient linear differential term."""
    c = JetCoeffs(**coeffs)
    return OperatorKernel(eval_fn=lambda jets: c.apply(jets),
                          gateaux_fn=lambda jets=None: c,
                          is_linear=True, name=name)


@dataclass
class BoundaryRow:
    """One linear constraint row: sum of coeff * (jet component of u at a
    collocation point of a subdomain) equals rhs.  ``terms`` entries are
    (subdomain e, point p, jet component name, coefficient)."""

    terms: List[Tuple[int, int, str, float]]
    rhs: float


@dataclass
class MeasurementRow:
    subdomain: int
    point: int
    value: float


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative uniform noise: S = u_ex * (1 + level * zeta) with
    zeta ~ U[-1, 1] i.i.d. per measurement point."""

    level: float
    seed: int = 0


def apply_noise(values, noise):
    if noise is None or noise.level == 0.0:
        return np.array(values, dtype=float, copy=True)
    rng = np.random.default_rng([int(noise.seed)])
    zeta = rng.uniform(-1.0, 1.0, size=np.shape(values))
    return np.asarray(values, dtype=float) * (1.0 + noise.level * zeta)


@dataclass
class InverseProblem:
    """A benchmark instance, independent of any discretization."""

    name: str
    domain: DomainSpec
    kernels: List[OperatorKernel]
    f_kernel: OperatorKernel
    alpha_ex: np.ndarray
    exact_jets: Callable[[np.ndarray, np.ndarray], Jets]
    bc_builder: Callable  # (problem, disc) -> four lists of BoundaryRow
    mode: str = "scalar"            # "scalar" or "field"
    field_kernel: Optional[OperatorKernel] = None
    gamma_ex: Optional[Callable] = None

    @property
    def n_alpha(self):
        return len(self.alpha_ex)

    def source(self, x, y):
        """Manufactured source f at (x, y) from the exact solution."""
        jets = self.exact_jets(x, y)
        out = self.f_kernel.eval(jets)
        if self.mode == "field":
            out = out + self.gamma_ex(x, y) * self.field_kernel.eval(jets)
        else:
            for a, ker in zip(self.alpha_ex, self.kernels):
                out = out + a * ker.eval(jets)
        return out

    def exact_values(self, x, y):
        return self.exact_jets(x, y).val


# ---------------------------------------------------------------------------
# manufactured solutions

def _separable_jets(fx, fy):
    """Jets of u(x, y) = X(x) * Y(y) given (X, X', X'') and (Y, Y', Y'')."""
    X, dX, ddX = fx
    Y, dY, ddY = fy

    def jets(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        vx, vy = X(x), Y(y)
        return Jets(val=vx * vy, dx=dX(x) * vy, dy=vx * dY(y),
                    dxx=ddX(x) * vy, dyy=vx * ddY(y))
    return jets


def _sin_pi_sq():
    # s(t) = sin(pi t^2)
    return (lambda t: np.sin(np.pi * t * t),
            lambda t: 2 * np.pi * t * np.cos(np.pi * t * t),
            lambda t: 2 * np.pi * np.cos(np.pi * t * t)
            - 4 * np.pi ** 2 * t * t * np.sin(np.pi * t * t))


def _cos_pi_sq():
    return (lambda t: np.cos(np.pi * t * t),
            lambda t: -2 * np.pi * t * np.sin(np.pi * t * t),
            lambda t: -2 * np.pi * np.sin(np.pi * t * t)
            - 4 * np.pi ** 2 * t * t * np.cos(np.pi * t * t))


def _two_cos(a1, w1, p1, a2, w2, p2):
    # g(t) = a1 cos(w1 t + p1) + a2 cos(w2 t + p2)
    return (lambda t: a1 * np.cos(w1 * t + p1) + a2 * np.cos(w2 * t + p2),
            lambda t: -a1 * w1 * np.sin(w1 * t + p1)
            - a2 * w2 * np.sin(w2 * t + p2),
            lambda t: -a1 * w1 ** 2 * np.cos(w1 * t + p1)
            - a2 * w2 ** 2 * np.cos(w2 * t + p2))


def _sin_cos_mix():
    # g(t) = 2.5 sin(pi t - 2pi/5) + 1.5 cos(2pi t + 3pi/10)
    p1, p2 = -2 * np.pi / 5, 3 * np.pi / 10
    return (lambda t: 2.5 * np.sin(np.pi * t + p1)
            + 1.5 * np.cos(2 * np.pi * t + p2),
            lambda t: 2.5 * np.pi * np.cos(np.pi * t + p1)
            - 3.0 * np.pi * np.sin(2 * np.pi * t + p2),
            lambda t: -2.5 * np.pi ** 2 * np.sin(np.pi * t + p1)
            - 6.0 * np.pi ** 2 * np.cos(2 * np.pi * t + p2))


def _ramped(fx):
    """(1 + t/20) * g(t) given the jets of g."""
    g, dg, ddg = fx
    return (lambda t: (1 + t / 20) * g(t),
            lambda t: g(t) / 20 + (1 + t / 20) * dg(t),
            lambda t: dg(t) / 10 + (1 + t / 20) * ddg(t))


def _advection_jets(x, y):
    # u = 10 sinh(sin(w)/10), w = (2 pi / 3)(x + 3 t - 5/2); y plays t
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = (2 * np.pi / 3) * (x + 3 * y - 2.5)
    s, c = np.sin(w), np.cos(w)
    sh, ch = np.sinh(s / 10), np.cosh(s / 10)
    g1 = ch * c                  # du/dw
    g2 = sh * c * c / 10 - ch * s  # d2u/dw2
    wx, wy = 2 * np.pi / 3, 2 * np.pi
    return Jets(val=10 * sh, dx=g1 * wx, dy=g1 * wy,
                dxx=g2 * wx * wx, dyy=g2 * wy * wy)


# ---------------------------------------------------------------------------
# boundary-row builders

def _edge_coords(disc, edge, e, p):
    return disc.colloc[e, p]


def _dirichlet_rows(problem, disc, edges=(0, 1, 2, 3)):
    """Value rows u = u_ex on the listed outer edges."""
    blocks = [[], [], [], []]
    for edge in edges:
        for (e, p) in disc.bc[edge]:
            x, y = disc.colloc[e, p]
            g = float(problem.exact_jets(x, y).val)
            blocks[edge].append(BoundaryRow(terms=[(e, p, "val", 1.0)], rhs=g))
    return blocks


def _advection_rows(problem, disc):
    """Periodic trace pairing u(left) - u(right) = 0 plus an initial
    condition u(x, 0) = u_ex; no condition on the final-time edge."""
    blocks = [[], [], [], []]
    left, right = disc.bc[0], disc.bc[1]
    for (el, pl), (er, pr) in zip(left, right):
        blocks[0].append(BoundaryRow(
            terms=[(el, pl, "val", 1.0), (er, pr, "val", -1.0)], rhs=0.0))
    for (e, p) in disc.bc[2]:
        x, y = disc.colloc[e, p]
        blocks[2].append(BoundaryRow(
            terms=[(e, p, "val", 1.0)],
            rhs=float(problem.exact_jets(x, y).val)))
    return blocks


def _inflow_rows(problem, disc):
    """Dirichlet on left/right edges plus an initial condition at the
    bottom edge (first order in time: nothing on the top edge)."""
    blocks = _dirichlet_rows(problem, disc, edges=(0, 1, 2))
    return blocks


def _wave_rows(problem, disc):
    """Dirichlet on left/right, value and velocity initial conditions at
    t = 0 (the velocity rows occupy the fourth block)."""
    blocks = _dirichlet_rows(problem, disc, edges=(0, 1, 2))
    for (e, p) in disc.bc[2]:
        x, y = disc.colloc[e, p]
        h2 = float(problem.exact_jets(x, y).dy)
        blocks[3].append(BoundaryRow(terms=[(e, p, "dy", 1.0)], rhs=h2))
    return blocks


# ---------------------------------------------------------------------------
# benchmark registry

def _poisson(n_sub):
    return InverseProblem(
        name="poisson",
        domain=DomainSpec(bounds=((0.0, 1.4), (0.0, 1.4)), n_sub=n_sub,
                          cont_order=(1, 1)),
        kernels=[linear_kernel("u_yy", dyy=1.0)],
        f_kernel=linear_kernel("u_xx", dxx=1.0),
        alpha_ex=np.array([1.0]),
        exact_jets=_separable_jets(_sin_pi_sq(), _sin_pi_sq()),
        bc_builder=_dirichlet_rows)


def _advection(n_sub):
    return InverseProblem(
        name="advection",
        domain=DomainSpec(bounds=((0.0, 3.0), (0.0, 1.0)), n_sub=n_sub,
                          cont_order=(0, 0)),
        kernels=[linear_kernel("-u_x", dx=-1.0)],
        f_kernel=linear_kernel("u_t", dy=1.0),
        alpha_ex=np.array([3.0]),
        exact_jets=_advection_jets,
        bc_builder=_advection_rows)


def _helmholtz(n_sub):
    cos2 = OperatorKernel(
        eval_fn=lambda jets: np.cos(2.0 * jets.val),
        gateaux_fn=lambda jets: JetCoeffs(val=-2.0 * np.sin(2.0 * jets.val)),
        is_linear=False, name="cos(2u)")
    return InverseProblem(
        name="helmholtz",
        domain=DomainSpec(bounds=((0.0, 1.4), (0.0, 1.4)), n_sub=n_sub,
                          cont_order=(1, 1)),
        kernels=[linear_kernel("-u", val=-1.0), cos2],
        f_kernel=linear_kernel("laplace", dxx=1.0, dyy=1.0),
        alpha_ex=np.array([100.0, 5.0]),
        exact_jets=_separable_jets(_cos_pi_sq(), _cos_pi_sq()),
        bc_builder=_dirichlet_rows)


def _burgers(n_sub):
    uux = OperatorKernel(
        eval_fn=lambda jets: jets.val * jets.dx,
        gateaux_fn=lambda jets: JetCoeffs(val=jets.dx, dx=jets.val),
        is_linear=False, name="u u_x")
    two_cos = _two_cos(1.5, np.pi, 7 * np.pi / 20, 1.35, 2 * np.pi,
                       -3 * np.pi / 5)
    return InverseProblem(
        name="burgers",
        domain=DomainSpec(bounds=((0.0, 2.0), (0.0, 1.5)), n_sub=n_sub,
                          cont_order=(1, 0)),
        kernels=[uux, linear_kernel("-u_xx", dxx=-1.0)],
        f_kernel=linear_kernel("u_t", dy=1.0),
        alpha_ex=np.array([0.1, 0.01]),
        exact_jets=_separable_jets(_ramped(two_cos), _ramped(two_cos)),
        bc_builder=_inflow_rows)


def _sine_gordan(n_sub):
    sin_u = OperatorKernel(
        eval_fn=lambda jets: np.sin(jets.val),
        gateaux_fn=lambda jets: JetCoeffs(val=np.cos(jets.val)),
        is_linear=False, name="sin(u)")
    two_cos = _two_cos(2.5, np.pi, -2 * np.pi / 5, 1.5, 2 * np.pi,
                       3 * np.pi / 10)
    return InverseProblem(
        name="sine_gordan",
        domain=DomainSpec(bounds=((0.0, 1.0), (0.0, 1.0)), n_sub=n_sub,
                          cont_order=(1, 1)),
        kernels=[linear_kernel("-u_xx", dxx=-1.0),
                 linear_kernel("u", val=1.0), sin_u],
        f_kernel=linear_kernel("u_tt", dyy=1.0),
        alpha_ex=np.array([1.0, 1.0, 1.0]),
        exact_jets=_separable_jets(two_cos, two_cos),
        bc_builder=_wave_rows)


def _var_helmholtz(n_sub):
    def gamma_ex(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return 100.0 * (1.0 + 0.25 * np.sin(2 * np.pi * x)
                        + 0.25 * np.sin(2 * np.pi * y))
    return InverseProblem(
        name="var_helmholtz",
        domain=DomainSpec(bounds=((0.0, 1.5), (0.0, 1.5)), n_sub=n_sub,
                          cont_order=(1, 1)),
        kernels=[],
        f_kernel=linear_kernel("laplace", dxx=1.0, dyy=1.0),
        alpha_ex=np.array([]),
        exact_jets=_separable_jets(_sin_cos_mix(), _sin_cos_mix()),
        bc_builder=_dirichlet_rows,
        mode="field",
        field_kernel=linear_kernel("-u", val=-1.0),
        gamma_ex=gamma_ex)


_REGISTRY = {
    "poisson": _poisson,
    "advection": _advection,
    "helmholtz": _helmholtz,
    "burgers": _burgers,
    "sine_gordan": _sine_gordan,
    "var_helmholtz": _var_helmholtz,
}

BENCHMARK_NAMES = tuple(sorted(_REGISTRY))


def make_benchmark(name, n_sub=(1, 1)):
    """Construct a bundled benchmark problem by name."""
    try:
        builder = _REGISTRY[name]
    except KeyError:
        raise InvalidInputError(
            f"unknown benchmark {name!r}; known: {', '.join(BENCHMARK_NAMES)}"
        ) from None
    return builder(tuple(n_sub))
