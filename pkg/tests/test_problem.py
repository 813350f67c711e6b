"""Benchmark definitions: manufactured consistency, kernels, noise."""

import numpy as np
import pytest

from invpde.elm_basis import Jets
from invpde.exceptions import InvalidInputError
from invpde.problem import (BENCHMARK_NAMES, NoiseSpec, apply_noise,
                            linear_kernel, make_benchmark)


def random_points(problem, n, seed=0):
    rng = np.random.default_rng(seed)
    (a1, b1), (a2, b2) = problem.domain.bounds
    return rng.uniform(a1, b1, n), rng.uniform(a2, b2, n)


@pytest.mark.parametrize("name", BENCHMARK_NAMES)
def test_manufactured_residual_zero(name):
    # applying the operator to the exact solution must reproduce f exactly
    problem = make_benchmark(name)
    x, y = random_points(problem, 50)
    jets = problem.exact_jets(x, y)
    lhs = problem.f_kernel.eval(jets)
    if problem.mode == "field":
        lhs = lhs + problem.gamma_ex(x, y) * problem.field_kernel.eval(jets)
    else:
        for a, ker in zip(problem.alpha_ex, problem.kernels):
            lhs = lhs + a * ker.eval(jets)
    assert np.max(np.abs(lhs - problem.source(x, y))) <= 1e-10


@pytest.mark.parametrize("name", BENCHMARK_NAMES)
def test_exact_jets_match_finite_differences(name):
    problem = make_benchmark(name)
    x, y = random_points(problem, 30, seed=1)
    h = 1e-5
    jets = problem.exact_jets(x, y)
    v = problem.exact_values
    assert np.allclose(jets.dx, (v(x + h, y) - v(x - h, y)) / (2 * h),
                       atol=1e-6 * max(1, np.max(np.abs(jets.dx))))
    assert np.allclose(jets.dy, (v(x, y + h) - v(x, y - h)) / (2 * h),
                       atol=1e-6 * max(1, np.max(np.abs(jets.dy))))
    assert np.allclose(jets.dxx,
                       (v(x + h, y) - 2 * jets.val + v(x - h, y)) / h ** 2,
                       atol=1e-3 * max(1, np.max(np.abs(jets.dxx))))
    assert np.allclose(jets.dyy,
                       (v(x, y + h) - 2 * jets.val + v(x, y - h)) / h ** 2,
                       atol=1e-3 * max(1, np.max(np.abs(jets.dyy))))


@pytest.mark.parametrize("name", BENCHMARK_NAMES)
def test_kernel_gateaux_matches_finite_differences(name):
    problem = make_benchmark(name)
    rng = np.random.default_rng(2)
    x, y = random_points(problem, 20, seed=3)
    u = problem.exact_jets(x, y)
    pert = Jets(*(rng.standard_normal(x.shape) for _ in range(5)))
    eps = 1e-6
    kernels = list(problem.kernels) + [problem.f_kernel]
    if problem.field_kernel is not None:
        kernels.append(problem.field_kernel)
    for ker in kernels:
        up = Jets(*(getattr(u, c) + eps * getattr(pert, c)
                    for c in ("val", "dx", "dy", "dxx", "dyy")))
        um = Jets(*(getattr(u, c) - eps * getattr(pert, c)
                    for c in ("val", "dx", "dy", "dxx", "dyy")))
        fd = (ker.eval(up) - ker.eval(um)) / (2 * eps)
        assert np.allclose(ker.gateaux(u, pert), fd, atol=1e-6), ker.name


def test_linear_kernel_flag_and_coeffs():
    ker = linear_kernel("combo", val=2.0, dxx=-1.0)
    assert ker.is_linear
    jets = Jets(*(np.full(3, v) for v in (1.0, 2.0, 3.0, 4.0, 5.0)))
    assert np.allclose(ker.eval(jets), 2.0 * 1.0 - 4.0)
    c = ker.gateaux_coeffs()
    assert c.val == 2.0 and c.dxx == -1.0


def test_nonlinear_kernels_marked():
    helm = make_benchmark("helmholtz")
    assert helm.kernels[0].is_linear
    assert not helm.kernels[1].is_linear
    burgers = make_benchmark("burgers")
    assert not burgers.kernels[0].is_linear


def test_noise_model():
    vals = np.full(20000, 2.0)
    noisy = apply_noise(vals, NoiseSpec(level=0.1, seed=0))
    rel = noisy / vals - 1.0
    assert np.max(np.abs(rel)) <= 0.1
    assert np.max(np.abs(rel)) > 0.09          # uniform, not gaussian
    assert abs(np.mean(rel)) < 0.01
    # reproducible per seed, different across seeds
    again = apply_noise(vals, NoiseSpec(level=0.1, seed=0))
    other = apply_noise(vals, NoiseSpec(level=0.1, seed=1))
    assert np.array_equal(noisy, again)
    assert not np.array_equal(noisy, other)
    clean = apply_noise(vals, None)
    assert np.array_equal(clean, vals)


def test_make_benchmark_validation():
    with pytest.raises(InvalidInputError):
        make_benchmark("heat")
    for name in BENCHMARK_NAMES:
        p = make_benchmark(name, n_sub=(2, 1))
        assert p.domain.n_sub == (2, 1)


def test_alpha_counts():
    assert make_benchmark("poisson").n_alpha == 1
    assert make_benchmark("helmholtz").n_alpha == 2
    assert make_benchmark("sine_gordan").n_alpha == 3
    assert make_benchmark("var_helmholtz").mode == "field"
