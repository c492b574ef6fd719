import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from langevin_msa.errors import InvalidArgumentError, UnsupportedOperationError
from langevin_msa.potentials import (
    PotentialModel,
    estimate_G,
    make_f1,
    make_f2,
    make_quadratic,
    parse_potential,
    two_scale_quadratic,
)


def fd_gradient(f, x, eps=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        g[i] = (f(x + e) - f(x - e)) / (2 * eps)
    return g


def fd_laplacian(p, x, eps=1e-4):
    # divergence of the gradient by central differences
    total = 0.0
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        total += (p.gradient(x + e)[i] - p.gradient(x - e)[i]) / (2 * eps)
    return total


POTENTIALS = [make_quadratic([1.0, 4.0, 2.5]), make_f1(3), make_f1(7), make_f2(1), make_f2(16)]


def test_quadratic_examples():
    q = make_quadratic([1.0, 1.0])
    assert np.array_equal(q.gradient(np.zeros(2)), np.zeros(2))
    q = make_quadratic([1.0, 4.0])
    assert np.allclose(q.gradient(np.array([1.0, 1.0])), [1.0, 4.0])
    assert (q.m, q.L, q.kappa) == (1.0, 4.0, 4.0)
    assert q.G == 0.0
    assert q.stationary_second_moment == pytest.approx(1.25)


def test_two_scale_layout():
    q = two_scale_quadratic(3, m=1.0, L=4.0)
    assert q.d == 6
    assert np.array_equal(q.curvatures, [1, 1, 1, 4, 4, 4])


def test_f1_examples():
    assert np.allclose(make_f1(2).gradient(np.zeros(2)), [0.5, 0.5])
    x = np.array([-3.0, 0.2, 5.0])
    assert np.allclose(make_f1(1).gradient(x[:1]), x[:1] + 1)
    g = make_f1(3).gradient(np.array([1000.0, 0.0, 0.0]))
    assert np.all(np.isfinite(g))
    assert np.allclose(g, [1001.0, 0.0, 0.0])
    p = make_f1(10)
    assert (p.m, p.L) == (1.0, 2.0)


def test_f2_examples():
    for d in (1, 5, 16):
        assert np.array_equal(make_f2(d).gradient(np.zeros(d)), np.zeros(d))
    assert make_f2(1).gradient(np.array([math.pi / 2]))[0] == pytest.approx(math.pi / 2 + 0.5)
    p = make_f2(16)
    assert (p.m, p.L) == (0.5, 1.5)


def test_f2_hessian_diagonal_formula():
    p = make_f2(16)
    rng = np.random.default_rng(1)
    x = rng.normal(size=16) * 2
    c = 16 ** 0.25
    eps = 1e-5
    for i in range(16):
        e = np.zeros(16)
        e[i] = eps
        h_ii = (p.gradient(x + e)[i] - p.gradient(x - e)[i]) / (2 * eps)
        assert h_ii == pytest.approx(1 + 0.5 * math.cos(c * x[i]), abs=1e-6)


@pytest.mark.parametrize("p", POTENTIALS, ids=lambda p: p.name)
def test_gradient_matches_finite_differences(p):
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.normal(size=p.d) * 3
        fd = fd_gradient(p.value, x)
        g = p.gradient(x)
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-6 * (1 + np.abs(g).max()))


@pytest.mark.parametrize("p", POTENTIALS, ids=lambda p: p.name)
def test_grad_laplacian_matches_finite_differences(p):
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = rng.normal(size=p.d)
        fd = fd_gradient(lambda y: fd_laplacian(p, y), x, eps=1e-3)
        assert np.allclose(p.grad_laplacian(x), fd, atol=2e-4)


@settings(max_examples=100, deadline=None)
@given(
    which=st.sampled_from(range(len(POTENTIALS))),
    seed=st.integers(0, 2 ** 32 - 1),
    scale=st.floats(0.1, 10.0),
)
def test_curvature_envelope(which, seed, scale):
    p = POTENTIALS[which]
    rng = np.random.default_rng(seed)
    x = rng.normal(size=p.d) * scale
    v = rng.normal(size=p.d)
    v /= np.linalg.norm(v)
    eps = 1e-3
    second = (p.value(x + eps * v) - 2 * p.value(x) + p.value(x - eps * v)) / eps ** 2
    tol = 1e-4 * (1 + abs(p.value(x)))
    assert p.m - tol <= second <= p.L + tol


def test_batched_evaluation_matches_rows():
    p = make_f1(4)
    X = np.random.default_rng(3).normal(size=(5, 4))
    assert np.allclose(p.gradient(X), np.stack([p.gradient(r) for r in X]))
    assert np.allclose(p.value(X), [p.value(r) for r in X])


def test_f1_stationary_mean_by_quadrature():
    # E_mu x_1 for d=2 by direct integration of exp(-f1)
    p = make_f1(2)
    dens = lambda y, x: math.exp(-p.value(np.array([x, y])))
    lim = 9.0
    Z = integrate.dblquad(dens, -lim, lim, -lim, lim, epsabs=1e-10)[0]
    m1 = integrate.dblquad(lambda y, x: x * dens(y, x), -lim, lim, -lim, lim, epsabs=1e-10)[0] / Z
    assert m1 == pytest.approx(-0.5, abs=1e-7)
    assert np.allclose(p.stationary_mean, -0.5)


def test_f2_stationary_mean_is_zero():
    assert np.array_equal(make_f2(6).stationary_mean, np.zeros(6))


def test_estimate_G_quadratic_is_zero():
    assert estimate_G(make_quadratic([1.0, 3.0]), 5.0, 100) == 0.0


def test_estimate_G_f2_one_dimension_against_grid_scan():
    # |grad Lap f2| = |sin x| / 2 in 1D; scan the ratio on a fine grid
    xs = np.linspace(-10, 10, 400001)
    truth = np.max(0.5 * np.abs(np.sin(xs)) / (1 + np.abs(xs)))
    est = estimate_G(make_f2(1), 10.0, 200000, rng_seed=4)
    assert est <= truth * (1 + 1e-9)
    assert est == pytest.approx(truth, rel=1e-3)


def test_estimate_G_f2_grows_with_d_below_analytic_bound():
    g4 = estimate_G(make_f2(4), 3.0, 20000, rng_seed=0)
    g16 = estimate_G(make_f2(16), 3.0, 20000, rng_seed=0)
    assert g4 < g16 <= 16 ** 0.75 / 2


def test_estimate_G_is_deterministic():
    p = make_f1(5)
    assert estimate_G(p, 4.0, 1000, 7) == estimate_G(p, 4.0, 1000, 7)


def test_estimate_G_needs_grad_laplacian():
    p = PotentialModel("bare", 1, 1.0, 1.0, gradient=lambda x: x)
    with pytest.raises(UnsupportedOperationError):
        estimate_G(p, 1.0, 10)


def test_model_validation():
    with pytest.raises(InvalidArgumentError):
        PotentialModel("bad", 1, 2.0, 1.0, gradient=lambda x: x)
    with pytest.raises(InvalidArgumentError):
        make_quadratic([1.0, -1.0])
    with pytest.raises(InvalidArgumentError):
        make_f1(0)


def test_parse_potential_forms():
    assert parse_potential("f1(10)").d == 10
    assert parse_potential("f2", d=3).name == "f2(3)"
    assert np.array_equal(parse_potential("quadratic(1,4,9)").curvatures, [1, 4, 9])
    assert np.array_equal(parse_potential("quadratic(2)", d=3).curvatures, [2, 2, 2])
    assert parse_potential("quadratic(m=1,L=4,d=16)").d == 32
    assert parse_potential("quadratic(m=1,L=8)", d=2).L == 8.0
    for bad in ("gauss(1)", "f1", "quadratic(m=1,q=2,d=1)", "((("):
        with pytest.raises(InvalidArgumentError):
            parse_potential(bad)
