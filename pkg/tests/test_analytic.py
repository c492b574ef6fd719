import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langevin_msa.analytic import (
    DiagonalGaussian,
    exact_mixing_time,
    lmc_iterate_law,
    lmc_stationary_law,
    stationary_law,
    w2_diag,
    w2_trajectory,
)
from langevin_msa.errors import InvalidArgumentError, NotReachedError, StabilityError
from langevin_msa.potentials import make_quadratic, two_scale_quadratic


def ar1(lam, h, k, mu0, v0):
    m, v = mu0, v0
    for _ in range(k):
        m, v = (1 - lam * h) * m, (1 - lam * h) ** 2 * v + 2 * h
    return m, v


@settings(max_examples=100, deadline=None)
@given(
    lam=st.floats(0.1, 10.0),
    frac=st.floats(0.01, 0.99),
    k=st.integers(0, 300),
    mu0=st.floats(-5, 5),
    v0=st.floats(0, 3),
)
def test_iterate_law_matches_recursion(lam, frac, k, mu0, v0):
    h = frac * 2 / lam
    law = lmc_iterate_law([lam], h, k, DiagonalGaussian([mu0], [v0]))
    m, v = ar1(lam, h, k, mu0, v0)
    assert law.means[0] == pytest.approx(m, rel=1e-9, abs=1e-12)
    assert law.variances[0] == pytest.approx(v, rel=1e-9, abs=1e-12)


def test_iterate_law_examples():
    law = lmc_iterate_law([1.0], 0.1, 0, [3.0])
    assert law.means[0] == 3.0 and law.variances[0] == 0.0
    law = lmc_iterate_law([1.0], 0.1, 10, [1.0])
    assert law.means[0] == pytest.approx(0.3486784401, abs=1e-10)
    assert law.variances[0] == pytest.approx(0.9246561, abs=1e-7)
    law = lmc_iterate_law([1.0], 0.1, 10 ** 4, [1.0])
    assert law.variances[0] == pytest.approx(2 / 1.9, rel=1e-12)


def test_iterate_law_rejects_unstable_step():
    with pytest.raises(StabilityError):
        lmc_iterate_law([1.0, 4.0], 0.5, 1, [0.0, 0.0])


def test_stationary_laws():
    assert np.array_equal(stationary_law([1.0]).variances, [1.0])
    q = two_scale_quadratic(1)
    assert np.array_equal(stationary_law(q).variances, [1.0, 0.25])
    assert stationary_law([2.0, 2.0]).second_moment == pytest.approx(1.0)


def test_chain_variance_bias_monotone_in_h():
    lam = np.array([1.0, 4.0])
    hs = np.geomspace(1e-4, 0.49, 30)
    v = np.array([lmc_stationary_law(lam, h).variances for h in hs])
    assert np.all(v > 1 / lam)
    assert np.all(np.diff(v, axis=0) > 0)
    assert np.allclose(v[0], 1 / lam, rtol=1e-3)


def test_w2_examples():
    g = DiagonalGaussian([0.0], [1.0])
    assert w2_diag(g, g) == 0.0
    assert w2_diag(g, DiagonalGaussian([1.0], [4.0])) == pytest.approx(math.sqrt(2))


def test_w2_against_sorted_sample_coupling():
    # in 1D the monotone coupling of sorted samples is optimal
    rng = np.random.default_rng(0)
    n = 10 ** 6
    a = np.sort(0.3 + 1.5 * rng.standard_normal(n))
    b = np.sort(-0.4 + 0.7 * rng.standard_normal(n))
    empirical = math.sqrt(np.mean((a - b) ** 2))
    exact = w2_diag(DiagonalGaussian([0.3], [2.25]), DiagonalGaussian([-0.4], [0.49]))
    assert empirical == pytest.approx(exact, rel=5e-3)


laws = st.builds(
    lambda m, v: DiagonalGaussian(np.array(m), np.array(v)),
    st.lists(st.floats(-10, 10), min_size=3, max_size=3),
    st.lists(st.floats(0, 10), min_size=3, max_size=3),
)


@settings(max_examples=100, deadline=None)
@given(laws, laws, laws)
def test_w2_is_a_metric(a, b, c):
    assert w2_diag(a, b) == pytest.approx(w2_diag(b, a))
    assert w2_diag(a, c) <= w2_diag(a, b) + w2_diag(b, c) + 1e-9
    assert w2_diag(a, b) >= 0


def test_w2_dimension_mismatch():
    with pytest.raises(InvalidArgumentError):
        w2_diag(DiagonalGaussian([0.0], [1.0]), DiagonalGaussian([0.0, 0.0], [1.0, 1.0]))


def test_two_block_w2_display():
    # W2^2 = d(1-mh)^{2k} + d(sqrt(v_m,k) - 1)^2 + d(1-Lh)^{2k} + d(sqrt(v_L,k) - 1/sqrt(L))^2
    d, L, h = 5, 4.0, 0.05
    q = two_scale_quadratic(d, 1.0, L)
    ks = np.array([0, 1, 7, 40, 300])
    got = w2_trajectory(q, h, ks, np.ones(2 * d))
    for k, w in zip(ks, got):
        terms = 0.0
        for lam in (1.0, L):
            r = 1 - lam * h
            var = 2 / (lam * (2 - lam * h)) * (1 - r ** (2 * k))
            terms += d * r ** (2 * k) + d * (math.sqrt(var) - 1 / math.sqrt(lam)) ** 2
        assert w == pytest.approx(math.sqrt(terms), rel=1e-12)


def brute_mixing(lam, x0, eps, grid, cap=20000):
    best = None
    for h in sorted(grid):
        for k in range(cap + 1):
            if w2_diag(lmc_iterate_law(lam, h, k, x0), stationary_law(lam)) <= eps:
                if best is None or k <= best[0]:
                    best = (k, h)
                break
    return best


@pytest.mark.parametrize("eps", [0.3, 0.8, 1.5])
def test_mixing_time_against_linear_scan(eps):
    lam = np.array([1.0, 4.0])
    grid = [0.05, 0.1, 0.2, 0.3, 0.45]
    x0 = np.array([1.0, 1.0])
    mt = exact_mixing_time(lam, x0, eps, grid)
    assert (mt.k, mt.h) == brute_mixing(lam, x0, eps, grid)


def test_mixing_time_trivial_cases():
    assert exact_mixing_time([1.0], [1.0], 2.0, [0.1]).k == 0
    q = make_quadratic([1.0, 4.0])
    assert exact_mixing_time(q, stationary_law(q), 1e-3, [0.1]).k == 0


def test_mixing_time_not_reached():
    # chain bias at h=0.9 exceeds eps forever
    with pytest.raises(NotReachedError):
        exact_mixing_time([1.0], [3.0], 0.05, [0.9])


def test_mixing_time_ties_go_to_larger_step():
    mt = exact_mixing_time([1.0], [1.0], 2.0, [0.1, 0.2, 0.3])
    assert mt.k == 0 and mt.h == 0.3


def test_mixing_time_at_least_lower_bound():
    q = two_scale_quadratic(16)
    mt = exact_mixing_time(q, np.ones(32), 0.2)
    assert mt.k >= 2.5 * math.log(20)


def test_mixing_grid_must_be_stable():
    with pytest.raises(StabilityError):
        exact_mixing_time([1.0, 4.0], [1.0, 1.0], 0.1, [0.1, 0.5])
