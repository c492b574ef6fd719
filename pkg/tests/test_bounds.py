import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from langevin_msa.analytic import lmc_iterate_law, stationary_law, w2_diag, w2_trajectory
from langevin_msa.bounds import (
    ConstantsLedger,
    c_lmc,
    global_constant,
    h1_threshold,
    lmc_ledger,
    mixing_lower,
    mixing_upper,
    mixing_upper_step,
    w2_upper,
)
from langevin_msa.errors import InvalidArgumentError, OutOfCertifiedRangeError
from langevin_msa.potentials import make_f1, make_f2, make_quadratic, two_scale_quadratic


def ledger(**kw):
    base = dict(beta=1.0, C0=0.5, C1=1.0, C2=2.0, p1=2.0, p2=1.5, h0=1.0, Usq=0.0)
    base.update(kw)
    return ConstantsLedger(**base)


def test_h1_examples():
    assert h1_threshold(ledger()) == 0.25
    assert h1_threshold(ledger(D2=4 * math.sqrt(2))) == pytest.approx(0.03125)
    p = make_f1(10).with_G(1.0)
    assert lmc_ledger(p, 0.0, 10.0).h1 == pytest.approx(1 / 16)


def test_global_constant_examples():
    assert global_constant(ledger(C1=0.0, C2=0.0)) == 0.0
    assert global_constant(ledger()) == pytest.approx(8.0)


def test_c_lmc_examples():
    assert c_lmc(1, 1, 0, 1, 0) == pytest.approx(10 * math.sqrt(3))
    assert c_lmc(1, 2, 0, 10, 0) == pytest.approx(40 * math.sqrt(21))
    ratio = c_lmc(1, 2, 0, 4 * 10 ** 8, 1) / c_lmc(1, 2, 0, 10 ** 8, 1)
    assert ratio == pytest.approx(2, rel=1e-6)


def test_c_lmc_monotone():
    base = dict(m=0.5, L=2.0, G=1.0, d=4, Ex0sq=1.0)
    for key, step in (("L", 0.5), ("G", 0.5), ("d", 3), ("Ex0sq", 0.5)):
        vals = [c_lmc(**{**base, key: base[key] + i * step}) for i in range(5)]
        assert np.all(np.diff(vals) > 0), key
    vals = [c_lmc(**{**base, "m": m}) for m in (0.2, 0.5, 1.0, 1.5, 2.0)]
    assert np.all(np.diff(vals) < 0)


def test_lmc_ledger_fields():
    q = make_quadratic([1.0, 1.0])
    led = lmc_ledger(q, 0.0)
    assert (led.beta, led.h0, led.C0, led.D1, led.D2) == (1.0, 0.25, 0.5, 0.0, 0.0)
    assert led.C <= led.C_LMC
    with pytest.raises(InvalidArgumentError):
        lmc_ledger(make_f2(3), 0.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        lmc_ledger(make_f2(3).with_G(1.0), 0.0)


@settings(max_examples=100, deadline=None)
@given(
    m=st.floats(0.1, 5), ratio=st.floats(1, 20), G=st.floats(0, 50),
    d=st.integers(1, 1000), ex0=st.floats(0, 100), emu=st.floats(0, 100),
)
def test_global_constant_never_exceeds_c_lmc(m, ratio, G, d, ex0, emu):
    q = make_quadratic([m] + [m * ratio] * (d > 1)).with_G(G)
    led = lmc_ledger(q, ex0, emu)
    assert led.C <= led.C_LMC * (1 + 1e-12)


def test_w2_upper_examples():
    led = lmc_ledger(make_quadratic([1.0, 4.0]), 2.0)
    h = 1 / 64
    assert w2_upper(0, h, 3.0, led) == pytest.approx(3.0 + led.C_LMC * h ** 1)
    assert w2_upper(10 ** 6, h, 3.0, led) == pytest.approx(led.C_LMC * h)
    with pytest.raises(OutOfCertifiedRangeError):
        w2_upper(1, 1 / 32, 3.0, led)


def test_w2_upper_dominates_exact_single_block():
    q = two_scale_quadratic(1)
    x0 = np.ones(2)
    led = lmc_ledger(q, 2.0)
    h = led.h1
    W0 = w2_diag(lmc_iterate_law(q, h, 0, x0), stationary_law(q))
    exact = w2_diag(lmc_iterate_law(q, h, 100, x0), stationary_law(q))
    assert exact <= w2_upper(100, h, W0, led)


@pytest.mark.parametrize("d", [1, 3, 10])
def test_soundness_on_grid(d):
    q = two_scale_quadratic(d)
    x0 = np.ones(2 * d)
    led = lmc_ledger(q, float(2 * d))
    ks = np.arange(0, 5001, 7)
    for h in led.h1 * np.array([1.0, 0.5, 0.1, 0.01]):
        W0 = w2_trajectory(q, h, [0], x0)[0]
        for constant in ("lmc", "global"):
            assert np.all(w2_trajectory(q, h, ks, x0) <= w2_upper(ks, h, W0, led, constant))


def test_mixing_upper_examples():
    led = ledger(h0=1.0, C2=0.0, C1=0.0).complete()
    led = ConstantsLedger(**{**led.__dict__, "C": 1.0, "h1": 0.25})
    assert mixing_upper(1.0, math.e / 2, led) == 4
    assert mixing_upper(1.0, 0.5, led) == 0
    q = two_scale_quadratic(4)
    led = lmc_ledger(q, 8.0)
    eps, W0 = 0.01, 3.0
    expected = math.ceil(2 * led.C_LMC / (q.m * eps) * math.log(2 * W0 / eps))
    assert mixing_upper(eps, W0, led) == expected


@pytest.mark.parametrize("eps", [0.05, 0.2, 1.0])
def test_mixing_upper_is_consistent_with_w2_upper(eps):
    q = two_scale_quadratic(4)
    x0 = np.ones(8)
    led = lmc_ledger(q, 8.0)
    W0 = w2_trajectory(q, 0.01, [0], x0)[0]
    k = mixing_upper(eps, W0, led)
    h = mixing_upper_step(eps, led)
    assert w2_upper(k, h, W0, led) <= eps * (1 + 1e-12)


def test_mixing_lower_examples():
    assert mixing_lower(100, 0.1) == pytest.approx(12.5 * math.log(100))
    assert mixing_lower(100, 0.1) == pytest.approx(57.565, abs=1e-3)
    assert mixing_lower(16, 0.2) == pytest.approx(7.489, abs=1e-3)
    assert mixing_lower(16, 4.0) == 0.0
    assert mixing_lower(16, 9.0) == 0.0


def test_ledger_validation():
    with pytest.raises(InvalidArgumentError):
        ledger(p2=0.5)
    with pytest.raises(InvalidArgumentError):
        ledger(p1=1.5, p2=1.5)
    with pytest.raises(InvalidArgumentError):
        ledger(kappa_A=0.5)
