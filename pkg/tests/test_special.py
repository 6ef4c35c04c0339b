import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extremal_spectra.special import (
    BesselZeroError,
    bessel_j,
    bessel_j_orders,
    bessel_j_prime,
    bessel_prime_zeros,
    bessel_zeros,
    mcmahon_guess,
    zeros_for_orders,
)

from oracles import bisect_zeros, first_zeros, series_j, series_j_prime


def test_values_at_origin():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    assert bessel_j_prime(0, 0.0) == 0.0
    assert bessel_j_prime(1, 0.0) == 0.5


def test_frozen_zero_locations():
    # frozen from the series/bisection oracle below
    assert abs(bessel_j(0, 2.404825557695773)) < 1e-12
    assert abs(bessel_j_prime(1, 1.841183781340659)) < 1e-12
    assert abs(float(series_j(0, 2.404825557695773))) < 1e-14
    assert abs(float(series_j_prime(1, 1.841183781340659))) < 1e-14


def test_rejects_negative_argument():
    with pytest.raises(ValueError):
        bessel_j(0, -1.0)
    with pytest.raises(ValueError):
        bessel_j_prime(2, np.array([1.0, -0.5]))
    with pytest.raises(ValueError):
        bessel_j(-1, 1.0)


@pytest.mark.parametrize("nu,x", [(0, 0.5), (1, 3.0), (3, 12.0), (10, 9.5), (0, 47.3), (7, 80.0),
                                  (40, 35.0), (25, 100.0), (120, 150.0)])
def test_against_series(nu, x):
    assert bessel_j(nu, x) == pytest.approx(float(series_j(nu, x)), abs=1e-13)
    assert bessel_j_prime(nu, x) == pytest.approx(float(series_j_prime(nu, x)), abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 60), st.floats(0.0, 60.0))
def test_against_series_random(nu, x):
    assert abs(bessel_j(nu, x) - float(series_j(nu, x))) <= 1e-13


def test_large_arguments_match_scipy():
    scipy_special = pytest.importorskip("scipy.special")
    for nu, x in [(0, 1e5), (1, 54321.5), (1000, 1e5), (1000, 1000.0), (300, 2000.0)]:
        assert bessel_j(nu, x) == pytest.approx(float(scipy_special.jv(nu, x)), abs=1e-13)


def test_all_orders_table():
    x = np.array([0.0, 0.1, 5.0, 30.0])
    rows = bessel_j_orders(12, x)
    assert rows.shape == (13, 4)
    for n in (0, 5, 12):
        for i, xi in enumerate(x):
            assert rows[n, i] == pytest.approx(float(series_j(n, xi)), abs=1e-14)


def test_bessel_zeros_examples():
    z = bessel_zeros(0, 20.0)
    assert len(z) == 6
    assert z[0] == pytest.approx(2.404825557695773, abs=1e-12)
    assert len(bessel_zeros(50, 40.0)) == 0
    assert bessel_zeros(1, 4.0).zeros == pytest.approx((3.831705970207512,), abs=1e-12)


def test_bessel_zeros_brute_force_scan():
    # step 1e-3 sign-change scan of J_0 on (0, 20] with bisection
    f = lambda x: float(series_j(0, x))
    grid = np.arange(0.0, 20.0 + 1e-9, 1e-3)
    vals = bessel_j(0, grid)
    cells = np.flatnonzero(vals[:-1] * vals[1:] < 0)
    assert len(cells) == 6
    brute = [bisect_zeros(f, grid[c], grid[c + 1], step=1e-3)[0] for c in cells]
    assert bessel_zeros(0, 20.0).zeros == pytest.approx(brute, abs=1e-12)


def test_prime_zero_examples():
    assert bessel_prime_zeros(0, 4.0).zeros == pytest.approx((3.831705970207512,), abs=1e-12)
    assert len(bessel_prime_zeros(1, 1.0)) == 0
    assert len(bessel_prime_zeros(10, 9.0)) == 0
    first = bessel_prime_zeros(1, 2.0)
    assert first.zeros == pytest.approx((1.841183781340659,), abs=1e-12)
    assert first.kind == "derivative"


def test_prime_zeros_of_order_zero_are_zeros_of_j1():
    a = bessel_prime_zeros(0, 60.0).as_array()
    b = bessel_zeros(1, 60.0).as_array()
    np.testing.assert_allclose(a, b, atol=1e-12)


@pytest.mark.parametrize("nu", [0, 1, 2, 7, 30])
def test_zeros_match_oracle(nu):
    z = bessel_zeros(nu, nu + 45.0).as_array()
    ref = first_zeros(nu, len(z))
    np.testing.assert_allclose(z, ref, atol=1e-12)


def test_bad_inputs():
    with pytest.raises(ValueError):
        bessel_zeros(0, 0.0)
    with pytest.raises(ValueError):
        zeros_for_orders([1], 5.0, kind="second")


def test_failure_is_loud(monkeypatch):
    import extremal_spectra.special as special

    # a scan too coarse to separate zeros must be caught by the staggered check
    monkeypatch.setattr(special, "_SCAN_STEP", 4.0)
    with pytest.raises(BesselZeroError, match="extra sign change"):
        special.zeros_for_orders(range(0, 4), 60.0)


ORDERS = list(range(0, 41))


@pytest.fixture(scope="module")
def zero_table():
    return zeros_for_orders(ORDERS, 120.0), zeros_for_orders(ORDERS, 120.0, "derivative")


def test_interlacing(zero_table):
    fn, _ = zero_table
    for a, b in zip(fn[:-1], fn[1:]):
        za, zb = a.as_array(), b.as_array()
        n = len(zb)
        assert np.all(za[:n] < zb)
        m = min(n, len(za) - 1)
        assert np.all(zb[:m] < za[1 : m + 1])


def test_residuals_and_lower_bound(zero_table):
    fn, dv = zero_table
    for zl in fn:
        z = zl.as_array()
        if z.size:
            assert np.all(z > zl.order)
            assert np.max(np.abs(bessel_j(zl.order, z))) <= 1e-11
            assert np.all(np.diff(z) > 0)
    for zl in dv:
        z = zl.as_array()
        if z.size:
            assert np.all(z > zl.order)
            assert np.max(np.abs(bessel_j_prime(zl.order, z))) <= 1e-11


def test_count_monotone_in_order(zero_table):
    fn, dv = zero_table
    # J'_0 shares its zeros with J_1, so the derivative chain starts at order 1
    for lists in (fn, dv[1:]):
        counts = [len(z) for z in lists]
        assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_mcmahon_consistency(zero_table):
    z = zero_table[0][0].as_array()
    for k in range(2, len(z) + 1):
        centre = (k - 0.25) * math.pi
        assert centre - 0.3 < z[k - 1] < centre + 0.3
    # and the full expansion is accurate for large zeros
    assert mcmahon_guess(0, 30) == pytest.approx(z[29], abs=1e-8)
