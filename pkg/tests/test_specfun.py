import mpmath
import numpy as np
import pytest
import scipy.special as sp
from hypothesis import given, settings, strategies as st

from nodaltube.specfun import (SERIES_RADIUS, BesselDomainError, bessel01_real, bessel_j,
                               bessel_j_prime, bessel_root, bessel_y, hankel1)


def test_real_axis_matches_scipy():
    x = np.linspace(0.05, 60.0, 2001)
    j0, y0, j1, y1 = bessel01_real(x)
    for got, ref in ((j0, sp.j0(x)), (y0, sp.y0(x)), (j1, sp.j1(x)), (y1, sp.y1(x))):
        assert np.max(np.abs(got - ref)) < 5e-12


@pytest.mark.parametrize("order", [0, 1])
def test_hankel_complex_against_mpmath(order):
    rng = np.random.default_rng(3)
    z = rng.uniform(0.2, 40.0, 60) + 1j * rng.uniform(-2.0, 2.0, 60)
    got = hankel1(order, z)
    ref = np.array([complex(mpmath.hankel1(order, complex(v))) for v in z])
    assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-10


@pytest.mark.parametrize("order", [0, 1])
def test_regime_crossover_is_continuous(order):
    for theta in (0.0, 0.05, 0.12, 0.17):
        z = SERIES_RADIUS * np.array([1 - 1e-13, 1 + 1e-13]) * np.exp(1j * theta)
        v = hankel1(order, z)
        assert abs(v[0] - v[1]) < 1e-10 * abs(v[0])


def test_hankel_rejects_left_half_plane():
    with pytest.raises(BesselDomainError):
        hankel1(0, np.array([-1.0 + 0.5j]))
    with pytest.raises(BesselDomainError):
        hankel1(2, 1.0)


@settings(max_examples=60, deadline=None)
@given(m=st.integers(0, 200), x=st.floats(0.0, 250.0))
def test_bessel_j_integer_order(m, x):
    ref = sp.jv(m, x)
    assert abs(bessel_j(m, x) - ref) < 1e-12 + 1e-10 * abs(ref)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 60), x=st.floats(1.0, 120.0))
def test_three_term_recurrence(m, x):
    lhs = bessel_j(m - 1, x) + bessel_j(m + 1, x)
    assert abs(lhs - 2 * m / x * bessel_j(m, x)) < 1e-12


def test_wronskian():
    x = np.linspace(0.1, 80, 500)
    j0, y0, j1, y1 = bessel01_real(x)
    assert np.max(np.abs(j1 * y0 - j0 * y1 - 2 / (np.pi * x))) < 5e-13


def test_bessel_y_scalar_and_array():
    assert bessel_y(0, 2.5) == pytest.approx(sp.y0(2.5), abs=1e-14)
    assert np.allclose(bessel_y(1, [1.0, 3.0]), sp.y1([1.0, 3.0]), atol=1e-14)


def test_j_prime_matches_scipy():
    x = np.linspace(0.5, 50, 100)
    for m in (0, 1, 7, 30):
        assert np.max(np.abs(bessel_j_prime(m, x) - sp.jvp(m, x))) < 1e-12


@pytest.mark.parametrize("m", [0, 1, 5, 20, 80])
def test_roots_against_scipy(m):
    zj = sp.jn_zeros(m, 6)
    zp = sp.jnp_zeros(m, 6)
    for n in range(1, 7):
        assert bessel_root(m, n, "J") == pytest.approx(zj[n - 1], abs=1e-10)
        assert bessel_root(m, n, "J'") == pytest.approx(zp[n - 1], abs=1e-10)


def test_root_frozen_values():
    # first zeros from a 30-digit mpmath Newton run
    assert bessel_root(0, 1) == pytest.approx(2.404825557695773, abs=1e-13)
    assert bessel_root(1, 1) == pytest.approx(3.831705970207512, abs=1e-13)
    assert bessel_root(1, 1, "J'") == pytest.approx(1.841183781340659, abs=1e-13)


def test_root_argument_validation():
    with pytest.raises(ValueError):
        bessel_root(1, 0)
    with pytest.raises(ValueError):
        bessel_root(1, 1, "Y")
    with pytest.raises(BesselDomainError):
        bessel_j(201, 1.0)
