"""Bessel and Hankel functions for the boundary-integral and continuation code.

Orders 0 and 1 are evaluated for real or complex arguments in the right
half-plane: ascending series inside ``|z| <= SERIES_RADIUS`` and the Hankel
large-argument expansion outside.  Integer orders ``m`` of ``J_m`` on the
real axis use Miller's downward recurrence.
"""

from __future__ import annotations

from functools import lru_cache
import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061
SERIES_RADIUS = 12.0
MAX_ORDER = 200

_SERIES_TERMS = 48
_ASYMPTOTIC_TERMS = 40
_HARMONIC = np.concatenate(([0.0], np.cumsum(1.0 / np.arange(1, _SERIES_TERMS + 3))))


class BesselDomainError(ValueError):
    """Argument outside the half-plane or order range served by this module."""


def _series_terms(zmax):
    """Number of ascending-series terms so that the tail is below double precision."""
    q = 0.25 * zmax * zmax
    term, k = 1.0, 0
    while k < _SERIES_TERMS - 1:
        k += 1
        term *= q / (k * k)
        if term < 1e-17 and k > q ** 0.5:
            break
    return k + 1


def _forward_sum(w, n, order):
    """Sums ``sum_k a_k w^k`` and ``sum_k b_k a_k w^k`` term by term (in place)."""
    term = np.ones_like(w)
    plain = np.ones_like(w)
    tmp = np.empty_like(w)
    if order == 0:
        weighted = np.zeros_like(w)
    else:
        weighted = np.full_like(w, _HARMONIC[0] + _HARMONIC[1])
    for k in range(1, n):
        term *= w
        term *= 1.0 / (k * (k + order))
        plain += term
        hk = _HARMONIC[k] if order == 0 else _HARMONIC[k] + _HARMONIC[k + 1]
        np.multiply(term, hk, out=tmp)
        weighted += tmp
    return plain, weighted


def _series01(z, orders=(0, 1)):
    """J0, Y0, J1, Y1 from the ascending series in ``w = -z^2/4`` (no branch checks).

    Orders not requested are returned as ``None``.
    """
    n = _series_terms(float(np.max(np.abs(z)))) if z.size else 1
    w = -0.25 * z * z
    half = 0.5 * z
    lg = np.log(half) + EULER_GAMMA
    j0 = y0 = j1 = y1 = None
    if 0 in orders:
        j0, s0 = _forward_sum(w, n, 0)
        y0 = (2.0 / np.pi) * (lg * j0 - s0)
    if 1 in orders:
        p1, s1 = _forward_sum(w, n, 1)
        j1 = half * p1
        y1 = (2.0 / np.pi) * lg * j1 - 2.0 / (np.pi * z) - half * s1 / np.pi
    return j0, y0, j1, y1


def _asymptotic_hankel(nu, z):
    """Hankel expansion of H^(1)_nu, truncated at the smallest term."""
    mu = 4.0 * nu * nu
    total = np.ones_like(z, dtype=complex)
    term = np.ones_like(z, dtype=complex)
    active = np.ones(z.shape, dtype=bool)
    prev = np.ones(z.shape)
    for k in range(1, _ASYMPTOTIC_TERMS):
        term = term * (1j * (mu - (2 * k - 1) ** 2) / (8.0 * k)) / z
        mag = np.abs(term)
        active &= mag < prev
        total = np.where(active, total + term, total)
        prev = mag
        if not active.any():
            break
    phase = z - (0.5 * nu + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * z)) * np.exp(1j * phase) * total


def _check_half_plane(z):
    if np.any(np.real(z) <= 0):
        raise BesselDomainError("Hankel evaluation requires Re z > 0")


def hankel1(order: int, z):
    """Hankel function of the first kind ``H^(1)_order(z)`` for ``order`` in {0, 1}."""
    if order not in (0, 1):
        raise BesselDomainError(f"order {order} not supported; use 0 or 1")
    z = np.asarray(z)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    _check_half_plane(z)
    out = np.empty(z.shape, dtype=complex)
    near = np.abs(z) <= SERIES_RADIUS
    if near.any():
        zn = z[near]
        real = not np.iscomplexobj(zn)
        j0, y0, j1, y1 = _series01(zn.astype(float) if real else zn.astype(complex), (order,))
        out[near] = j0 + 1j * y0 if order == 0 else j1 + 1j * y1
    far = ~near
    if far.any():
        out[far] = _asymptotic_hankel(order, z[far].astype(complex))
    return out[0] if scalar else out


def bessel01_real(x):
    """Return ``(J0, Y0, J1, Y1)`` at positive real ``x`` (vectorized)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise BesselDomainError("real evaluation requires x > 0")
    j0 = np.empty_like(x)
    y0 = np.empty_like(x)
    j1 = np.empty_like(x)
    y1 = np.empty_like(x)
    near = x <= SERIES_RADIUS
    if near.any():
        j0[near], y0[near], j1[near], y1[near] = _series01(x[near])
    far = ~near
    if far.any():
        xf = x[far].astype(complex)
        h0 = _asymptotic_hankel(0, xf)
        h1 = _asymptotic_hankel(1, xf)
        j0[far], y0[far], j1[far], y1[far] = h0.real, h0.imag, h1.real, h1.imag
    return j0, y0, j1, y1


def bessel_y(order: int, x):
    """Bessel function of the second kind for ``order`` in {0, 1} and ``x > 0``."""
    if order not in (0, 1):
        raise BesselDomainError(f"order {order} not supported; use 0 or 1")
    _, y0, _, y1 = bessel01_real(np.atleast_1d(x))
    out = y0 if order == 0 else y1
    return out[0] if np.ndim(x) == 0 else out


def _j_small(m, x):
    """Power series for J_m on 0 <= x <= 1, with the prefactor formed in logs."""
    w = -0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 30):
        term = term * w / (k * (k + m))
        total = total + term
    with np.errstate(divide="ignore", invalid="ignore"):
        logpre = m * np.log(0.5 * x) - math.lgamma(m + 1)
    pre = np.where(x > 0, np.exp(logpre), 1.0 if m == 0 else 0.0)
    return pre * total


def _j_miller(m, x):
    """Miller backward recurrence normalized by J0 + 2*sum J_2k = 1 (x >= 1)."""
    top = max(m, float(x.max()))
    start = int(top + 40 + 15 * top ** (1.0 / 3.0))
    start += start % 2
    big = 1e200
    jp1 = np.zeros_like(x)
    jk = np.full_like(x, 1e-300)
    norm = np.zeros_like(x)
    result = np.zeros_like(x)
    for k in range(start, 0, -1):
        jm1 = (2.0 * k / x) * jk - jp1
        jp1, jk = jk, jm1
        # jk now holds the unnormalized J_{k-1}
        if k - 1 == m:
            result = jk.copy()
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm = norm + 2.0 * jk
        over = np.abs(jk) > big
        if over.any():
            scale = np.where(over, 1.0 / big, 1.0)
            jk = jk * scale
            jp1 = jp1 * scale
            norm = norm * scale
            result = result * scale
    norm = norm + jk
    return result / norm


def bessel_j(m: int, x):
    """Bessel function ``J_m(x)`` for integer ``0 <= m <= 200`` and real ``x >= 0``."""
    if m < 0 or m > MAX_ORDER:
        raise BesselDomainError(f"order {m} outside [0, {MAX_ORDER}]")
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xa < 0):
        raise BesselDomainError("bessel_j requires x >= 0")
    out = np.empty_like(xa)
    small = xa < 1.0
    if small.any():
        out[small] = _j_small(m, xa[small])
    if (~small).any():
        out[~small] = _j_miller(m, xa[~small])
    return out[0] if np.ndim(x) == 0 else out


def bessel_j_prime(m: int, x):
    """Derivative ``J_m'(x)``."""
    if m == 0:
        return -bessel_j(1, x)
    return 0.5 * (bessel_j(m - 1, x) - bessel_j(m + 1, x))


def _j_second(m, x):
    """``J_m''(x)`` from Bessel's equation (x > 0)."""
    return -bessel_j_prime(m, x) / x - (1.0 - m * m / (x * x)) * bessel_j(m, x)


@lru_cache(maxsize=4096)
def bessel_root(m: int, n: int, kind: str = "J") -> float:
    """``n``-th positive zero of ``J_m`` (kind ``"J"``) or of ``J_m'`` (kind ``"J'"``).

    Zeros are bracketed by a sign-change scan that starts below the
    McMahon/turning-point location ``x ~ m`` and polished with safeguarded
    Newton steps.  The trivial zero of ``J_0'`` at the origin is not counted.
    """
    if n < 1:
        raise ValueError("root index n must be >= 1")
    if kind not in ("J", "J'"):
        raise ValueError("kind must be 'J' or \"J'\"")
    if kind == "J":
        f, df = (lambda x: bessel_j(m, x)), (lambda x: bessel_j_prime(m, x))
    else:
        f, df = (lambda x: bessel_j_prime(m, x)), (lambda x: _j_second(m, x))
    step = 0.25
    x0 = max(1e-3, m - 2.0 * max(m, 1) ** (1.0 / 3.0) - 1.0) if m > 0 else 0.5
    found = 0
    x_max = m + 2.0 * (n + 2) * np.pi + 50.0
    while x0 < x_max:
        grid = x0 + step * np.arange(1, 257)
        vals = f(grid)
        prev = np.concatenate(([f(x0)], vals[:-1]))
        left = np.concatenate(([x0], grid[:-1]))
        flips = np.nonzero(np.sign(prev) * np.sign(vals) < 0)[0]
        for idx in flips:
            found += 1
            if found == n:
                return _polish(f, df, left[idx], grid[idx])
        x0 = grid[-1]
    raise RuntimeError(f"bracket failure for {kind} root m={m}, n={n}")


def _polish(f, df, a, b, tol=1e-15, maxiter=100):
    fa = f(a)
    x = 0.5 * (a + b)
    for _ in range(maxiter):
        fx = f(x)
        if fx == 0.0:
            return float(x)
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b = x
        d = df(x)
        xn = x - fx / d if d != 0 else 0.5 * (a + b)
        if not (a < xn < b):
            xn = 0.5 * (a + b)
        if abs(xn - x) <= tol * max(1.0, abs(x)):
            return float(xn)
        x = xn
    return float(x)
