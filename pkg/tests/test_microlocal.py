import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq, minimize_scalar

from nodaltube.continuation import DiscContinuation, restrict
from nodaltube.eigensolver import DIRICHLET, NEUMANN, UNIT_DISC, EigenPair, disc_eigenpair, eig_scan
from nodaltube.geometry import AnalyticClosedCurve, StadiumCurve, complex_distance
from nodaltube.microlocal import (AliasingError, FrequencyWindow, MarginError, PeriodicMultiplier,
                                  apply_multiplier, boundary_arclength, face_windows,
                                  glancing_symbol, liouville_limit, log_fourier_coefficients,
                                  qer_lhs, qer_rhs, residual_decay, smooth_transition,
                                  smoothstep7, trace_on_arclength, tube_cutoff, wavefront_check,
                                  zero_cutoff)
from nodaltube.zeros import OvalDomain

TWO_PI = 2 * np.pi


# ---------------------------------------------------------------------------
# multipliers
# ---------------------------------------------------------------------------

def test_smoothstep_endpoints_and_flatness():
    assert smoothstep7(0.0) == 0 and smoothstep7(1.0) == 1
    assert smoothstep7(0.5) == pytest.approx(0.5)
    d = 1e-3
    # three vanishing derivatives at both ends: values within O(d^4)
    assert smoothstep7(d) < 40 * d ** 4
    assert 1 - smoothstep7(1 - d) < 40 * d ** 4
    x = np.linspace(0, 1, 101)
    assert np.all(np.diff(smoothstep7(x)) >= 0)
    assert np.allclose(smooth_transition(x) + smooth_transition(1 - x), 1.0)


def test_periodic_multiplier_plateau_and_support():
    chi = PeriodicMultiplier(2.0)
    assert chi.outer == 4.0
    assert np.all(chi(np.array([-2.0, 0.0, 1.9])) == 1.0)
    assert np.all(chi(np.array([-4.0, 4.5])) == 0.0)


def test_apply_multiplier_on_trig_polynomial():
    n, h = 1024, 0.05
    t = TWO_PI * np.arange(n) / n
    low, high = np.cos(3 * t), np.sin(40 * t)
    out = apply_multiplier(low + high, PeriodicMultiplier(0.5), h)
    assert np.max(np.abs(out - low)) < 1e-12
    # complex input keeps the one-sided spectrum (real input returns the real part)
    window = apply_multiplier((low + high).astype(complex), FrequencyWindow(1.5, 2.5), h)
    # only the positive-frequency half of sin(40 t) survives
    assert np.max(np.abs(window - 0.5 * np.exp(1j * 40 * t) / 1j)) < 1e-12


def test_apply_multiplier_aliasing_checks():
    with pytest.raises(AliasingError):
        apply_multiplier(np.ones(1000), PeriodicMultiplier(1.0), 0.1)
    with pytest.raises(AliasingError):
        apply_multiplier(np.ones(64), PeriodicMultiplier(1.0), 0.1)


@settings(max_examples=25, deadline=None)
@given(R=st.floats(0.2, 3.0))
def test_multiplier_is_contraction(R):
    rng = np.random.default_rng(1)
    f = rng.normal(size=512)
    out = apply_multiplier(f, PeriodicMultiplier(R), 0.02, check=False)
    assert np.linalg.norm(out) <= np.linalg.norm(f) * (1 + 1e-12)


def test_wavefront_residual_decays_on_ellipse_family():
    e = AnalyticClosedCurve.ellipse(1.0, 0.7)
    H = AnalyticClosedCurve.circle(0.3)
    pairs = eig_scan(e, 4.0, 16.0, DIRICHLET, nq=384)
    fam = [(p.lam, lambda t, p=p: restrict(p, H, t)) for p in pairs]
    res = wavefront_check(fam, PeriodicMultiplier(1.5), length=H.length())
    lam = np.array([p.lam for p in pairs])
    slope = np.polyfit(np.log(1 / lam), np.log(res), 1)[0]
    assert slope > 2
    # the envelope drops by more than h^2 between the two halves of the window
    assert res[lam > 10].max() < res[lam <= 10].max() * (lam[lam <= 10].max() / lam.max()) ** 2


# ---------------------------------------------------------------------------
# shifted-contour Fourier coefficients and residual decay
# ---------------------------------------------------------------------------

def test_log_fourier_coefficients_against_mpmath():
    a, b, m, shift = 1.5 * np.pi, 0.2625, 5, 0.06
    cf = DiscContinuation(m, 1.0, 1.0)
    k, logc = log_fourier_coefficients(
        lambda p: cf.log(a * np.cos(p) + 1j * b * np.sin(p) + shift), n=1024)
    mpmath.mp.dps = 120
    N = 512
    nodes = [2 * mpmath.pi * j / N for j in range(N)]
    vals = [mpmath.cos(m * (a * mpmath.cos(p) + 1j * b * mpmath.sin(p) + shift)) for p in nodes]
    for kk in (0, 3, 10, 40, 80, 120, -7, -50):
        c = sum(v * mpmath.exp(-1j * kk * p) for v, p in zip(vals, nodes)) / N
        assert logc[kk] == pytest.approx(float(mpmath.log(abs(c))), abs=1e-9)


def test_log_fourier_coefficients_of_exponential():
    # f = exp(e^{i phi}) has c_k = 1/k! for k >= 0 and 0 otherwise
    k, logc = log_fourier_coefficients(lambda p: np.exp(1j * p), n=512)
    from math import lgamma
    for kk in (0, 5, 30, 100):
        assert logc[kk] == pytest.approx(-lgamma(kk + 1), abs=1e-9)
    assert logc[-5] < -30


def test_residual_decay_oracle_and_ordering():
    fam = []
    for m in (6, 12, 18):
        p = disc_eigenpair(m, 3, NEUMANN, nq=128)
        fam.append((p.lam, DiscContinuation.from_pair(p, 0.5)))
    fits = residual_decay(fam, OvalDomain.ellipse(0.15), [4.0, 8.0])
    assert fits[0].c > 0 and fits[1].c > fits[0].c
    assert np.all(fits[1].log_residual < fits[0].log_residual)


# ---------------------------------------------------------------------------
# glancing symbol and Liouville integral
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def offcenter_symbol():
    H = AnalyticClosedCurve.circle(0.2, center=(0.1, 0.05))
    cut = tube_cutoff(0.1, 1.2, 0.3)
    y = np.linspace(0.1, 1.2, 441)[1:]
    return glancing_symbol(H, UNIT_DISC, cut, y, n_tau=16)


def test_symbol_is_nonnegative_and_fibers_monotone(offcenter_symbol):
    sym = offcenter_symbol
    assert np.all(sym.values >= 0)
    d = np.diff(sym.sigma, axis=0)
    assert np.all(d > 0) or np.all(d < 0)
    assert np.all(np.abs(sym.sigma) < 1)
    assert sym.length == pytest.approx(TWO_PI, rel=1e-12)


def test_concentric_fibers_are_identical():
    H = AnalyticClosedCurve.circle(0.3)
    y = np.linspace(0.1, 1.0, 91)[1:]
    sym = glancing_symbol(H, UNIT_DISC, tube_cutoff(0.1, 1.0, 0.2), y, n_tau=8)
    assert np.max(np.abs(sym.sigma - sym.sigma[:, :1])) < 1e-10
    assert np.max(np.abs(sym.values - sym.values[:, :1])) < 1e-10


def test_liouville_limit_monte_carlo(offcenter_symbol):
    sym = offcenter_symbol
    rng = np.random.default_rng(7)
    N = 400_000
    s = rng.uniform(0, sym.length, N)
    sig = rng.uniform(-1, 1, N)
    # interpolate fiber values periodically in s, pointwise
    cols = sym.on_grid(sig)
    ss = np.concatenate((sym.s, [sym.s[0] + sym.length]))
    x = np.mod(s - sym.s[0], sym.length) + sym.s[0]
    j = np.clip(np.searchsorted(ss, x, side="right") - 1, 0, len(sym.s) - 1)
    f = (x - ss[j]) / (ss[j + 1] - ss[j])
    idx = np.arange(N)
    vals = cols[j, idx] * (1 - f) + cols[(j + 1) % len(sym.s), idx] * f
    mc = 2 * sym.length * np.mean(vals / np.sqrt(1 - sig ** 2))
    assert liouville_limit(sym) == pytest.approx(mc, rel=1e-2)


def test_liouville_margin_error():
    # concentric fibers start at |sigma| = r0 and grow with y
    H = AnalyticClosedCurve.circle(0.3)
    y = np.linspace(0.05, 0.5, 100)
    sym = glancing_symbol(H, UNIT_DISC, tube_cutoff(0.05, 0.5, 0.1), y, n_tau=4)
    assert liouville_limit(sym) > 0
    with pytest.raises(MarginError):
        liouville_limit(sym, margin=0.75)


# ---------------------------------------------------------------------------
# quadratic forms
# ---------------------------------------------------------------------------

def _concentric_weight(r0, y):
    """``S(iy)`` by direct maximization of ``-Im rho`` over real ``s``."""
    H = AnalyticClosedCurve.circle(r0)
    s0 = np.arccos(r0)
    res = minimize_scalar(lambda s: complex_distance(H, UNIT_DISC, 1j * y, s).imag,
                          bounds=(s0 - 0.6, s0 + 0.6), method="bounded",
                          options={"xatol": 1e-12})
    return -res.fun


def test_qer_lhs_against_closed_form():
    r0, m = 0.2, 10
    p = disc_eigenpair(m, 8, NEUMANN, nq=256)
    cf = DiscContinuation.from_pair(p, r0)
    H = AnalyticClosedCurve.circle(r0)
    cut = tube_cutoff(0.1, 1.45, 0.3)
    h = 1 / p.lam
    got = qer_lhs(None, H, UNIT_DISC, p.lam, cut, n_re=256, n_im=96, log_sampler=cf.log)
    # int_0^{2 pi} |cos(m(x + iy))|^2 dx = pi cosh(2 m y)
    integrand = lambda y: (2 * cut(0.0, y) * np.exp(-2 * _concentric_weight(r0, y) / h)  # noqa: E731
                           * cf.amplitude ** 2 * np.pi * np.cosh(2 * m * y))
    ref = quad(integrand, 0.1, 1.45, epsabs=0, epsrel=1e-10, limit=200)[0] * h ** -0.5
    assert got.value == pytest.approx(ref, rel=1e-5)
    assert got.value <= got.bound


def test_qer_lhs_zero_cutoff():
    H = AnalyticClosedCurve.circle(0.2)
    res = qer_lhs(lambda t: np.ones_like(t), H, UNIT_DISC, 10.0, zero_cutoff)
    assert res.value == 0 and res.bound == 0


@settings(max_examples=20, deadline=None)
@given(mode=st.integers(0, 30), width=st.floats(0.05, 1.0))
def test_qer_rhs_symbol_in_sigma_only(mode, width):
    # Op_h(b(sigma)) is a Fourier multiplier: <Op u, u> = L sum b(h k) |c_k|^2
    n, h = 256, 1 / 40
    s = TWO_PI * np.arange(n) / n
    u = np.cos(mode * s) + 0.3 * np.sin(3 * s)
    b = lambda ss, sg: np.broadcast_to(np.exp(-(sg / width) ** 2), (len(ss), len(sg)))  # noqa: E731
    got = qer_rhs(u, b, h)
    c = np.fft.fft(u) / n
    k = np.fft.fftfreq(n, 1 / n)
    ref = TWO_PI * np.sum(np.exp(-(h * k / width) ** 2) * np.abs(c) ** 2)
    assert got.value == pytest.approx(ref, rel=1e-12, abs=1e-14)
    assert abs(got.imag) < 1e-12


def test_qer_rhs_identity_and_aliasing():
    p = disc_eigenpair(5, 2, NEUMANN, nq=256)
    s, tr, L = trace_on_arclength(p)
    one = qer_rhs(tr, lambda a, b: np.ones((len(a), len(b))), 1 / p.lam, length=L)
    assert one.value == pytest.approx(np.sum(tr ** 2) * L / len(tr), rel=1e-12)
    with pytest.raises(AliasingError):
        qer_rhs(tr[:16], lambda a, b: np.ones((len(a), len(b))), 1 / p.lam, length=L)


def test_trace_on_arclength_resamples_ellipse_trace():
    e = AnalyticClosedCurve.ellipse(1.0, 0.6)
    n = 256
    tau = TWO_PI * np.arange(n) / n
    pair = EigenPair(3.0, NEUMANN, np.cos(2 * tau), e)
    s, vals, L = trace_on_arclength(pair)
    assert L == pytest.approx(e.length(), rel=1e-12)
    for j in (5, 77, 200):
        tj = brentq(lambda x: boundary_arclength(e, np.array([x]))[0] - s[j], 0, TWO_PI)
        assert vals[j] == pytest.approx(np.cos(2 * tj), abs=1e-10)


# ---------------------------------------------------------------------------
# face windows
# ---------------------------------------------------------------------------

def test_smooth_boundary_window_notch():
    eps, base = 0.1, 1.0
    (w,) = face_windows(UNIT_DISC, eps, basepoint=base)
    s = np.linspace(0, TWO_PI, 2001)
    d = np.abs(np.angle(np.exp(1j * (s - base))))
    vals = w(s)
    assert np.all(vals[d >= eps] == pytest.approx(1.0))
    assert np.all(vals[d <= 0.1 * eps] < 1e-3)
    assert np.all((vals >= 0) & (vals <= 1))


def test_stadium_windows_partition_faces():
    st_ = StadiumCurve(1.0, 1.0)
    eps = 0.05
    wins = face_windows(st_, eps)
    assert len(wins) == 4
    s = np.linspace(0, st_.length, 4001, endpoint=False)
    ends = np.concatenate(([0.0], np.cumsum(st_.face_lengths)))
    d = np.min(np.abs(s[:, None] - ends[None, :]), axis=1)
    total = sum(w(s) for w in wins)
    assert np.allclose(total[d >= eps], 1.0)
    assert np.all(total[d <= 0.1 * eps] < 1e-3)
    with pytest.raises(ValueError):
        face_windows(st_, 1.5)
