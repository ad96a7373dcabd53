import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from nodaltube.eigensolver import UNIT_DISC
from nodaltube.geometry import (AnalyticClosedCurve, BranchCutError, GlancingChart,
                                StadiumCurve, StripExceededError, arclength_reparametrize,
                                certify_strip, complex_distance, critical_point, curve_from_dict,
                                frame, glancing_inverse, glancing_map, glancing_map_derivative,
                                glancing_taylor, load_curve, save_curve, weight,
                                weight_asymptotic)

TWO_PI = 2 * np.pi


def test_circle_geometry():
    c = AnalyticClosedCurve.circle(0.7, center=(0.1, -0.2))
    t = np.linspace(0, TWO_PI, 13)
    assert np.allclose(np.linalg.norm(c(t) - [0.1, -0.2], axis=-1), 0.7)
    assert c.length() == pytest.approx(TWO_PI * 0.7, rel=1e-13)
    assert np.allclose(c.curvature(t), 1 / 0.7)
    assert c.diameter() == pytest.approx(1.4, rel=1e-3)


def test_ellipse_perimeter_against_series():
    a, b = 1.0, 0.6
    e = AnalyticClosedCurve.ellipse(a, b)
    hh = ((a - b) / (a + b)) ** 2
    # Ramanujan II, accurate far below 1e-9 at this aspect ratio
    ram = np.pi * (a + b) * (1 + 3 * hh / (10 + np.sqrt(4 - 3 * hh)))
    assert e.length() == pytest.approx(ram, rel=1e-9)


def test_frame_is_orthonormal_and_outward():
    e = AnalyticClosedCurve.ellipse(1.0, 0.5, angle=0.4)
    fr = frame(e, np.linspace(0, TWO_PI, 40, endpoint=False))
    assert np.allclose(np.einsum("ij,ij->i", fr.tangent, fr.normal), 0)
    assert np.allclose(np.linalg.norm(fr.normal, axis=-1), 1)
    assert np.all(fr.curvature > 0)
    outward = e(np.linspace(0, TWO_PI, 40, endpoint=False)) + 1e-3 * fr.normal
    assert not np.any(e.contains(outward))


def test_strip_check_raises():
    e = AnalyticClosedCurve.ellipse(1.0, 0.5, strip_halfwidth=0.3)
    with pytest.raises(StripExceededError):
        e.derivative(np.array([0.5j]))
    e.derivative(np.array([0.5j]), check=False)


def test_arclength_reparametrization_has_constant_speed():
    e = arclength_reparametrize(AnalyticClosedCurve.ellipse(1.0, 0.7))
    t = np.linspace(0, TWO_PI, 333)
    sp = e.speed(t)
    assert np.max(np.abs(sp / sp.mean() - 1)) < 1e-10
    assert e.is_arclength
    assert 0 < e.strip_halfwidth <= certify_strip(e) + 1e-12


def test_complex_distance_on_real_axis_and_branch():
    # concentric circles: <D, D> = 1.25 - cos(t - s), with Re <= 0 once cosh(Im t) >= 1.25
    H = AnalyticClosedCurve.circle(0.5)
    t, s = np.array([0.3, 1.2]), np.array([2.0, -1.0])
    rho = complex_distance(H, UNIT_DISC, t, s)
    assert np.allclose(rho.imag, 0)
    assert np.allclose(rho.real, np.linalg.norm(H(t) - UNIT_DISC(s), axis=-1))
    with pytest.raises(BranchCutError):
        complex_distance(H, UNIT_DISC, np.array([1.0j]), np.array([0.0]))


@pytest.mark.parametrize("r0", [0.3, 0.5, 0.9])
def test_concentric_glancing_closed_forms(r0):
    H = AnalyticClosedCurve.circle(r0)
    s = np.linspace(-np.pi, np.pi, 11, endpoint=False)
    assert np.allclose(glancing_map(H, UNIT_DISC, s, branch=-1), s - np.arccos(r0), atol=1e-11)
    assert np.allclose(glancing_map(H, UNIT_DISC, s, branch=1), s + np.arccos(r0), atol=1e-11)
    assert np.allclose(glancing_map_derivative(H, UNIT_DISC, s), 1.0, atol=1e-10)
    assert np.allclose(glancing_inverse(H, UNIT_DISC, s, branch=-1), s + np.arccos(r0),
                       atol=1e-11)


def test_glancing_chart_roundtrip_off_center():
    H = arclength_reparametrize(AnalyticClosedCurve.ellipse(0.4, 0.3, center=(0.15, -0.1)))
    chart = GlancingChart.build(H, UNIT_DISC, n=64, im_values=(0.05, 0.1))
    assert chart.roundtrip_error(H, UNIT_DISC) < 1e-10
    assert np.all(chart.S > 0)


def test_critical_point_against_scipy():
    H = AnalyticClosedCurve.ellipse(0.45, 0.35, center=(0.1, 0.05))
    for t in (0.4 + 0.1j, -2.0 + 0.2j):
        s = critical_point(H, UNIT_DISC, t)
        seed = glancing_inverse(H, UNIT_DISC, t.real)
        res = minimize_scalar(lambda x: complex_distance(H, UNIT_DISC, t, x).imag,
                              bounds=(seed - 0.5, seed + 0.5), method="bounded",
                              options={"xatol": 1e-12})
        assert s == pytest.approx(res.x, abs=1e-6)


def test_concentric_critical_point_shift_is_quadratic():
    # s* - Y^{-1}(x) = -r0 / (2 sqrt(1 - r0^2)) y^2 + O(y^4)
    r0 = 0.5
    H = AnalyticClosedCurve.circle(r0)
    y = 0.01
    dev = critical_point(H, UNIT_DISC, 0.7 + 1j * y) - glancing_inverse(H, UNIT_DISC, 0.7)
    assert dev / y ** 2 == pytest.approx(-r0 / (2 * np.sqrt(1 - r0 ** 2)), rel=1e-3)


def test_weight_is_zero_on_real_axis_and_positive_above():
    H = AnalyticClosedCurve.circle(0.5)
    x = np.linspace(-np.pi, np.pi, 7)
    assert np.all(weight(H, UNIT_DISC, x.astype(complex)) == 0)
    assert np.all(weight(H, UNIT_DISC, x + 0.2j) > 0)


def test_weight_example_concentric():
    # S at arclength height 0.1 on the r0 = 0.5 circle (curvature 2)
    H = AnalyticClosedCurve.circle(0.5)
    assert weight(H, UNIT_DISC, 0.2j) == pytest.approx(weight_asymptotic(2.0, 0.1), abs=1e-5)
    assert weight_asymptotic(2.0, 0.1) == pytest.approx(0.1 + 4 / 6 * 1e-3)
    with pytest.raises(ValueError):
        weight_asymptotic(1.0, -0.1)


@settings(max_examples=20, deadline=None)
@given(x=st.floats(-np.pi, np.pi), y=st.floats(0.01, 0.3))
def test_weight_monotone_in_height(x, y):
    H = AnalyticClosedCurve.circle(0.5)
    assert weight(H, UNIT_DISC, x + 1j * y) < weight(H, UNIT_DISC, x + 1j * (y + 0.01))


def test_glancing_taylor_defect_is_quartic():
    H = AnalyticClosedCurve.circle(0.5)
    s = 0.4
    Y = glancing_map(H, UNIT_DISC, s)
    errs = []
    for d in (0.04, 0.02):
        t = Y + d * (1 + 1j)
        re, im = glancing_taylor(H, UNIT_DISC, t, s)
        exact = complex_distance(H, UNIT_DISC, t, s)
        errs.append(abs(exact - (re + 1j * im)))
    assert errs[0] / errs[1] > 12


def test_stadium_geometry():
    st_ = StadiumCurve(1.0, 1.0)
    assert st_.length == pytest.approx(4 + TWO_PI)
    tau = np.linspace(0, TWO_PI, 400, endpoint=False) + 1e-3
    s = st_.arclength(tau)[0]
    assert np.all(np.diff(s) > 0)
    kappa = st_.curvature(tau)
    assert set(np.round(kappa, 10)) <= {0.0, 1.0}
    assert st_.diameter() == 4.0
    assert np.allclose(np.linalg.norm(st_.eval_arclength(np.array([2.0 + np.pi / 2]))
                                      - [1.0, 0.0], axis=-1), 1.0)


def test_curve_roundtrip(tmp_path):
    for c in (AnalyticClosedCurve.ellipse(1.0, 0.5, strip_halfwidth=0.3), StadiumCurve(0.5, 1.0)):
        path = tmp_path / "c.json"
        save_curve(c, path)
        back = load_curve(path)
        assert back.domain_hash() == c.domain_hash()
        assert curve_from_dict(c.to_dict()).domain_hash() == c.domain_hash()
