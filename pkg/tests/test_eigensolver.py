import numpy as np
import pytest
import scipy.special as sp

from nodaltube.eigensolver import (DIRICHLET, NEUMANN, UNIT_DISC, EigenPair, NormalizationError,
                                   bie_singular_values, disc_eigenpair, disc_norm_constant,
                                   eig_scan, interior_field, interior_residual,
                                   probe_points, rellich_norm_sq,
                                   trace_l2_norm)
from nodaltube.geometry import AnalyticClosedCurve


def test_disc_norm_constant_by_quadrature():
    # independent check: integrate (C J_m(lam r) cos(m theta))^2 over the disc
    for m, n, bc in [(0, 2, NEUMANN), (3, 1, NEUMANN), (2, 2, DIRICHLET)]:
        lam = (sp.jnp_zeros(m, n)[-1] if m else sp.jnp_zeros(0, n - 1)[-1]) if bc == NEUMANN \
            else sp.jn_zeros(m, n)[-1]
        C = disc_norm_constant(m, lam, bc)
        x, w = np.polynomial.legendre.leggauss(80)
        r = 0.5 * (x + 1)
        radial = np.sum(0.5 * w * r * sp.jv(m, lam * r) ** 2)
        ang = 2 * np.pi if m == 0 else np.pi
        assert C ** 2 * radial * ang == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("bc", [NEUMANN, DIRICHLET])
def test_rellich_norm_of_disc_pairs(bc):
    for m, n in [(1, 1), (4, 2), (0, 2)]:
        p = disc_eigenpair(m, n, bc, nq=256)
        assert rellich_norm_sq(UNIT_DISC, p.trace, p.lam, bc) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("bc", [NEUMANN, DIRICHLET])
def test_singular_value_dips_at_disc_eigenvalues(bc):
    lam = sp.jnp_zeros(2, 1)[0] if bc == NEUMANN else sp.jn_zeros(2, 1)[0]
    at = bie_singular_values(UNIT_DISC, lam, bc, nq=128)
    off = bie_singular_values(UNIT_DISC, lam + 0.2, bc, nq=128)
    assert at < 1e-10 < 1e-3 < off
    with pytest.raises(ValueError):
        bie_singular_values(UNIT_DISC, -1.0, bc)


def test_scan_finds_degenerate_pair_with_parities():
    pairs = eig_scan(UNIT_DISC, 3.0, 3.2, NEUMANN, nq=256)
    assert len(pairs) == 2
    assert {p.parity for p in pairs} == {"even", "odd"}
    for p in pairs:
        assert p.lam == pytest.approx(sp.jnp_zeros(2, 1)[0], abs=1e-8)
        assert rellich_norm_sq(UNIT_DISC, p.trace, p.lam, NEUMANN) == pytest.approx(1.0, rel=1e-8)
    # the two members are orthogonal on the boundary
    w = pairs[0].nodes.weights
    assert abs(np.sum(w * pairs[0].trace * pairs[1].trace)) < 1e-8


def test_scan_on_ellipse_satisfies_helmholtz():
    e = AnalyticClosedCurve.ellipse(1.0, 0.7)
    pairs = eig_scan(e, 2.0, 3.5, DIRICHLET, nq=256)
    assert pairs
    for p in pairs:
        assert np.max(interior_residual(p, probe_points(e, 10))) < 1e-4
    lams = [p.lam for p in pairs]
    assert lams == sorted(lams)


def test_interior_field_matches_closed_form():
    p = disc_eigenpair(3, 2, NEUMANN, nq=256)
    pts = probe_points(UNIT_DISC, 15, seed=4)
    r, th = np.hypot(*pts.T), np.arctan2(pts[:, 1], pts[:, 0])
    exact = p.meta["C"] * sp.jv(3, p.lam * r) * np.cos(3 * th)
    got = interior_field(p, pts)
    assert np.max(np.abs(got - exact)) < 1e-10
    assert np.max(np.abs(got.imag)) < 1e-10


def test_trace_norm_requires_normalization():
    p = disc_eigenpair(1, 1, DIRICHLET, nq=128)
    assert trace_l2_norm(p) > 0
    with pytest.raises(NormalizationError):
        trace_l2_norm(p.scaled(2.0))


def test_pair_roundtrip(tmp_path):
    p = disc_eigenpair(2, 3, NEUMANN, parity="odd", nq=128)
    path = tmp_path / "pair.json"
    p.save(path)
    q = EigenPair.load(path)
    assert q.lam == p.lam and q.parity == "odd" and q.label == (2, 3)
    assert np.array_equal(q.trace, p.trace)


def test_disc_pair_validation():
    with pytest.raises(ValueError):
        disc_eigenpair(0, 1, NEUMANN)
    with pytest.raises(ValueError):
        disc_eigenpair(0, 2, NEUMANN, parity="odd")
    with pytest.raises(ValueError):
        disc_eigenpair(1, 1, "robin")
