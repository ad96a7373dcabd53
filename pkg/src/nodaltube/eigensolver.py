"""Laplace eigenpairs of planar convex domains and their boundary traces.

Two sources of eigenpairs:

* the unit disc, where ``phi = C cos(m theta) J_m(lambda r)`` is explicit;
* a Nystrom boundary-integral scan for general smooth (or graded
  piecewise-smooth) boundaries, using Kress product quadrature for the
  logarithmic singularity.

Traces follow the semiclassical convention: Neumann pairs store
``phi|bdry`` and Dirichlet pairs store ``h d_nu phi|bdry`` with ``h = 1/lambda``.
Traces are normalized so that ``||phi||_{L^2(Omega)} = 1``; the interior
norm is obtained from the boundary by the Rellich identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import json

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import AnalyticClosedCurve, TWO_PI, curve_from_dict
from .specfun import EULER_GAMMA, bessel01_real, bessel_j, bessel_j_prime, bessel_root

NEUMANN = "neumann"
DIRICHLET = "dirichlet"


class SpuriousModeError(RuntimeError):
    """Reconstructed interior field fails the Helmholtz residual check."""


class NormalizationError(ValueError):
    """A normalized pair was required."""


def _check_bc(bc):
    bc = bc.lower()
    if bc not in (NEUMANN, DIRICHLET):
        raise ValueError(f"unknown boundary condition {bc!r}")
    return bc


# ---------------------------------------------------------------------------
# boundary discretization
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundaryNodes:
    """Equispaced parameter nodes on a boundary with geometric data."""

    curve: object
    n: int
    tau: np.ndarray
    x: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    speed: np.ndarray
    normal: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, curve, n):
        if n % 4:
            raise ValueError("node count must be a multiple of 4")
        offset = getattr(curve, "node_offset", 0.0)
        tau = TWO_PI * (np.arange(n) + offset) / n
        x = curve.derivative(tau, 0)
        d1 = curve.derivative(tau, 1)
        d2 = curve.derivative(tau, 2)
        speed = np.linalg.norm(d1, axis=-1)
        if np.any(speed <= 0):
            raise ValueError("quadrature node landed on a masked junction")
        normal = np.stack([d1[:, 1], -d1[:, 0]], axis=-1) / speed[:, None]
        return cls(curve, n, tau, x, d1, d2, speed, normal, TWO_PI / n * speed)

    def tangential_derivative(self, f):
        """Spectral derivative in arclength of periodic node samples ``f``."""
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        k[self.n // 2] = 0.0
        df = np.fft.ifft(1j * k * np.fft.fft(f))
        if not np.iscomplexobj(f):
            df = df.real
        return df / self.speed


@lru_cache(maxsize=32)
def _nodes(curve, n):
    return BoundaryNodes.build(curve, n)


@lru_cache(maxsize=32)
def _kress_weights(n):
    """Circulant weights ``R_j`` for the log kernel on ``n = 2p`` equispaced nodes."""
    p = n // 2
    j = np.arange(n)
    diff = np.pi * j / p
    m = np.arange(1, p)
    R = -(2 * np.pi / p) * (np.cos(np.outer(diff, m)) @ (1.0 / m)) - (np.pi / p ** 2) * np.cos(p * diff)
    return R


def _circulant(v):
    n = len(v)
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return v[idx]


def layer_matrices(curve, k, n, want=("S", "Kp")):
    """Nystrom matrices of the single layer ``S_k`` and adjoint double layer ``K'_k``.

    Both act on densities sampled at the nodes with respect to arclength and
    use the kernel splitting ``M = M1 log(4 sin^2((t - tau)/2)) + M2``.
    """
    nd = _nodes(curve, n)
    p = n // 2
    R = _circulant(_kress_weights(n))
    logw = np.zeros((n, n))
    diff = nd.x[:, None, :] - nd.x[None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    iu = np.triu_indices(n, 1)
    kr = k * r[iu]
    J0u, Y0u, J1u, Y1u = bessel01_real(kr)

    def sym(v):
        out = np.zeros((n, n))
        out[iu] = v
        return out + out.T

    J0, Y0, J1, Y1 = sym(J0u), sym(Y0u), sym(J1u), sym(Y1u)
    tt = nd.tau[:, None] - nd.tau[None, :]
    off = ~np.eye(n, dtype=bool)
    logw[off] = np.log(4.0 * np.sin(0.5 * tt[off]) ** 2)
    sp_t = nd.speed[:, None]
    sp_s = nd.speed[None, :]
    out = {}
    if "S" in want:
        M = 0.25j * (J0 + 1j * Y0) * sp_s
        M1 = -J0 / (4 * np.pi) * sp_s
        M2 = M - M1 * logw
        diag = (0.25j - EULER_GAMMA / (2 * np.pi) - np.log(0.5 * k * nd.speed) / (2 * np.pi)) * nd.speed
        M1[~off] = -nd.speed / (4 * np.pi)
        M2[~off] = diag
        out["S"] = R * M1 + (np.pi / p) * M2
    if "Kp" in want:
        nt = np.stack([nd.d1[:, 1], -nd.d1[:, 0]], axis=-1)   # unnormalized normal at t
        dn = np.einsum("ijk,ik->ij", diff, nt)
        with np.errstate(divide="ignore", invalid="ignore"):
            geo = np.where(off, dn / np.where(off, r, 1.0), 0.0) / sp_t * sp_s
        L = -0.25j * k * (J1 + 1j * Y1) * geo
        L1 = k / (4 * np.pi) * J1 * geo
        L2 = L - L1 * logw
        L1[~off] = 0.0
        L2[~off] = np.einsum("ik,ik->i", nd.d2, nt) / (4 * np.pi * nd.speed ** 2)
        out["Kp"] = R * L1 + (np.pi / p) * L2
    return out


@lru_cache(maxsize=16)
def _order_one_multiplier(n):
    """Circulant matrix of the Fourier multiplier ``1 + |j|`` on ``n`` nodes."""
    j = np.fft.fftfreq(n, 1.0 / n)
    col = np.fft.ifft(1.0 + np.abs(j)).real
    return _circulant(np.roll(col[::-1], 1))


def boundary_operator(curve, k, bc, n):
    """Discretized boundary operator whose kernel gives the eigen-densities.

    Dirichlet: ``Lambda S_k`` where ``Lambda`` is the parameter-space
    multiplier ``1 + |j|``; it leaves the kernel unchanged and lifts the
    smoothing operator ``S_k`` to order zero so that the high-frequency
    singular values do not mask the eigenvalue dips.  Neumann: ``I/2 + K'_k``.
    """
    bc = _check_bc(bc)
    if bc == DIRICHLET:
        return _order_one_multiplier(n) @ layer_matrices(curve, k, n, ("S",))["S"]
    return 0.5 * np.eye(n) + layer_matrices(curve, k, n, ("Kp",))["Kp"]


def bie_singular_values(curve, k, bc, nq=256, count=1):
    """Smallest ``count`` singular values of the discretized boundary operator."""
    if k <= 0:
        raise ValueError("k must be positive")
    sv = np.linalg.svd(boundary_operator(curve, k, bc, nq), compute_uv=False)
    return sv[::-1][:count] if count > 1 else float(sv[-1])


# ---------------------------------------------------------------------------
# eigenpairs
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class EigenPair:
    """Eigenvalue ``lam`` (so ``-Delta phi = lam^2 phi``) with its boundary trace."""

    lam: float
    bc: str
    trace: np.ndarray
    curve: object
    normalized: bool = True
    parity: str = ""
    label: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return 1.0 / self.lam

    @property
    def nq(self) -> int:
        return len(self.trace)

    @property
    def nodes(self) -> BoundaryNodes:
        return _nodes(self.curve, self.nq)

    def scaled(self, alpha):
        return EigenPair(self.lam, self.bc, alpha * self.trace, self.curve, False,
                         self.parity, self.label, dict(self.meta))

    def to_dict(self) -> dict:
        tr = np.asarray(self.trace)
        return {
            "lambda": float(self.lam),
            "bc": self.bc,
            "nq": int(self.nq),
            "trace_re": tr.real.tolist(),
            "trace_im": (tr.imag if np.iscomplexobj(tr) else np.zeros_like(tr)).tolist(),
            "domain_hash": self.curve.domain_hash(),
            "domain": self.curve.to_dict(),
            "normalized": bool(self.normalized),
            "parity": self.parity,
            "label": list(self.label),
        }

    @classmethod
    def from_dict(cls, d, curve=None):
        curve = curve if curve is not None else curve_from_dict(d["domain"])
        if curve.domain_hash() != d["domain_hash"]:
            raise ValueError("domain hash mismatch")
        tr = np.asarray(d["trace_re"]) + 1j * np.asarray(d["trace_im"])
        if not np.any(tr.imag):
            tr = tr.real
        return cls(float(d["lambda"]), d["bc"], tr, curve, bool(d.get("normalized", True)),
                   d.get("parity", ""), tuple(d.get("label", ())))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path, curve=None):
        with open(path) as fh:
            return cls.from_dict(json.load(fh), curve)


UNIT_DISC = AnalyticClosedCurve.circle(1.0)


def disc_norm_constant(m, lam, bc):
    """``C`` with ``int_disc (C cos(m theta) J_m(lam r))^2 = 1``."""
    ang = TWO_PI if m == 0 else np.pi
    jm = bessel_j(m, lam)
    jp = bessel_j_prime(m, lam)
    radial = 0.5 * ((1.0 - m * m / lam ** 2) * jm ** 2 + jp ** 2)
    return 1.0 / np.sqrt(ang * radial)


def disc_eigenpair(m, n, bc, parity="even", nq=512):
    """Closed-form unit-disc eigenpair ``(m, n)`` with cos (even) or sin (odd) angular part."""
    bc = _check_bc(bc)
    if parity not in ("even", "odd"):
        raise ValueError("parity must be 'even' or 'odd'")
    if m == 0 and parity == "odd":
        raise ValueError("m = 0 has no odd member")
    if bc == DIRICHLET:
        lam = bessel_root(m, n, "J")
    elif m == 0:
        # classical labeling: j'_{0,1} = 0 is the constant mode
        if n < 2:
            raise ValueError("Neumann (0, 1) is the constant mode with lambda = 0")
        lam = bessel_root(0, n - 1, "J'")
    else:
        lam = bessel_root(m, n, "J'")
    C = disc_norm_constant(m, lam, bc)
    s = TWO_PI * np.arange(nq) / nq
    ang = np.cos(m * s) if parity == "even" else np.sin(m * s)
    amp = bessel_j(m, lam) if bc == NEUMANN else bessel_j_prime(m, lam)
    return EigenPair(lam, bc, C * amp * ang, UNIT_DISC, True, parity, (m, n),
                     {"C": float(C), "m": m, "n": n})


def rellich_norm_sq(curve, trace, lam, bc):
    """``||phi||^2_{L^2(Omega)}`` from the boundary trace by the Rellich identity."""
    nd = _nodes(curve, len(trace))
    xn = np.einsum("ik,ik->i", nd.x, nd.normal)
    tr = np.asarray(trace)
    if _check_bc(bc) == DIRICHLET:
        dens = tr ** 2
    else:
        dtr = nd.tangential_derivative(tr) / lam
        dens = tr ** 2 - dtr ** 2
    return 0.5 * np.sum(nd.weights * xn * dens)


def trace_l2_norm(pair: EigenPair) -> float:
    """``||u^bdry||_{L^2(bdry)}`` by the periodic trapezoid rule."""
    if not pair.normalized:
        raise NormalizationError("trace_l2_norm requires an L^2(Omega)-normalized pair")
    return float(np.sqrt(np.sum(pair.nodes.weights * np.abs(pair.trace) ** 2)))


def interior_field(pair: EigenPair, points):
    """Interior values from the Green representation of the trace."""
    nd = pair.nodes
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    diff = pts[:, None, :] - nd.x[None, :, :]
    rho = np.linalg.norm(diff, axis=-1)
    J0, Y0, J1, Y1 = bessel01_real(pair.lam * rho)
    if pair.bc == NEUMANN:
        cos = np.einsum("ijk,jk->ij", diff, nd.normal) / rho
        ker = -0.25j * pair.lam * (J1 + 1j * Y1) * cos
    else:
        ker = 0.25j * pair.lam * (J0 + 1j * Y0)
    return ker @ (nd.weights * pair.trace)


def interior_residual(pair: EigenPair, points, step=None):
    """Relative Helmholtz residual ``|Delta phi + lam^2 phi| / (lam^2 |phi|)`` at ``points``.

    Uses a 5-point finite-difference Laplacian; ``|phi|`` is floored at a tenth
    of the largest probe value so nodal points do not dominate.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = step if step is not None else 3e-3 / pair.lam
    offs = np.array([[0, 0], [d, 0], [-d, 0], [0, d], [0, -d]])
    vals = interior_field(pair, (pts[:, None, :] + offs[None]).reshape(-1, 2)).reshape(-1, 5)
    lap = (vals[:, 1:].sum(axis=1) - 4 * vals[:, 0]) / d ** 2
    scale = np.maximum(np.abs(vals[:, 0]), 0.1 * np.abs(vals[:, 0]).max())
    return np.abs(lap + pair.lam ** 2 * vals[:, 0]) / (pair.lam ** 2 * scale)


def probe_points(curve, count=20, seed=0, shrink=0.75):
    """Deterministic random points in the interior of a convex, star-shaped domain."""
    rng = np.random.default_rng(seed)
    t = TWO_PI * np.arange(512) / 512
    centre = curve.derivative(t, 0).mean(axis=0)
    tau = rng.uniform(0, TWO_PI, count)
    frac = shrink * np.sqrt(rng.uniform(0, 1, count))
    b = curve.derivative(tau, 0)
    return centre + frac[:, None] * (b - centre)


def polar_l2_norm_sq(pair: EigenPair, n_r=64, n_theta=64):
    """Diagnostic ``||phi||^2`` on a polar Gauss x trapezoid grid about the centroid.

    The layer-potential integrand is nearly singular close to the boundary, so
    this is only a rough cross-check of :func:`rellich_norm_sq`.
    """
    curve = pair.curve
    t = TWO_PI * np.arange(2048) / 2048
    b = curve.derivative(t, 0)
    centre = b.mean(axis=0)
    ang = np.arctan2(b[:, 1] - centre[1], b[:, 0] - centre[0])
    rad = np.linalg.norm(b - centre, axis=-1)
    order = np.argsort(ang)
    theta = TWO_PI * np.arange(n_theta) / n_theta - np.pi
    R = np.interp(theta, ang[order], rad[order], period=TWO_PI)
    xg, wg = np.polynomial.legendre.leggauss(n_r)
    rr = 0.5 * (xg + 1)[None, :] * R[:, None]
    ww = 0.5 * wg[None, :] * R[:, None] * rr * (TWO_PI / n_theta)
    pts = centre + np.stack([rr * np.cos(theta)[:, None], rr * np.sin(theta)[:, None]], -1)
    vals = interior_field(pair, pts.reshape(-1, 2)).reshape(rr.shape)
    return float(np.sum(ww * np.abs(vals) ** 2))


def _null_to_traces(curve, k, bc, n, vecs):
    """Map kernel densities to traces in the semiclassical convention."""
    mats = layer_matrices(curve, k, n, ("S", "Kp"))
    if bc == NEUMANN:
        return (mats["S"] @ vecs).T
    return ((0.5 * np.eye(n) + mats["Kp"]) @ vecs).T / k


def _realify(traces, weights):
    """Real orthonormal basis (boundary-weighted) of the span of complex traces."""
    p = len(traces)
    stack = np.concatenate([traces.real, traces.imag]) * np.sqrt(weights)
    u, sv, vt = np.linalg.svd(stack, full_matrices=False)
    return vt[:p] / np.sqrt(weights)


def _dominant_mode(vecs, tau):
    coeffs = np.fft.rfft(vecs, axis=-1)
    power = (np.abs(coeffs) ** 2).sum(axis=0)
    return int(np.argmax(power))


def _tag_and_orient(vecs, nd):
    """Parity tags (even/odd about the dominant Fourier mode) and sign fixing."""
    kdom = _dominant_mode(vecs, nd.tau)
    cosk = np.cos(kdom * nd.tau)
    sink = np.sin(kdom * nd.tau)
    w = nd.weights
    if len(vecs) == 1:
        v = vecs[0]
        a, b = np.sum(w * v * cosk), np.sum(w * v * sink)
        if abs(a) >= abs(b):
            return [v * np.sign(a or 1.0)], ["even"], kdom
        return [v * np.sign(b)], ["odd"], kdom
    a = vecs @ (w * cosk)
    ev = a[0] * vecs[0] + a[1] * vecs[1]
    od = -a[1] * vecs[0] + a[0] * vecs[1]
    out, tags = [], []
    for v, tag, basis in ((ev, "even", cosk), (od, "odd", sink)):
        v = v / np.sqrt(np.sum(w * v * v))
        sgn = np.sign(np.sum(w * v * basis)) or 1.0
        out.append(sgn * v)
        tags.append(tag)
    for extra in vecs[2:]:
        out.append(extra)
        tags.append("")
    return out, tags, kdom


def _polish_vertex(sigma, k0, deltas=(1e-6, 1e-8)):
    """Refine a simple zero of ``sigma`` using its local shape ``s |k - k0|``."""
    for d in deltas:
        sm, sp = sigma(k0 - d), sigma(k0 + d)
        if sm + sp == 0:
            break
        shift = d * (sm - sp) / (sm + sp)
        if abs(shift) < d:
            k0 += shift
    return k0


def eig_scan(curve, k_lo, k_hi, bc, nq=None, step=None, accept_tol=1e-6,
             mult_tol=1e-6, xatol=1e-11, check=True, residual_tol=1e-5):
    """Eigenpairs with ``k_lo <= lambda <= k_hi`` from the boundary-integral scan.

    ``sigma_min`` is sampled on a grid (default step ``pi / (8 diam)``), each
    grid-local minimum is refined by Brent minimization of ``sigma_min^2``,
    and multiplicities are read off by counting singular values below
    ``mult_tol``.  The kernel vectors are turned into traces, rotated to real
    form, tagged by parity, L^2-normalized by the Rellich identity and
    checked against the Helmholtz equation at interior probes.
    """
    bc = _check_bc(bc)
    diam = curve.diameter()
    if nq is None:
        nq = int(4 * np.ceil(max(256, 10 * k_hi * diam) / 4))
    step = step if step is not None else np.pi / (8 * diam)
    grid = np.linspace(k_lo, k_hi, max(3, int(np.ceil((k_hi - k_lo) / step)) + 1))
    sig = np.array([bie_singular_values(curve, k, bc, nq) for k in grid])
    cand = [i for i in range(len(grid))
            if (i == 0 or sig[i] <= sig[i - 1]) and (i == len(grid) - 1 or sig[i] <= sig[i + 1])]
    pairs = []
    for i in cand:
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        sigma = lambda k: bie_singular_values(curve, k, bc, nq)  # noqa: E731
        res = minimize_scalar(lambda k: sigma(k) ** 2, bounds=(lo, hi), method="bounded",
                              options={"xatol": xatol, "maxiter": 200})
        k0 = _polish_vertex(sigma, float(res.x))
        if not (k_lo <= k0 <= k_hi):
            continue
        A = boundary_operator(curve, k0, bc, nq)
        u, sv, vh = np.linalg.svd(A)
        if sv[-1] > accept_tol:
            continue
        mult = int(np.sum(sv < mult_tol))
        vecs = vh[-mult:][::-1].conj().T
        traces = _null_to_traces(curve, k0, bc, nq, vecs)
        nd = _nodes(curve, nq)
        real = _realify(traces, nd.weights)
        members, tags, kdom = _tag_and_orient(real, nd)
        for v, tag in zip(members, tags):
            nrm = rellich_norm_sq(curve, v, k0, bc)
            pair = EigenPair(k0, bc, v / np.sqrt(nrm), curve, True, tag, (),
                             {"sigma_min": float(sv[-1]), "multiplicity": mult,
                              "dominant_mode": kdom})
            if check:
                resid = interior_residual(pair, probe_points(curve))
                pair.meta["probe_residual"] = float(resid.max())
                if resid.max() > residual_tol:
                    raise SpuriousModeError(
                        f"interior residual {resid.max():.2e} at k = {k0:.10f}")
            pairs.append(pair)
    pairs.sort(key=lambda p: (p.lam, p.parity))
    return pairs
