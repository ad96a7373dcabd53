"""Closed analytic curves, their complexification and the glancing geometry.

An interior curve ``H`` and the boundary ``bdry`` of a convex planar domain are
stored as truncated Fourier series.  Points of ``H`` are continued into a strip
``|Im t| <= strip_halfwidth`` and paired with real boundary points through the
complexified distance

    rho(t, s) = sqrt(<q(t) - r(s), q(t) - r(s)>)

(bilinear inner product, principal root).  Rays from ``H`` tangent to ``H``
define the glancing map ``Y`` and, via maximization of ``-Im rho`` in ``s``,
the weight ``S(t)`` that governs exponential growth of continued
eigenfunctions.

Conventions: curves are positively oriented, ``nu`` is the outward unit
normal ``(T_y, -T_x)``, and all parameters are ``2*pi``-periodic.  A curve
with constant speed ``c = L / (2 pi)`` is called arclength-normalized; offsets
``Im t`` convert to arclength offsets through the factor ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import hashlib
import json

import numpy as np

TWO_PI = 2.0 * np.pi
NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50
SEED_GRID = 32


class StripExceededError(ValueError):
    """Requested a complex parameter outside the certified strip."""


class BranchCutError(ValueError):
    """The radicand of the complexified distance left the right half-plane."""


class GlancingError(RuntimeError):
    """Newton failure, branch ambiguity or a saddle in a glancing computation."""


def bilinear(a, b):
    """Bilinear (not Hermitian) pairing of vectors stored along the last axis."""
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]


@dataclass(frozen=True)
class FrenetData:
    tangent: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray


@dataclass(frozen=True, eq=False)
class AnalyticClosedCurve:
    """Closed curve ``t -> (x(t), y(t))`` given by cos/sin Fourier coefficients.

    ``coeffs_x[k] = (a_k, b_k)`` means ``x(t) = sum_k a_k cos(kt) + b_k sin(kt)``.
    """

    coeffs_x: np.ndarray
    coeffs_y: np.ndarray
    strip_halfwidth: float = 0.5
    is_arclength: bool = False
    convex: bool = True
    faces: tuple = ()
    node_offset: float = field(default=0.0, repr=False)

    def __post_init__(self):
        cx = np.atleast_2d(np.asarray(self.coeffs_x, dtype=float))
        cy = np.atleast_2d(np.asarray(self.coeffs_y, dtype=float))
        n = max(len(cx), len(cy))
        cx = np.vstack([cx, np.zeros((n - len(cx), 2))])
        cy = np.vstack([cy, np.zeros((n - len(cy), 2))])
        object.__setattr__(self, "coeffs_x", cx)
        object.__setattr__(self, "coeffs_y", cy)

    # -- constructors -------------------------------------------------------
    @classmethod
    def circle(cls, radius=1.0, center=(0.0, 0.0), strip_halfwidth=2.0):
        cx = [[center[0], 0.0], [radius, 0.0]]
        cy = [[center[1], 0.0], [0.0, radius]]
        return cls(cx, cy, strip_halfwidth=strip_halfwidth, is_arclength=True)

    @classmethod
    def ellipse(cls, a, b, center=(0.0, 0.0), angle=0.0, strip_halfwidth=0.5):
        ca, sa = np.cos(angle), np.sin(angle)
        cx = [[center[0], 0.0], [a * ca, -b * sa]]
        cy = [[center[1], 0.0], [a * sa, b * ca]]
        return cls(cx, cy, strip_halfwidth=strip_halfwidth, is_arclength=(a == b))

    @classmethod
    def from_samples(cls, points, n_harmonics=64, rel_floor=1e-15, **kwargs):
        """Project equispaced samples ``points`` (shape ``(M, 2)``) onto a Fourier series."""
        points = np.asarray(points, dtype=float)
        m = len(points)
        coeffs = []
        for comp in range(2):
            c = np.fft.rfft(points[:, comp]) / m
            kmax = min(n_harmonics, m // 2 - 1)
            ab = np.zeros((kmax + 1, 2))
            ab[0, 0] = c[0].real
            ab[1:, 0] = 2.0 * c[1:kmax + 1].real
            ab[1:, 1] = -2.0 * c[1:kmax + 1].imag
            coeffs.append(ab)
        scale = max(np.abs(coeffs[0]).max(), np.abs(coeffs[1]).max())
        for ab in coeffs:
            ab[np.abs(ab) < rel_floor * scale] = 0.0
        return cls(coeffs[0], coeffs[1], **kwargs)

    # -- evaluation ---------------------------------------------------------
    @property
    def n_harmonics(self) -> int:
        return len(self.coeffs_x) - 1

    def derivative(self, t, order=0, check=True):
        """``order``-th derivative of the (complexified) curve, shape ``t.shape + (2,)``."""
        t = np.asarray(t)
        if check and np.iscomplexobj(t) and np.any(np.abs(t.imag) > self.strip_halfwidth + 1e-14):
            raise StripExceededError(
                f"|Im t| exceeds strip half-width {self.strip_halfwidth}")
        k = np.arange(self.n_harmonics + 1)
        kt = np.multiply.outer(t, k)
        c, s = np.cos(kt), np.sin(kt)
        # d^n/dt^n of (cos, sin)(kt) cycles through (cos, sin) -> (-sin, cos) ...
        kn = k.astype(float) ** order
        shift = order % 4
        basis = [(c, s), (-s, c), (-c, -s), (s, -c)][shift]
        out = []
        for ab in (self.coeffs_x, self.coeffs_y):
            out.append(basis[0] @ (kn * ab[:, 0]) + basis[1] @ (kn * ab[:, 1]))
        return np.stack(out, axis=-1)

    def __call__(self, t):
        return self.derivative(t, 0)

    def speed(self, t):
        return np.linalg.norm(self.derivative(np.asarray(t, dtype=float), 1), axis=-1)

    def curvature(self, t):
        d1 = self.derivative(t, 1)
        d2 = self.derivative(t, 2)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / bilinear(d1, d1) ** 1.5

    def length(self, n=None) -> float:
        n = n or max(512, 8 * self.n_harmonics)
        t = TWO_PI * np.arange(n) / n
        return float(TWO_PI * self.speed(t).mean())

    def diameter(self, n=256) -> float:
        p = self(TWO_PI * np.arange(n) / n)
        return float(np.max(np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)))

    def contains(self, points, n=512) -> np.ndarray:
        """Strict interior test for a convex curve."""
        t = TWO_PI * np.arange(n) / n
        fr = frame(self, t)
        p = self(t)
        pts = np.asarray(points, dtype=float)
        side = np.einsum("...k,jk->...j", pts, fr.normal) - bilinear(p, fr.normal)
        return np.all(side < 0, axis=-1)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "coeffs_x": self.coeffs_x.tolist(),
            "coeffs_y": self.coeffs_y.tolist(),
            "strip_halfwidth": float(self.strip_halfwidth),
            "convex": bool(self.convex),
            "is_arclength": bool(self.is_arclength),
            "faces": list(self.faces),
        }

    def domain_hash(self) -> str:
        return _hash_dict(self.to_dict())


def _hash_dict(d) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def eval_curve(curve: AnalyticClosedCurve, t):
    """Point ``q^C(t)`` in C^2; raises :class:`StripExceededError` outside the strip."""
    return curve.derivative(t, 0)


def frame(curve, s) -> FrenetData:
    """Unit tangent, outward normal and signed curvature at real parameters ``s``."""
    s = np.asarray(s, dtype=float)
    d1 = curve.derivative(s, 1)
    d2 = curve.derivative(s, 2)
    sp = np.linalg.norm(d1, axis=-1)
    tangent = d1 / sp[..., None]
    normal = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)
    kappa = (d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]) / sp ** 3
    return FrenetData(tangent, normal, kappa)


def certify_strip(curve: AnalyticClosedCurve, floor=0.25, tail_tol=1e-10,
                  n_re=256, ladder=None) -> float:
    """Largest strip half-width on a ladder over which the continuation is trusted.

    Two requirements: the bilinear speed ``sqrt<q', q'>`` stays above
    ``floor`` times the minimal real speed on a dense grid, and the dropped
    Fourier tail, extrapolated from the fitted decay rate ``beta`` of the
    retained harmonics and amplified by ``exp(k eps)``, stays below
    ``tail_tol`` relative to the curve size.
    """
    ladder = np.linspace(0.0, 3.0, 61)[1:] if ladder is None else ladder
    t = TWO_PI * np.arange(n_re) / n_re
    vmin = curve.speed(t).min()
    scale = max(np.abs(curve.coeffs_x).max(), np.abs(curve.coeffs_y).max())
    mags = np.hypot(np.abs(curve.coeffs_x).max(axis=1), np.abs(curve.coeffs_y).max(axis=1))
    nz = np.nonzero(mags > 0)[0]
    nz = nz[nz >= 2]
    kmax, beta, m_top = 0, np.inf, 0.0
    if len(nz) >= 3:
        tail = nz[nz >= nz.max() // 2]
        if len(tail) < 3:
            tail = nz[-3:]
        slope = np.polyfit(tail, np.log(mags[tail]), 1)[0]
        beta = max(-slope, 1e-3)
        kmax, m_top = int(nz.max()), float(mags[nz.max()])
    best = 0.0
    for eps in ladder:
        if np.isfinite(beta):
            if eps >= beta:
                break
            err = m_top * np.exp(kmax * eps - beta) / (1.0 - np.exp(eps - beta))
            if err > tail_tol * scale:
                break
        d1 = curve.derivative(t + 1j * eps, 1, check=False)
        if np.min(np.abs(np.sqrt(bilinear(d1, d1)))) < floor * vmin:
            break
        best = float(eps)
    return best


def arclength_reparametrize(curve: AnalyticClosedCurve, n_harmonics=64, n_samples=1024,
                            certify=True) -> AnalyticClosedCurve:
    """Re-express ``curve`` with constant speed ``L / (2 pi)`` on a ``2 pi`` period."""
    m = n_samples
    t = TWO_PI * np.arange(m) / m
    speed = curve.speed(t)
    if speed.min() <= 1e-8 * speed.max():
        raise GlancingError("curve speed vanishes; cannot reparametrize")
    c = np.fft.rfft(speed) / m
    mean = c[0].real
    k = np.arange(1, len(c))
    # Lambda(t) = mean*t + periodic part of the cumulative arclength
    ck = c[1:]

    def lam(x):
        ph = np.exp(1j * np.multiply.outer(x, k))
        return mean * x + 2.0 * np.real((ph - 1.0) @ (ck / (1j * k)))

    def dlam(x):
        ph = np.exp(1j * np.multiply.outer(x, k))
        return mean + 2.0 * np.real(ph @ ck)

    target = mean * t
    x = t.copy()
    for _ in range(NEWTON_MAXITER):
        step = (lam(x) - target) / dlam(x)
        x -= step
        if np.max(np.abs(step)) < 1e-15:
            break
    pts = curve(x)
    new = AnalyticClosedCurve.from_samples(
        pts, n_harmonics=n_harmonics, strip_halfwidth=curve.strip_halfwidth,
        is_arclength=True, convex=curve.convex, faces=curve.faces)
    if certify:
        eps = certify_strip(new)
        new = AnalyticClosedCurve(new.coeffs_x, new.coeffs_y, strip_halfwidth=eps,
                                  is_arclength=True, convex=curve.convex, faces=curve.faces)
    return new


# ---------------------------------------------------------------------------
# complexified distance
# ---------------------------------------------------------------------------

def _rho(H, bdry, t, s):
    """Return ``(rho, D)`` with ``D = q(t) - r(s)``, broadcasting ``t`` against ``s``."""
    t = np.asarray(t).astype(complex)
    s = np.asarray(s, dtype=float)
    D = H.derivative(t, 0) - bdry.derivative(s, 0)
    rad = bilinear(D, D)
    if np.any(rad.real <= 0):
        raise BranchCutError("radicand of the complexified distance has Re <= 0")
    return np.sqrt(rad), D


def complex_distance(H, bdry, t, s):
    """``rho^C(t, s)``: principal root of ``<q^C(t) - r(s), q^C(t) - r(s)>``."""
    return _rho(H, bdry, t, s)[0]


def _rho_s_derivs(H, bdry, t, s):
    rho, D = _rho(H, bdry, t, s)
    s = np.asarray(s, dtype=float)
    r1 = bdry.derivative(s, 1)
    r2 = bdry.derivative(s, 2)
    rs = -bilinear(D, r1) / rho
    rss = (bilinear(r1, r1) - bilinear(D, r2) - rs * rs) / rho
    return rho, rs, rss


# ---------------------------------------------------------------------------
# glancing map
# ---------------------------------------------------------------------------

def _wrap(x):
    return (x + np.pi) % TWO_PI - np.pi


def _bracket_newton(f, a, b, x0=None):
    """Vectorized safeguarded Newton for ``f(x) -> (value, derivative)`` on ``[a, b]``."""
    fa, _ = f(a)
    x = 0.5 * (a + b) if x0 is None else x0.copy()
    for _ in range(NEWTON_MAXITER):
        fx, dfx = f(x)
        if np.max(np.abs(fx)) <= NEWTON_TOL:
            return x
        same = np.sign(fx) == np.sign(fa)
        a = np.where(same, x, a)
        fa = np.where(same, fx, fa)
        b = np.where(same, b, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x - fx / dfx
        bad = ~np.isfinite(xn) | (xn <= np.minimum(a, b)) | (xn >= np.maximum(a, b))
        x = np.where(bad, 0.5 * (a + b), xn)
    fx, _ = f(x)
    if np.max(np.abs(fx)) > 1e3 * NEWTON_TOL:
        raise GlancingError("Newton iteration did not converge")
    return x


def _cyclic_brackets(vals, valid):
    """Index of the first cyclic sign change in each row where ``valid`` holds.

    Zeros count as positive so that a root sitting exactly on a node is
    bracketed once rather than twice.
    """
    pos = vals >= 0
    flips = (pos != np.roll(pos, -1, axis=1)) & valid
    count = flips.sum(axis=1)
    return np.argmax(flips, axis=1), count


def glancing_map(H, bdry, s, branch=-1):
    """Tangency parameter ``Y(s)`` on ``H`` seen from the boundary point ``r(s)``.

    ``branch`` selects the sign of ``<T_H(Y), omega>`` with
    ``omega = (q(Y) - r(s)) / |q(Y) - r(s)|``.  The returned values are lifted so
    that ``Y(s) - s`` lies in ``(-pi, pi]``.
    """
    if branch not in (-1, 1):
        raise ValueError("branch must be -1 or +1")
    s_in = np.asarray(s, dtype=float)
    s = np.atleast_1d(s_in).ravel()
    grid = TWO_PI * np.arange(SEED_GRID) / SEED_GRID
    fr = frame(H, grid)
    Q = H(grid)
    R = bdry(s)
    diff = Q[None, :, :] - R[:, None, :]
    F = bilinear(diff, fr.normal[None])
    G = bilinear(diff, fr.tangent[None])
    Gn = np.roll(G, -1, axis=1)
    idx, count = _cyclic_brackets(F, (np.sign(G) == branch) & (np.sign(Gn) == branch))
    if np.any(count != 1):
        raise GlancingError("tangency branch ambiguous or missing")
    a = grid[idx]
    b = a + TWO_PI / SEED_GRID

    def f(y):
        fy = frame(H, y)
        dq = H(y) - R
        val = bilinear(fy.normal, dq)
        der = fy.curvature * H.speed(y) * bilinear(fy.tangent, dq)
        return val, der

    y = _bracket_newton(f, a, b)
    y = s + _wrap(y - s)
    return y.reshape(s_in.shape) if s_in.ndim else float(y[0])


def glancing_map_derivative(H, bdry, s, branch=-1):
    """``dY/ds`` from implicit differentiation of the tangency condition."""
    y = np.asarray(glancing_map(H, bdry, s, branch))
    fy = frame(H, y)
    dq = H(y) - bdry(s)
    num = bilinear(fy.normal, bdry.derivative(np.asarray(s, dtype=float), 1))
    den = fy.curvature * H.speed(y) * bilinear(fy.tangent, dq)
    return num / den


def glancing_inverse(H, bdry, t, branch=-1):
    """``Y^{-1}(t)``: boundary parameter whose tangent ray touches ``H`` at real ``t``.

    The ray leaves ``q(t)`` in direction ``-branch * T_H(t)`` and exits the
    convex boundary exactly once.
    """
    t_in = np.asarray(t, dtype=float)
    t = np.atleast_1d(t_in).ravel()
    fr = frame(H, t)
    q = H(t)
    direction = -branch * fr.tangent
    perp = np.stack([-direction[:, 1], direction[:, 0]], axis=-1)
    grid = TWO_PI * np.arange(4 * SEED_GRID) / (4 * SEED_GRID)
    R = bdry(grid)
    diff = R[None, :, :] - q[:, None, :]
    F = bilinear(diff, perp[:, None, :])
    ahead = bilinear(diff, direction[:, None, :]) > 0
    idx, count = _cyclic_brackets(F, ahead & np.roll(ahead, -1, axis=1))
    if np.any(count != 1):
        raise GlancingError("tangent ray exit ambiguous")
    a = grid[idx]
    b = a + TWO_PI / (4 * SEED_GRID)

    def f(x):
        return bilinear(bdry(x) - q, perp), bilinear(bdry.derivative(x, 1), perp)

    x = _bracket_newton(f, a, b)
    x = t + _wrap(x - t)
    return x.reshape(t_in.shape) if t_in.ndim else float(x[0])


# ---------------------------------------------------------------------------
# critical point and weight
# ---------------------------------------------------------------------------

def critical_point(H, bdry, t, max_step=0.2):
    """Maximizer ``s*(t)`` of ``s -> -Im rho^C(t, s)`` near the glancing ray.

    Seeded at ``Y^{-1}(Re t)`` on the branch matching the sign of ``Im t``
    (``Y_-`` for ``Im t > 0``, ``Y_+`` for ``Im t < 0``).
    """
    t_in = np.asarray(t, dtype=complex)
    t = np.atleast_1d(t_in).ravel()
    seed = np.empty(t.shape)
    up = t.imag >= 0
    if up.any():
        seed[up] = glancing_inverse(H, bdry, t.real[up], branch=-1)
    if (~up).any():
        seed[~up] = glancing_inverse(H, bdry, t.real[~up], branch=1)
    s = seed.copy()
    live = t.imag != 0
    if live.any():
        tt = t[live]
        x = s[live]
        for _ in range(NEWTON_MAXITER):
            _, rs, rss = _rho_s_derivs(H, bdry, tt, x)
            g1, g2 = rs.imag, rss.imag
            if np.max(np.abs(g1)) <= NEWTON_TOL:
                break
            step = np.clip(-g1 / g2, -max_step, max_step)
            step = np.where(g2 > 0, step, np.sign(-g1) * max_step)
            x = x + step
        _, rs, rss = _rho_s_derivs(H, bdry, tt, x)
        if np.max(np.abs(rs.imag)) > 1e3 * NEWTON_TOL:
            raise GlancingError("critical point Newton did not converge")
        if np.any(rss.imag <= 0):
            raise GlancingError("critical point is not a maximum (strip too wide)")
        s[live] = x
    return s.reshape(t_in.shape) if t_in.ndim else float(s[0])


def weight(H, bdry, t):
    """``S(t) = max_s (-Im rho^C(t, s))``; zero on the real axis."""
    t = np.asarray(t, dtype=complex)
    s = critical_point(H, bdry, t)
    out = -complex_distance(H, bdry, t, s).imag
    return np.where(t.imag == 0, 0.0, out) if np.ndim(out) else float(0.0 if t.imag == 0 else out)


def weight_asymptotic(kappa, im_t):
    """Cubic expansion ``Im t + kappa^2/6 (Im t)^3`` with ``Im t`` in arclength units."""
    im_t = np.asarray(im_t, dtype=float)
    if np.any(im_t < 0):
        raise ValueError("Im t must be non-negative")
    out = im_t + np.asarray(kappa) ** 2 / 6.0 * im_t ** 3
    return float(out) if np.ndim(out) == 0 else out


def glancing_taylor(H, bdry, t, s, branch=-1):
    """Cubic expansion of ``rho^C(t, s)`` about the tangency ``t = Y(s)``.

    With ``tau = c (t - Y(s))`` the arclength offset along ``H``,

        rho ~ d + branch * (tau - kappa_H^2 tau^3 / 6),

    where ``d = |q(Y(s)) - r(s)|``.  Returns ``(Re, Im)`` of the prediction.
    """
    y = np.asarray(glancing_map(H, bdry, s, branch))
    c = H.speed(y)
    d = np.linalg.norm(H(y) - bdry(np.asarray(s, dtype=float)), axis=-1)
    kappa = H.curvature(y)
    tau = c * (np.asarray(t, dtype=complex) - y)
    pred = d + branch * (tau - kappa ** 2 * tau ** 3 / 6.0)
    return pred.real, pred.imag


@dataclass(frozen=True)
class GlancingChart:
    """Tabulated glancing data for a fixed pair ``(H, bdry)`` and branch."""

    s: np.ndarray
    Y: np.ndarray
    t_grid: np.ndarray
    Y_inverse: np.ndarray
    strip: np.ndarray
    s_star: np.ndarray
    S: np.ndarray
    branch: int = -1

    @classmethod
    def build(cls, H, bdry, n=256, im_values=(0.05, 0.1, 0.2), branch=-1):
        s = TWO_PI * np.arange(n) / n - np.pi
        Y = glancing_map(H, bdry, s, branch)
        Yinv = glancing_inverse(H, bdry, s, branch)
        strip = s[None, :] + 1j * np.asarray(im_values)[:, None]
        if branch == 1:
            strip = strip.conj()
        s_star = critical_point(H, bdry, strip)
        S = -complex_distance(H, bdry, strip, s_star).imag
        return cls(s, Y, s, Yinv, strip, s_star, S, branch)

    def roundtrip_error(self, H, bdry) -> float:
        back = glancing_inverse(H, bdry, self.Y, self.branch)
        return float(np.max(np.abs(_wrap(back - self.s))))


# ---------------------------------------------------------------------------
# piecewise-analytic boundary: the stadium
# ---------------------------------------------------------------------------

def _grade(sig, p):
    """Polynomial grading ``g = sig^p / (sig^p + (1-sig)^p)`` and its derivatives."""
    a = sig ** p
    b = (1.0 - sig) ** p
    D = a + b
    g = a / D
    da = p * sig ** (p - 1)
    db = -p * (1.0 - sig) ** (p - 1)
    dD = da + db
    g1 = (da * D - a * dD) / D ** 2
    d2a = p * (p - 1) * sig ** (p - 2)
    d2b = p * (p - 1) * (1.0 - sig) ** (p - 2)
    d2D = d2a + d2b
    num = da * D - a * dD
    dnum = d2a * D - a * d2D
    g2 = dnum / D ** 2 - 2.0 * num * dD / D ** 3
    return g, g1, g2


@dataclass(frozen=True, eq=False)
class StadiumCurve:
    """Bunimovich stadium: flats of length ``2 a`` joined by half-discs of radius ``R``.

    The global parameter ``tau`` in ``[0, 2 pi)`` is split into four panels of
    width ``pi/2`` (one per face); inside each panel arclength is graded
    polynomially with exponent ``grading`` so that nodes cluster at the
    curvature jumps.  Quadrature nodes use a half-step offset so that no node
    falls on a junction.
    """

    half_flat: float = 1.0
    radius: float = 1.0
    grading: int = 3
    convex: bool = True
    node_offset: float = 0.5

    @property
    def face_lengths(self):
        a, R = self.half_flat, self.radius
        return np.array([2 * a, np.pi * R, 2 * a, np.pi * R])

    @property
    def faces(self):
        return ("flat_bottom", "arc_right", "flat_top", "arc_left")

    @property
    def length(self):
        return float(self.face_lengths.sum())

    def diameter(self, n=None):
        return 2.0 * (self.half_flat + self.radius)

    def _arc(self, s, order):
        """Arclength-parametrized point (order 0), tangent (1) or second derivative (2)."""
        a, R = self.half_flat, self.radius
        ends = np.concatenate(([0.0], np.cumsum(self.face_lengths)))
        s = np.mod(s, ends[-1])
        out = np.zeros(s.shape + (2,))
        # bottom flat from (-a, -R) to (a, -R)
        m = s < ends[1]
        u = s[m]
        if order == 0:
            out[m] = np.stack([-a + u, -R * np.ones_like(u)], -1)
        elif order == 1:
            out[m] = [1.0, 0.0]
        m = (s >= ends[1]) & (s < ends[2])
        ph = -np.pi / 2 + (s[m] - ends[1]) / R
        out[m] = self._circle(ph, order, (a, 0.0))
        m = (s >= ends[2]) & (s < ends[3])
        u = s[m] - ends[2]
        if order == 0:
            out[m] = np.stack([a - u, R * np.ones_like(u)], -1)
        elif order == 1:
            out[m] = [-1.0, 0.0]
        m = s >= ends[3]
        ph = np.pi / 2 + (s[m] - ends[3]) / R
        out[m] = self._circle(ph, order, (-a, 0.0))
        return out

    def _circle(self, ph, order, center):
        R = self.radius
        c, s = np.cos(ph), np.sin(ph)
        if order == 0:
            return np.stack([center[0] + R * c, center[1] + R * s], -1)
        if order == 1:
            return np.stack([-s, c], -1)
        return np.stack([-c, -s], -1) / R

    def arclength(self, tau, order=0):
        """Graded arclength ``s(tau)`` and derivatives up to ``order`` (list)."""
        tau = np.asarray(tau, dtype=float)
        panel = np.floor(np.mod(tau, TWO_PI) / (np.pi / 2)).astype(int) % 4
        sig = (np.mod(tau, TWO_PI) - panel * np.pi / 2) / (np.pi / 2)
        ends = np.concatenate(([0.0], np.cumsum(self.face_lengths)))
        ell = self.face_lengths[panel]
        g, g1, g2 = _grade(np.clip(sig, 0.0, 1.0), self.grading)
        scale = 1.0 / (np.pi / 2)
        return ends[panel] + ell * g, ell * g1 * scale, ell * g2 * scale ** 2

    def derivative(self, tau, order=0, check=True):
        tau = np.asarray(tau, dtype=float)
        s, s1, s2 = self.arclength(tau)
        if order == 0:
            return self._arc(s, 0)
        x1 = self._arc(s, 1)
        if order == 1:
            return x1 * s1[..., None]
        if order == 2:
            return self._arc(s, 2) * (s1 ** 2)[..., None] + x1 * s2[..., None]
        raise ValueError("stadium derivatives implemented up to order 2")

    def __call__(self, tau):
        return self.derivative(tau, 0)

    def eval_arclength(self, s, order=0):
        return self._arc(np.asarray(s, dtype=float), order)

    def speed(self, tau):
        return np.linalg.norm(self.derivative(tau, 1), axis=-1)

    def curvature(self, tau):
        d1 = self.derivative(tau, 1)
        d2 = self.derivative(tau, 2)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / np.linalg.norm(d1, axis=-1) ** 3

    def contains(self, points):
        p = np.asarray(points, dtype=float)
        a, R = self.half_flat, self.radius
        x = np.clip(p[..., 0], -a, a)
        return np.hypot(p[..., 0] - x, p[..., 1]) < R

    def to_dict(self) -> dict:
        return {
            "coeffs_x": [],
            "coeffs_y": [],
            "strip_halfwidth": 0.0,
            "convex": True,
            "faces": [
                {"kind": "stadium", "half_flat": self.half_flat, "radius": self.radius,
                 "grading": self.grading},
            ],
        }

    def domain_hash(self) -> str:
        return _hash_dict(self.to_dict())


def curve_from_dict(d: dict):
    """Build a curve from its JSON document (analytic series or stadium faces)."""
    faces = d.get("faces") or []
    if not d.get("coeffs_x") and faces and faces[0].get("kind") == "stadium":
        f = faces[0]
        return StadiumCurve(f.get("half_flat", 1.0), f.get("radius", 1.0), f.get("grading", 3))
    return AnalyticClosedCurve(
        np.asarray(d["coeffs_x"], dtype=float),
        np.asarray(d["coeffs_y"], dtype=float),
        strip_halfwidth=float(d.get("strip_halfwidth", 0.5)),
        is_arclength=bool(d.get("is_arclength", False)),
        convex=bool(d.get("convex", True)),
        faces=tuple(faces),
    )


def load_curve(path):
    with open(path) as fh:
        return curve_from_dict(json.load(fh))


def save_curve(curve, path):
    with open(path, "w") as fh:
        json.dump(curve.to_dict(), fh, indent=2)
