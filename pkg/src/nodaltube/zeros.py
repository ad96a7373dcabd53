"""Zero counting, frequency functions and conformal transport to the unit disc.

Real nodal intersections are counted from cyclic sign changes of the
restriction ``u^H`` on ``[-pi, pi)``.  Complex zeros are counted with the
argument principle along closed contours.  The frequency function of a
holomorphic ``f`` on the unit disc is

    F(f) = int_{B_1} |f'|^2 dA / int_0^{2pi} |f(e^{i theta})|^2 d theta,

and the chain ``n_real <= n_complex <= 2F <= 2 ||d_theta g|| / ||g||`` is
evaluated for ``g = u^{H,C} o kappa`` where ``kappa`` maps the unit disc onto
an oval ``C_eps`` containing the strip ``[-pi, pi] x [-eps, eps]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import warnings

import mpmath as mp
import numpy as np

from .geometry import TWO_PI, AnalyticClosedCurve

WINDING_ERROR_TOL = 0.1
WINDING_WARN_TOL = 0.01
ZERO_FLOOR = 1e-12
TANGENTIAL_ATOL = 1e-9


class ResolutionWarning(UserWarning):
    """Consecutive zeros are closer than four sample spacings."""


class ZeroOnContourError(ValueError):
    """The sampled function vanishes (to the floor) on the contour."""


class UnwrapError(RuntimeError):
    """Phase unwrapping could not reach steps below pi/2, or the winding is not integral."""


class ZeroDenominatorError(ValueError):
    """The boundary norm of the function is below the floor."""


class ConformalMapDivergence(RuntimeError):
    """The Theodorsen iteration did not converge."""


# ---------------------------------------------------------------------------
# real zeros
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RealZeroCount:
    count: int
    locations: np.ndarray
    tangential: np.ndarray

    def __int__(self):
        return self.count


def _bisect(sampler, a, b, fa, iters=60, tol=1e-14):
    for _ in range(iters):
        if b - a <= tol:
            break
        mid = 0.5 * (a + b)
        fm = float(sampler(np.array([mid]))[0])
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(fa):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def count_real_zeros(values, t=None, sampler=None, refine=True, atol=None) -> RealZeroCount:
    """Count sign changes of periodic samples ``values`` at nodes ``t`` on a period.

    ``t`` defaults to the uniform grid on ``[-pi, pi)``.  With ``refine`` and a
    ``sampler`` each bracketed zero is located by bisection, otherwise by
    linear interpolation.  Local minima of ``|u|`` below ``atol`` (default
    ``1e-9 ||u||_inf``) without a sign change are returned as ``tangential``
    and not counted.
    """
    u = np.asarray(values, dtype=float)
    n = len(u)
    if t is None:
        t = TWO_PI * np.arange(n) / n - np.pi
    t = np.asarray(t, dtype=float)
    period = TWO_PI
    scale = float(np.max(np.abs(u))) if n else 0.0
    atol = TANGENTIAL_ATOL * scale if atol is None else atol
    if scale == 0.0:
        return RealZeroCount(0, np.empty(0), np.empty(0))
    nz = np.nonzero(u != 0.0)[0]
    sgn = np.sign(u[nz])
    nxt = np.roll(np.arange(len(nz)), -1)
    locs, tang = [], []
    for i, j in zip(range(len(nz)), nxt):
        a, b = nz[i], nz[j]
        ta, tb = t[a], t[b] + (period if b <= a else 0.0)
        if sgn[i] != sgn[j]:
            if refine and sampler is not None:
                wrapped = lambda x: sampler(np.mod(x + np.pi, period) - np.pi)  # noqa: E731
                z = _bisect(wrapped, ta, tb, u[a])
            elif b == (a + 1) % n:
                z = ta + (tb - ta) * u[a] / (u[a] - u[b])
            else:
                z = 0.5 * (ta + tb)
            locs.append(z)
        elif (b - a) % n != 1:
            tang.append(0.5 * (ta + tb))
    # near-tangential minima without a sign change
    mag = np.abs(u)
    prev, nxtv = np.roll(mag, 1), np.roll(mag, -1)
    cand = np.nonzero((mag < atol) & (mag <= prev) & (mag <= nxtv) & (u != 0.0))[0]
    for c in cand:
        if np.sign(u[c - 1]) == np.sign(u[c]) == np.sign(u[(c + 1) % n]):
            tang.append(t[c])
    locs = np.sort(np.mod(np.asarray(locs) + np.pi, period) - np.pi)
    if len(locs) > 1:
        gaps = np.diff(np.concatenate((locs, [locs[0] + period])))
        spacing = period / n
        if np.min(gaps) < 4 * spacing:
            warnings.warn("consecutive zeros closer than 4 sample spacings; increase sampling",
                          ResolutionWarning, stacklevel=2)
    return RealZeroCount(len(locs), locs, np.asarray(sorted(tang)))


def real_zero_grid(lam, length, minimum=256) -> np.ndarray:
    """Uniform grid on ``[-pi, pi)`` with at least 8 nodes per expected oscillation."""
    n = max(minimum, int(np.ceil(8 * lam * length / TWO_PI)))
    n = 1 << int(np.ceil(np.log2(n)))
    return TWO_PI * np.arange(n) / n - np.pi


# ---------------------------------------------------------------------------
# argument principle
# ---------------------------------------------------------------------------

def circle_contour(radius=1.0, center=0.0):
    return lambda th: center + radius * np.exp(1j * np.asarray(th))


def ellipse_contour(a, b, center=0.0):
    return lambda th: center + a * np.cos(th) + 1j * b * np.sin(th)


def rectangle_contour(x0, x1, y0, y1):
    """Counter-clockwise rectangle boundary parametrized on ``[0, 2 pi)``."""
    corners = np.array([x0 + 1j * y0, x1 + 1j * y0, x1 + 1j * y1, x0 + 1j * y1, x0 + 1j * y0])

    def path(th):
        u = np.mod(np.asarray(th, dtype=float), TWO_PI) / TWO_PI * 4.0
        k = np.minimum(u.astype(int), 3)
        frac = u - k
        return corners[k] + frac * (corners[k + 1] - corners[k])

    return path


def winding_number(f, contour, n0=256, max_levels=48, max_points=2_000_000,
                   floor=ZERO_FLOOR) -> float:
    """Raw winding number of ``f`` along ``contour(theta)``, ``theta`` in ``[0, 2 pi]``.

    Segments whose phase increment reaches ``pi/2`` are bisected until all
    increments are below ``pi/2``.  The returned sum of principal increments
    over a closed loop is an integer by construction; refinement cannot
    recover a step that wraps a full turn, so ``n0`` must sample each
    oscillation of ``arg f`` at least once.
    """
    th = np.linspace(0.0, TWO_PI, n0 + 1)
    vals = np.asarray(f(contour(th)), dtype=complex)
    vals[-1] = vals[0]
    for _ in range(max_levels):
        mag = np.abs(vals)
        if not np.all(np.isfinite(vals)):
            raise UnwrapError("non-finite samples on the contour")
        if np.min(mag) <= floor * np.max(mag):
            raise ZeroOnContourError("function vanishes on the contour")
        dphi = np.angle(vals[1:] / vals[:-1])
        bad = np.nonzero(np.abs(dphi) >= 0.5 * np.pi)[0]
        if bad.size == 0:
            return float(np.sum(dphi) / TWO_PI)
        if len(th) + bad.size > max_points:
            break
        mid = 0.5 * (th[bad] + th[bad + 1])
        mval = np.asarray(f(contour(mid)), dtype=complex)
        th = np.insert(th, bad + 1, mid)
        vals = np.insert(vals, bad + 1, mval)
    raise UnwrapError("phase increments stayed above pi/2 after refinement")


def count_complex_zeros(f, contour, n0=256, floor=ZERO_FLOOR) -> int:
    """Number of zeros of ``f`` inside a positively oriented closed contour."""
    raw = winding_number(f, contour, n0=n0, floor=floor)
    k = int(round(raw))
    dev = abs(raw - k)
    if dev > WINDING_ERROR_TOL:
        raise UnwrapError(f"winding {raw:.4f} is not integral")
    if dev > WINDING_WARN_TOL:
        warnings.warn(f"winding {raw:.4f} deviates from an integer by {dev:.3g}", stacklevel=2)
    return k


def _newton_zero(f, z, df=None, h=1e-6, iters=40):
    for _ in range(iters):
        fz = f(np.array([z]))[0]
        if df is not None:
            d = df(np.array([z]))[0]
        else:
            d = (f(np.array([z + h]))[0] - f(np.array([z - h]))[0]) / (2 * h)
        if d == 0:
            break
        step = fz / d
        z = z - step
        if abs(step) < 1e-14 * max(1.0, abs(z)):
            break
    return complex(z)


def locate_zeros(f, box, df=None, n0=64, newton_size=0.5, min_size=1e-4, depth=0,
                 max_depth=60):
    """Zeros of ``f`` inside the rectangle ``box = (x0, x1, y0, y1)``.

    The argument principle counts zeros per rectangle; rectangles are bisected
    along their longer side.  A cell holding a single zero and smaller than
    ``newton_size`` is polished by Newton from its centre and accepted if the
    iterate stays in the cell; cells below ``min_size`` return their centre
    (repeated by the count, so clusters keep their multiplicity).
    """
    x0, x1, y0, y1 = box
    try:
        k = count_complex_zeros(f, rectangle_contour(x0, x1, y0, y1), n0=n0)
    except ZeroOnContourError:
        dx, dy = 1e-7 * (x1 - x0), 1e-7 * (y1 - y0)
        return locate_zeros(f, (x0 - dx * 3.1, x1 + dx * 1.7, y0 - dy * 2.3, y1 + dy * 1.3),
                            df, n0, newton_size, min_size, depth, max_depth)
    if k == 0:
        return []
    size = max(x1 - x0, y1 - y0)
    centre = 0.5 * (x0 + x1) + 0.5j * (y0 + y1)
    if k == 1 and size < newton_size:
        z = _newton_zero(f, centre, df)
        if x0 <= z.real <= x1 and y0 <= z.imag <= y1:
            return [z]
    if size < min_size or depth >= max_depth:
        return [complex(centre)] * k
    if x1 - x0 >= y1 - y0:
        xm = 0.5 * (x0 + x1) + 1.3e-9 * (x1 - x0)
        halves = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
    else:
        ym = 0.5 * (y0 + y1) + 1.7e-9 * (y1 - y0)
        halves = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
    out = []
    for bx in halves:
        out.extend(locate_zeros(f, bx, df, n0, newton_size, min_size, depth + 1, max_depth))
    return out


# ---------------------------------------------------------------------------
# frequency function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyResult:
    F: float
    F_boundary: float
    ratio: float
    dirichlet_energy: float
    boundary_norm_sq: float

    @property
    def bound_holds(self) -> bool:
        return self.F <= self.ratio * (1 + 1e-12)


def _taylor_derivative(f, n):
    """``f'`` from the FFT Taylor coefficients of ``f`` on the unit circle."""
    th = TWO_PI * np.arange(n) / n
    c = np.fft.fft(f(np.exp(1j * th))) / n
    k = np.arange(n)
    if np.max(np.abs(c[n // 2:])) > 1e-10 * np.max(np.abs(c)):
        raise ValueError("Taylor coefficients not resolved (negative-frequency content)")
    dc = (k[1:n // 2] * c[1:n // 2])

    def df(z):
        z = np.asarray(z, dtype=complex)
        return np.polyval(dc[::-1], z)

    return df


def frequency_function(f, df=None, n_theta=256, n_r=64, floor=1e-300) -> FrequencyResult:
    """Frequency function of ``f`` holomorphic on a neighbourhood of the closed unit disc.

    ``F`` is the polar tensor quadrature (Gauss-Legendre in ``r``, trapezoid in
    ``theta``) of the Dirichlet energy over the boundary norm.  ``F_boundary``
    evaluates the energy by Green's identity
    ``int |f'|^2 dA = int_0^{2pi} Re f d_theta(Im f) d theta``.  ``ratio`` is
    ``||d_theta f|| / ||f||`` on the unit circle.
    """
    if df is None:
        df = _taylor_derivative(f, max(2 * n_theta, 512))
    th = TWO_PI * np.arange(n_theta) / n_theta
    z = np.exp(1j * th)
    fb = np.asarray(f(z), dtype=complex)
    norm_sq = float(np.sum(np.abs(fb) ** 2) * TWO_PI / n_theta)
    if norm_sq <= floor:
        raise ZeroDenominatorError("boundary norm of f is below the floor")
    dth = 1j * z * np.asarray(df(z), dtype=complex)
    ratio = float(np.sqrt(np.sum(np.abs(dth) ** 2) * TWO_PI / n_theta / norm_sq))
    green = float(np.sum(fb.real * dth.imag) * TWO_PI / n_theta)
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (x + 1.0)
    w = 0.5 * w
    zz = r[:, None] * z[None, :]
    energy = float(np.sum(np.abs(np.asarray(df(zz))) ** 2 * (w * r)[:, None]) * TWO_PI / n_theta)
    return FrequencyResult(energy / norm_sq, green / norm_sq, ratio, energy, norm_sq)


# ---------------------------------------------------------------------------
# ovals and conformal maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OvalDomain:
    """Analytic oval ``C_eps`` in the complex ``t``-plane of an interior curve.

    ``curve`` carries the boundary as a closed curve in ``R^2 = C``;
    ``semi_axes`` is set for the ellipse family.
    """

    curve: AnalyticClosedCurve
    eps: float
    semi_axes: tuple | None = None

    @classmethod
    def ellipse(cls, eps, a=None, b=None, check=True):
        a = 1.5 * np.pi if a is None else float(a)
        b = 1.75 * eps if b is None else float(b)
        oval = cls(AnalyticClosedCurve.ellipse(a, b), float(eps), (a, b))
        if check:
            oval.check_constraints()
        return oval

    def boundary(self, phi):
        """Boundary points ``w(phi)`` and ``dw/dphi`` as complex arrays."""
        phi = np.asarray(phi)
        if not np.iscomplexobj(phi):
            phi = phi.astype(float)
        p0 = self.curve.derivative(phi, 0, check=False)
        p1 = self.curve.derivative(phi, 1, check=False)
        return p0[..., 0] + 1j * p0[..., 1], p1[..., 0] + 1j * p1[..., 1]

    def contains(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        if self.semi_axes is not None:
            a, b = self.semi_axes
            return (w.real / a) ** 2 + (w.imag / b) ** 2 < 1.0
        pts = np.stack([w.real, w.imag], -1)
        return self.curve.contains(pts)

    def check_constraints(self, n=2048):
        """Verify ``S_{eps,pi} subset C_eps subset S_{2eps,2pi}`` and the clearance bounds."""
        eps = self.eps
        phi = TWO_PI * np.arange(n) / n
        w, _ = self.boundary(phi)
        rect = np.concatenate([
            np.linspace(-np.pi, np.pi, 257) + 1j * eps,
            np.linspace(-np.pi, np.pi, 257) - 1j * eps,
            -np.pi + 1j * np.linspace(-eps, eps, 33),
            np.pi + 1j * np.linspace(-eps, eps, 33),
        ])
        if not np.all(self.contains(rect)):
            raise ValueError("oval does not contain the strip [-pi, pi] x [-eps, eps]")
        if np.max(np.abs(w.imag)) > 1.75 * eps * (1 + 1e-12):
            raise ValueError("oval exceeds |Im t| <= 7 eps / 4")
        if np.max(np.abs(w.real)) > TWO_PI or np.max(np.abs(w.imag)) > 2 * eps * (1 + 1e-12):
            raise ValueError("oval leaves the strip [-2 pi, 2 pi] x [-2 eps, 2 eps]")
        real_cross = np.abs(w.real[np.abs(w.imag) < 1e-12 * max(1.0, eps)])
        if self.semi_axes is not None:
            real_cross = np.array([self.semi_axes[0]])
        if real_cross.size and np.min(real_cross) - np.pi < 0.5 * np.pi - 1e-12:
            raise ValueError("real-axis clearance of the oval from [-pi, pi] is below pi/2")


def _polar_radius(curve, phi, n_seed=4096):
    """Radius of a star-shaped (about 0) closed curve along the ray of angle ``phi``."""
    ts = TWO_PI * np.arange(n_seed) / n_seed
    p = curve.derivative(ts, 0)
    ang = np.unwrap(np.arctan2(p[:, 1], p[:, 0]))
    if ang[-1] < ang[0]:
        raise ValueError("curve must be positively oriented")
    ang = np.concatenate((ang, [ang[0] + TWO_PI]))
    ts = np.concatenate((ts, [TWO_PI]))
    phi = np.asarray(phi, dtype=float)
    target = ang[0] + np.mod(phi - ang[0], TWO_PI)
    t = np.interp(target, ang, ts)
    for _ in range(30):
        p0 = curve.derivative(t, 0)
        p1 = curve.derivative(t, 1)
        r2 = p0[..., 0] ** 2 + p0[..., 1] ** 2
        cur = np.arctan2(p0[..., 1], p0[..., 0])
        g = np.angle(np.exp(1j * (cur - target)))
        dg = (p0[..., 0] * p1[..., 1] - p0[..., 1] * p1[..., 0]) / r2
        step = g / dg
        t = t - step
        if np.max(np.abs(step)) < 1e-15:
            break
    return np.hypot(*np.moveaxis(curve.derivative(t, 0), -1, 0))


class _DiscMap:
    """Shared interface of the disc-to-oval maps."""

    oval: OvalDomain

    def boundary_correspondence(self, theta):
        return self.forward(np.exp(1j * np.asarray(theta, dtype=float)))

    def radial_defect(self, n=128) -> float:
        """Max distance of ``kappa(e^{i theta})`` from the oval boundary (relative radius)."""
        w = self.boundary_correspondence(TWO_PI * np.arange(n) / n)
        if self.oval.semi_axes is not None:
            a, b = self.oval.semi_axes
            return float(np.max(np.abs(np.sqrt((w.real / a) ** 2 + (w.imag / b) ** 2) - 1.0)))
        r = _polar_radius(self.oval.curve, np.angle(w))
        return float(np.max(np.abs(np.abs(w) / r - 1.0)))

    def univalence_winding(self, radius=0.99, n0=256) -> int:
        """Zeros of ``kappa'`` inside ``|z| = radius`` (zero certifies local univalence)."""
        return count_complex_zeros(self.derivative, circle_contour(radius), n0=n0)

    def composition_error(self, points) -> float:
        points = np.asarray(points, dtype=complex)
        return float(np.max(np.abs(self.forward(self.inverse(points)) - points)))

    def covering_radius(self, n=65) -> float:
        """Smallest ``delta`` with ``kappa(B_delta)`` containing ``[-pi, pi]``."""
        x = np.linspace(-np.pi, np.pi, n)
        return float(np.max(np.abs(self.inverse(x.astype(complex)))))


class EllipseDiscMap(_DiscMap):
    """Exact Riemann map of the unit disc onto an ellipse, via Jacobi elliptic functions.

    With ``c`` the focal distance and parameter ``m`` fitted to the axis ratio,

        kappa(z)      = c sin( pi / (2K) F(arcsin(z / m^{1/4}), m) ),
        kappa^{-1}(w) = m^{1/4} sn( (2K/pi) arcsin(w / c), m ).

    Evaluated in ``mpmath`` because ``1 - m`` underflows double precision for
    thin ellipses.
    """

    def __init__(self, oval: OvalDomain, dps=40):
        if oval.semi_axes is None:
            raise ValueError("EllipseDiscMap needs an ellipse oval")
        self.oval = oval
        self.dps = dps
        a, b = oval.semi_axes
        if not a > b:
            raise ValueError("semi-axes must satisfy a > b (major axis on the real line)")
        with mp.workdps(dps):
            self._a, self._b = mp.mpf(a), mp.mpf(b)
            self._c = mp.sqrt(self._a ** 2 - self._b ** 2)
            target = self._a / self._b

            def mismatch(lm):
                m = 1 - mp.exp(-lm)
                K = mp.ellipk(m)
                q = mp.sqrt(mp.sqrt(m))
                fx = mp.sin(mp.pi / (2 * K) * mp.ellipf(mp.asin(1 / q), m))
                fy = mp.sin(mp.pi / (2 * K) * mp.ellipf(mp.asin(1j / q), m))
                return mp.re(fx) / mp.im(fy) - target

            lo, hi = mp.mpf("0.5"), mp.mpf(1)
            while mismatch(hi) < 0:
                lo, hi = hi, 2 * hi
                if hi > 4096:
                    raise ValueError("axis ratio too extreme for the elliptic map")
            self._lm = mp.findroot(mismatch, (lo, hi), solver="anderson")
            self._m = 1 - mp.exp(-self._lm)
            self._K = mp.ellipk(self._m)
            self._q = mp.sqrt(mp.sqrt(self._m))

    @property
    def one_minus_m(self) -> float:
        with mp.workdps(self.dps):
            return float(mp.exp(-self._lm))

    def _map(self, fn, x):
        x = np.asarray(x, dtype=complex)
        with mp.workdps(self.dps):
            out = [complex(fn(mp.mpc(v.real, v.imag))) for v in x.ravel()]
        return np.array(out, dtype=complex).reshape(x.shape)

    def _fwd(self, z):
        return self._c * mp.sin(mp.pi / (2 * self._K) * mp.ellipf(mp.asin(z / self._q), self._m))

    def _inv(self, w):
        return self._q * mp.ellipfun("sn", 2 * self._K / mp.pi * mp.asin(w / self._c), m=self._m)

    def _dinv(self, w):
        u = 2 * self._K / mp.pi * mp.asin(w / self._c)
        cn = mp.ellipfun("cn", u, m=self._m)
        dn = mp.ellipfun("dn", u, m=self._m)
        return self._q * cn * dn * (2 * self._K / mp.pi) / (self._c * mp.sqrt(1 - (w / self._c) ** 2))

    def forward(self, z):
        return self._map(self._fwd, z)

    def inverse(self, w):
        return self._map(self._inv, w)

    def inverse_derivative(self, w):
        return self._map(self._dinv, w)

    def derivative(self, z):
        return self._map(lambda v: 1 / self._dinv(self._fwd(v)), z)


class TheodorsenMap(_DiscMap):
    """Riemann map of the disc onto a star-shaped oval by Theodorsen's iteration.

    The boundary correspondence ``phi(theta)`` solves
    ``phi - theta = K[log R(phi)]`` with ``K`` the periodic conjugation
    operator; then ``kappa(z) = z exp(G(z))`` with ``G`` the holomorphic
    extension of ``log R(phi(theta)) + i (phi(theta) - theta)``.
    The iteration converges when ``|d log R / d phi| < 1``.
    """

    def __init__(self, oval: OvalDomain, n=512, tol=1e-13, maxiter=500):
        self.oval = oval
        self.n = n
        theta = TWO_PI * np.arange(n) / n
        freq = np.fft.fftfreq(n, 1.0 / n)
        conj = -1j * np.sign(freq)

        def logr(phi):
            return np.log(_polar_radius(oval.curve, phi))

        phi = theta.copy()
        prev = np.inf
        grows = 0
        for _ in range(maxiter):
            lr = logr(phi)
            new = theta + np.fft.ifft(conj * np.fft.fft(lr)).real
            delta = float(np.max(np.abs(new - phi)))
            phi = new
            if not np.isfinite(delta) or delta > 10.0:
                raise ConformalMapDivergence("Theodorsen iteration diverged")
            if delta < tol:
                break
            grows = grows + 1 if delta > prev else 0
            if grows >= 8:
                raise ConformalMapDivergence(
                    "Theodorsen iteration diverged (aspect ratio too extreme)")
            prev = delta
        else:
            raise ConformalMapDivergence("Theodorsen iteration did not converge")
        self.theta = theta
        self.phi = phi
        g = np.fft.fft(logr(phi) + 1j * (phi - theta)) / n
        if np.max(np.abs(g[n // 2:])) > 1e-9 * np.max(np.abs(g)):
            raise ConformalMapDivergence("conjugate function not resolved at this harmonic count")
        self._g = g[: n // 2]
        self._dg = np.arange(1, n // 2) * self._g[1:]

    def _G(self, z):
        return np.polyval(self._g[::-1], z)

    def forward(self, z):
        z = np.asarray(z, dtype=complex)
        return z * np.exp(self._G(z))

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return np.exp(self._G(z)) * (1.0 + z * np.polyval(self._dg[::-1], z))

    def inverse(self, w, tol=1e-14, maxiter=60):
        w = np.asarray(w, dtype=complex)
        z = w / np.exp(self._g[0].real)
        for _ in range(maxiter):
            step = (self.forward(z) - w) / self.derivative(z)
            z = z - step
            big = np.abs(z) > 1.0
            z = np.where(big, z / np.abs(z) * 0.999, z)
            if np.max(np.abs(step)) < tol:
                break
        return z

    def inverse_derivative(self, w):
        return 1.0 / self.derivative(self.inverse(w))


def conformal_disc_to_oval(oval: OvalDomain, method="auto", **kwargs):
    """Riemann map ``kappa`` of the unit disc onto ``oval`` with ``kappa(0) = 0``, ``kappa'(0) > 0``.

    ``method``: ``"elliptic"`` (exact, ellipses only), ``"theodorsen"``, or
    ``"auto"`` (elliptic for ellipse ovals, Theodorsen otherwise).
    """
    if method == "auto":
        method = "elliptic" if oval.semi_axes is not None else "theodorsen"
    if method == "elliptic":
        return EllipseDiscMap(oval, **kwargs)
    if method == "theodorsen":
        return TheodorsenMap(oval, **kwargs)
    raise ValueError(f"unknown method {method!r}")


def margin_radius(delta_cover, margin=0.05) -> float:
    """Covering radius pushed outward by ``margin`` of its gap to the unit circle."""
    return 1.0 - (1.0 - margin) * (1.0 - delta_cover)


# ---------------------------------------------------------------------------
# the bound chain
# ---------------------------------------------------------------------------

@dataclass
class BoundaryQuadrature:
    """Oval-boundary nodes with the Jacobian ``|(kappa^{-1})'(w)|`` of the disc map."""

    w: np.ndarray
    dw: np.ndarray
    jac: np.ndarray

    @classmethod
    def build(cls, kappa, n=2000):
        phi = (np.arange(n) + 0.5) * TWO_PI / n
        w, dw = kappa.oval.boundary(phi)
        jac = np.abs(kappa.inverse_derivative(w))
        return cls(w, dw * TWO_PI / n, jac)


@dataclass(frozen=True)
class ChainReport:
    lam: float
    n_real: int
    n_complex: int
    two_F: float
    two_ratio: float
    delta: float
    F_boundary: float = float("nan")
    zeros: tuple = field(default=(), repr=False)

    @property
    def ratio_over_h(self) -> float:
        """Boundary ratio measured in units of ``1/h``: ``ratio * h``."""
        return 0.5 * self.two_ratio / self.lam

    @property
    def holds(self) -> bool:
        return self.n_real <= self.n_complex <= self.two_F <= self.two_ratio

    def links(self) -> dict:
        return {"n_real<=n_complex": self.n_real <= self.n_complex,
                "n_complex<=2F": self.n_complex <= self.two_F,
                "2F<=2ratio": self.two_F <= self.two_ratio}

    def to_row(self) -> dict:
        return {"lambda": self.lam, "n_real": self.n_real, "n_complex": self.n_complex,
                "two_F": self.two_F, "ratio_over_h": self.ratio_over_h}


def transported_frequency(u, du, quad: BoundaryQuadrature):
    """``(F, F_boundary, ratio)`` of ``g = u o kappa`` from oval-boundary integrals.

    By conformal invariance of the Dirichlet energy,
    ``int_{B_1} |g'|^2 = (1/2i) oint conj(u) u' dw``; the disc boundary norm is
    ``oint |u|^2 |(kappa^{-1})'| |dw|`` and
    ``oint |d_theta g|^2 d theta = oint |u'|^2 / |(kappa^{-1})'| |dw|``.
    """
    uw, dwv = u(quad.w), du(quad.w)
    ds = np.abs(quad.dw)
    den = float(np.sum(np.abs(uw) ** 2 * quad.jac * ds))
    if den <= 1e-300:
        raise ZeroDenominatorError("transported function vanishes on the circle")
    energy = np.sum(np.conj(uw) * dwv * quad.dw) / 2j
    r2 = float(np.sum(np.abs(dwv) ** 2 / quad.jac * ds))
    # Green form: d_theta Im g d theta = Im(u' dw) along the boundary
    green = float(np.sum(uw.real * (dwv * quad.dw).imag))
    return float(energy.real) / den, green / den, float(np.sqrt(r2 / den))


def theorem1_chain(u, du, lam, oval: OvalDomain, kappa=None, quad=None, real_samples=None,
                   n_real=None, delta=None, min_size=1e-4) -> ChainReport:
    """Evaluate ``n_real <= n_complex(kappa(B_delta)) <= 2F(g) <= 2 ratio(g)``.

    ``u`` and ``du`` evaluate the continued restriction and its derivative at
    complex ``t``; ``real_samples`` (values on a uniform ``[-pi, pi)`` grid)
    give ``n_real`` unless it is passed directly.  Zeros of ``u`` inside the
    oval are located by rectangle bisection with the argument principle and
    counted when ``|kappa^{-1}(w)| < delta``.
    """
    kappa = conformal_disc_to_oval(oval) if kappa is None else kappa
    if quad is None:
        quad = BoundaryQuadrature.build(kappa)
    if n_real is None:
        if real_samples is None:
            raise ValueError("need real_samples or n_real")
        if not np.any(real_samples):
            raise ZeroDenominatorError("zero function")
        n_real = count_real_zeros(real_samples).count
    if delta is None:
        delta = margin_radius(kappa.covering_radius())
    a = float(np.max(np.abs(quad.w.real)))
    b = float(np.max(np.abs(quad.w.imag)))
    zs = locate_zeros(u, (-a * 1.0001, a * 1.0013, -b * 1.0007, b * 1.0011), df=du,
                      min_size=min_size)
    # cross-check the locator against the winding number on the oval boundary,
    # shrinking the contour slightly if a zero sits on it (e.g. cos(mt) at 3pi/2)
    for scale in (1.0, 1 - 1e-6, 1 - 1e-4, 1 - 1e-2):
        contour = lambda th, sc=scale: sc * oval.boundary(th)[0]  # noqa: E731
        try:
            total = count_complex_zeros(u, contour)
        except ZeroOnContourError:
            continue
        inside = [z for z in zs if oval.contains(np.array([z / scale]))[0]]
        if len(inside) != total:
            raise UnwrapError(f"located {len(inside)} zeros but the oval winding is {total}")
        break
    else:
        raise ZeroOnContourError("zeros on every trial oval contour")
    zs = [z for z in zs if oval.contains(np.array([z]))[0]]
    if zs:
        radii = np.abs(kappa.inverse(np.array(zs)))
        n_complex = int(np.sum(radii < delta))
    else:
        n_complex = 0
    F, Fb, ratio = transported_frequency(u, du, quad)
    return ChainReport(float(lam), int(n_real), n_complex, 2 * F, 2 * ratio, float(delta), Fb,
                       tuple(zs))


def oval_contour(oval: OvalDomain):
    return lambda th: oval.boundary(th)[0]

