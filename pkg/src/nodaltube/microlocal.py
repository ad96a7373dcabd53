"""Semiclassical Fourier multipliers on periodic boundaries and the glancing symbol.

``Op_h(chi)`` acts on a ``2 pi``-periodic function by multiplying its Fourier
coefficient of index ``n`` by ``chi(h n)``.  The quadratic form

    lhs = h^{-1/2} int_{S} e^{-2 S(t)/h} |u^{H,C}(t)|^2 a(t) 2 dRe t dIm t

is compared with ``<Op_h(a_G) u^bdry, u^bdry>``, where the symbol ``a_G`` on
the coball bundle of the boundary is obtained fibrewise from the critical
point ``s*(t)`` of ``s -> -Im rho^C(t, s)``:

    sigma = d_s Re rho(t, s*),   A = d_s^2 Im rho(t, s*),
    a_G   = (sqrt(pi)/2) sqrt(A) w a / (|rho| |d_s d_t rho|^2),

with ``w = |cos theta^C|^2`` for Neumann data and ``w = 1`` for Dirichlet
data (all ``s``-derivatives in boundary arclength).
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .eigensolver import NEUMANN, EigenPair
from .geometry import (TWO_PI, NEWTON_MAXITER, GlancingError, _rho, _rho_s_derivs,
                       bilinear, glancing_map, weight)

SMOOTHSTEP_ORDER = 7


class AliasingError(ValueError):
    """Too few samples for the multiplier's frequency support."""


class FiberNonMonotoneError(ValueError):
    """``sigma`` is not monotone along a symbol fiber (strip too wide)."""


class MarginError(ValueError):
    """Symbol support reaches ``|sigma| = 1`` where ``gamma^{-1}`` blows up."""


# ---------------------------------------------------------------------------
# multipliers
# ---------------------------------------------------------------------------

def smoothstep7(x):
    """Degree-7 smoothstep: 0 for x <= 0, 1 for x >= 1, three continuous derivatives."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x ** 4 * (35.0 - 84.0 * x + 70.0 * x ** 2 - 20.0 * x ** 3)


def smooth_transition(x):
    """C-infinity transition ``e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)})`` on [0, 1]."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 1.0, 1.0, 0.0)
    mid = (x > 0.0) & (x < 1.0)
    xm = x[mid]
    a = np.exp(-1.0 / xm)
    b = np.exp(-1.0 / (1.0 - xm))
    out[mid] = a / (a + b)
    return out


@dataclass(frozen=True)
class PeriodicMultiplier:
    """Even cutoff with ``chi = 1`` on ``|xi| <= R`` and ``chi = 0`` on ``|xi| >= 2R``."""

    radius: float

    @property
    def outer(self) -> float:
        return 2.0 * self.radius

    def __call__(self, xi):
        xi = np.abs(np.asarray(xi, dtype=float))
        return 1.0 - smoothstep7((xi - self.radius) / self.radius)


@dataclass(frozen=True)
class FrequencyWindow:
    """Sharp indicator of ``lo <= xi <= hi``."""

    lo: float
    hi: float

    @property
    def outer(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        return ((xi >= self.lo) & (xi <= self.hi)).astype(float)


def multiplier_frequencies(n, h):
    """Semiclassical lattice ``xi = h k`` for the FFT ordering of ``n`` samples."""
    return h * np.fft.fftfreq(n, 1.0 / n)


def apply_multiplier(f, chi, h, check=True):
    """``Op_h(chi) f`` for periodic samples ``f`` on a uniform grid of a period."""
    f = np.asarray(f)
    n = f.shape[-1]
    if check:
        outer = getattr(chi, "outer", None)
        if n & (n - 1):
            raise AliasingError("sample count must be a power of two")
        if outer is not None and np.isfinite(outer) and n < 4 * (2 * outer / h):
            raise AliasingError(f"{n} samples cannot resolve |xi| <= {outer} at h = {h}")
    coef = np.fft.fft(f, axis=-1) * chi(multiplier_frequencies(n, h))
    out = np.fft.ifft(coef, axis=-1)
    return out if np.iscomplexobj(f) else out.real


def wavefront_check(samplers, chi, length=TWO_PI, n=None):
    """Sup norms of ``Op_h(1 - chi) u_h^H`` for a family ``[(lam, u_H), ...]``.

    ``u_H(t)`` evaluates the real restriction on ``[-pi, pi)``; the frequency
    variable is dual to arclength on ``H``, so ``xi = h n 2 pi / length``.
    """
    out = []
    for lam, u in samplers:
        h = 1.0 / lam
        heff = h * TWO_PI / length
        m = n if n is not None else 1 << int(np.ceil(np.log2(max(256, 8 * chi.outer / heff))))
        t = TWO_PI * np.arange(m) / m - np.pi
        vals = np.asarray(u(t), dtype=float)
        res = vals - apply_multiplier(vals, chi, heff, check=False)
        out.append(float(np.max(np.abs(res))))
    return np.array(out)


# ---------------------------------------------------------------------------
# residual decay on the oval boundary
# ---------------------------------------------------------------------------

def _logsumexp(x):
    x = np.asarray(x, dtype=float)
    if x.size == 0 or not np.any(np.isfinite(x)):
        return -np.inf
    m = np.max(x)
    return float(m + np.log(np.sum(np.exp(x - m))))


def log_fourier_coefficients(logf, n=8192, etas=None, tail_tol=1e-13, resolve_tol=1e-11):
    """``log |c_k|`` of a ``2 pi``-periodic entire function given by its logarithm.

    ``c_k`` is computed on shifted contours ``phi - i eta`` (``eta > 0`` for
    ``k > 0``), where ``|c_k| = e^{-k eta} |FFT_k(f(. - i eta))|``.  Each
    coefficient is taken from the shift on which it is largest relative to
    the peak of that shift's spectrum, i.e. resolved with the most
    significant digits above the round-off floor.  Coefficients that stay
    below ``resolve_tol`` of the peak on every shift are reported as the
    smallest estimate over shifts, an upper bound at the round-off floor.

    The index of the largest term of ``sum c_k e^{k eta}`` is nondecreasing
    in ``eta``, so shifts are walked upward per sign and the walk stops at
    the first shift whose peak moves backwards, reaches ``n/4``, or whose
    spectrum does not decay to ``tail_tol`` near ``n/2`` (all signs of
    content wrapping past the grid).
    """
    etas = np.linspace(0.0, 6.0, 49) if etas is None else np.sort(np.asarray(etas, dtype=float))
    phi = TWO_PI * np.arange(n) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    best = np.full(n, np.inf)
    best_rel = np.full(n, -np.inf)
    floor = np.full(n, np.inf)
    for sgn in (1.0, -1.0):
        last_peak = -np.inf
        for eta in etas:
            if eta == 0 and sgn < 0:
                continue
            lg = logf(phi - 1j * sgn * eta)
            top = float(np.max(lg.real))
            mag = np.abs(np.fft.fft(np.exp(lg - top)) / n)
            j = int(np.argmax(mag))
            peak = mag[j]
            if (mag[n // 2 - 8: n // 2 + 8].max() > tail_tol * peak or abs(k[j]) >= n // 4
                    or (eta > 0 and sgn * k[j] < last_peak)):
                break
            if eta > 0:
                last_peak = sgn * k[j]
            with np.errstate(divide="ignore"):
                rel = np.log(mag) - np.log(peak)
                est = top + np.log(mag) - sgn * eta * k
            side = (sgn * k >= 0) if eta > 0 else np.ones(n, bool)
            floor = np.where(side, np.minimum(floor, est), floor)
            use = side & (rel > best_rel)
            best = np.where(use, est, best)
            best_rel = np.where(use, rel, best_rel)
    return k, np.where(best_rel > np.log(resolve_tol), best, floor)


@dataclass
class DecayFit:
    radius: float
    c: float
    b: float
    lam: np.ndarray
    log_residual: np.ndarray


def residual_decay(family, oval, radii, n=8192, etas=None):
    """``log ||(1 - Op_h(chi_R)) h d_T u^{H,C}||_{L^2(dC)}`` over a family and fits.

    ``family`` is a list of ``(lam, sampler)`` with ``sampler.log(t)`` the
    complex logarithm of ``u^{H,C}``.  On the oval boundary ``w(phi)`` the
    arclength frequency is ``xi_k = h k 2 pi / L`` and ``h d_T`` acts as
    ``i xi_k``.  The grid size grows with ``lam`` so that the frequencies
    beyond ``R`` are resolved.  Returns one :class:`DecayFit` per radius,
    ``log res ~ -c lam + b``.
    """
    phi = TWO_PI * np.arange(2048) / 2048
    _, dw = oval.boundary(phi)
    L = float(np.mean(np.abs(dw)) * TWO_PI)
    table = np.empty((len(radii), len(family)))
    lams = np.array([lam for lam, _ in family], dtype=float)
    for j, (lam, samp) in enumerate(family):
        logf = lambda p, s=samp: s.log(oval.boundary(p)[0])  # noqa: E731
        # the residual lives at |k| > R lam L / 2 pi; keep that band below n / 8
        need = 8.0 * max(radii) * lam * L / TWO_PI
        nj = max(n, 1 << int(np.ceil(np.log2(need))))
        k, logc = log_fourier_coefficients(logf, n=nj, etas=etas)
        xi = (TWO_PI / L) * k / lam
        for i, R in enumerate(radii):
            chi = PeriodicMultiplier(R)
            keep = 1.0 - chi(xi)
            with np.errstate(divide="ignore"):
                terms = 2 * (np.log(keep) + np.log(np.abs(xi)) + logc)
            table[i, j] = 0.5 * (np.log(L) + _logsumexp(terms[keep > 0]))
    fits = []
    for i, R in enumerate(radii):
        y = table[i]
        ok = np.isfinite(y)
        if ok.sum() >= 2:
            slope, icpt = np.polyfit(lams[ok], y[ok], 1)
        else:
            slope, icpt = np.nan, np.nan
        fits.append(DecayFit(float(R), float(-slope), float(icpt), lams, y))
    return fits


# ---------------------------------------------------------------------------
# glancing symbol
# ---------------------------------------------------------------------------

def boundary_arclength(bdry, tau, n=4096):
    """Arclength ``s(tau)`` from the boundary's parameter origin."""
    tau = np.asarray(tau, dtype=float)
    if hasattr(bdry, "arclength"):
        return bdry.arclength(tau)[0]
    g = TWO_PI * np.arange(n) / n
    sp = bdry.speed(g)
    c = np.fft.fft(sp) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    mean = c[0].real
    integ = np.zeros(n, dtype=complex)
    nz = k != 0
    integ[nz] = c[nz] / (1j * k[nz])
    x = np.mod(tau, TWO_PI)
    periodic = np.real(np.exp(1j * np.multiply.outer(x, k)) @ integ) - np.real(np.sum(integ))
    return mean * x + periodic + np.floor_divide(tau, TWO_PI) * mean * TWO_PI


def _rho_st(H, bdry, t, tau):
    """``rho``, ``rho_tau``, ``rho_tautau``, ``rho_{tau t}`` (parameter derivatives)."""
    rho, rs, rss = _rho_s_derivs(H, bdry, t, tau)
    _, D = _rho(H, bdry, t, tau)
    q1 = H.derivative(np.asarray(t, dtype=complex), 1, check=False)
    r1 = bdry.derivative(np.asarray(tau, dtype=float), 1)
    rt = bilinear(D, q1) / rho
    rst = (-bilinear(r1, q1) - rt * rs) / rho
    return rho, rs, rss, rst, D


@dataclass
class GlancingSymbol:
    """Fibrewise samples of the glancing symbol.

    Column ``j`` is the fiber over boundary parameter ``tau[j]`` (arclength
    ``s[j]``); row ``k`` is ``Im t = y[k]``.  ``re_t``, ``sigma`` and ``values``
    hold ``Re t``, ``sigma`` and ``a_G`` on the ``(y, tau)`` grid.
    """

    tau: np.ndarray
    s: np.ndarray
    y: np.ndarray
    re_t: np.ndarray
    sigma: np.ndarray
    values: np.ndarray
    length: float

    @property
    def gamma(self):
        return np.sqrt(np.clip(1.0 - self.sigma ** 2, 0.0, None))

    def fiber(self, j, sigma):
        """Monotone interpolation of column ``j`` at ``sigma`` (zero off the fiber)."""
        sg, v = self.sigma[:, j], self.values[:, j]
        order = np.argsort(sg)
        return np.interp(sigma, sg[order], v[order], left=0.0, right=0.0)

    def __call__(self, s, sigma):
        """Table ``a_G(s_i, sigma_k)`` with periodic linear interpolation across fibers."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
        cols = self.on_grid(sigma)
        ncol = len(self.s)
        if ncol == 1:
            return np.repeat(cols, len(s), axis=0)
        ss = np.concatenate((self.s, [self.s[0] + self.length]))
        x = np.mod(s - self.s[0], self.length) + self.s[0]
        j = np.clip(np.searchsorted(ss, x, side="right") - 1, 0, ncol - 1)
        frac = ((x - ss[j]) / (ss[j + 1] - ss[j]))[:, None]
        return cols[j] * (1 - frac) + cols[(j + 1) % ncol] * frac

    def on_grid(self, sigma_grid):
        return np.stack([self.fiber(j, sigma_grid) for j in range(len(self.s))], axis=0)


def glancing_symbol(H, bdry, cutoff, y, tau=None, bc=NEUMANN, branch=-1, n_tau=64,
                    tol=1e-13) -> GlancingSymbol:
    """Build the glancing symbol on fibers over ``tau`` for ``Im t`` in ``y`` (increasing).

    ``cutoff(re_t, im_t)`` is the tube cutoff ``a``.  For each fiber the
    point ``Re t = x(y)`` with ``s*(x + i y) = tau`` is continued in ``y``
    from the glancing point ``Y(tau)`` by Newton on ``Im d_tau rho = 0``.
    """
    y = np.asarray(y, dtype=float)
    if np.any(np.diff(y) <= 0) or y[0] <= 0:
        raise ValueError("y must be positive and increasing")
    tau = TWO_PI * np.arange(n_tau) / n_tau if tau is None else np.asarray(tau, dtype=float)
    ds = bdry.speed(tau)
    x = glancing_map(H, bdry, tau, branch=branch).astype(float)
    ny, nt = len(y), len(tau)
    re_t = np.empty((ny, nt))
    sig = np.empty((ny, nt))
    val = np.empty((ny, nt))
    for k, yk in enumerate(y):
        for _ in range(NEWTON_MAXITER):
            t = x + 1j * yk
            _, rs, _, rst, _ = _rho_st(H, bdry, t, tau)
            step = rs.imag / rst.imag
            x = x - step
            if np.max(np.abs(step)) < tol:
                break
        else:
            raise GlancingError("fiber Newton did not converge")
        t = x + 1j * yk
        rho, rs, rss, rst, D = _rho_st(H, bdry, t, tau)
        A = rss.imag / ds ** 2
        if np.any(A <= 0):
            raise GlancingError("critical point is not a maximum on a fiber")
        rst_arc = rst / ds
        if bc == NEUMANN:
            r1 = bdry.derivative(tau, 1)
            nu = np.stack([r1[:, 1], -r1[:, 0]], -1) / ds[:, None]
            w = np.abs(bilinear(D, nu) / rho) ** 2
        else:
            w = np.ones(nt)
        re_t[k] = x
        sig[k] = rs.real / ds
        val[k] = 0.5 * math.sqrt(math.pi) * np.sqrt(A) * w * cutoff(x, np.full(nt, yk)) / (
            np.abs(rho) * np.abs(rst_arc) ** 2)
    dsig = np.diff(sig, axis=0)
    if not (np.all(dsig > 0) or np.all(dsig < 0)):
        raise FiberNonMonotoneError("sigma is not monotone along the fibers")
    s = boundary_arclength(bdry, tau)
    length = float(boundary_arclength(bdry, np.array([TWO_PI]))[0] - boundary_arclength(bdry, np.array([0.0]))[0])
    return GlancingSymbol(tau, s, y, re_t, sig, val, length)


def liouville_limit(symbol: GlancingSymbol, margin=1e-3) -> float:
    """``int int a_G gamma^{-1} ds dsigma`` over the coball bundle.

    Integrated fibrewise in ``y`` (``dsigma = |d sigma/dy| dy``) with the
    trapezoid rule, and periodically in ``s``.
    """
    live = symbol.values > 0
    if np.any(np.abs(symbol.sigma[live]) > 1.0 - margin):
        raise MarginError("symbol support reaches |sigma| = 1")
    g = symbol.gamma
    dsig = np.abs(np.gradient(symbol.sigma, symbol.y, axis=0))
    integrand = np.where(live, symbol.values / np.where(g > 0, g, 1.0), 0.0) * dsig
    per_fiber = np.trapezoid(integrand, symbol.y, axis=0)
    return float(np.mean(per_fiber) * symbol.length)


# ---------------------------------------------------------------------------
# the quadratic forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LhsResult:
    value: float
    bound: float
    weight_integral: float


def tube_cutoff(y_lo, y_hi, ramp):
    """Cutoff ``a(Re t, Im t)`` depending on ``Im t`` only, with smoothstep ramps."""

    def a(re_t, im_t):
        im_t = np.asarray(im_t, dtype=float)
        return smoothstep7((im_t - y_lo) / ramp) * smoothstep7((y_hi - im_t) / ramp)

    a.support = (y_lo, y_hi)
    return a


def zero_cutoff(re_t, im_t):
    return np.zeros(np.broadcast(np.asarray(re_t), np.asarray(im_t)).shape)


zero_cutoff.support = (0.1, 0.2)


def qer_lhs(sampler, H, bdry, lam, cutoff, n_re=256, n_im=64, log_sampler=None) -> LhsResult:
    """``h^{-1/2} int int e^{-2S/h} |u^{H,C}|^2 a 2 dx dy`` on ``[-pi, pi) x supp a``.

    Trapezoid in ``Re t``, Gauss-Legendre in ``Im t``.  ``log_sampler`` (if
    given) evaluates ``log u^{H,C}`` and is used instead of ``sampler`` to
    avoid overflow.  Also returns ``h^{-1/2} max|u|^2 int int e^{-2S/h} a``.
    """
    h = 1.0 / lam
    y_lo, y_hi = cutoff.support
    xg = TWO_PI * np.arange(n_re) / n_re - np.pi
    gx, gw = np.polynomial.legendre.leggauss(n_im)
    yg = 0.5 * (y_hi - y_lo) * gx + 0.5 * (y_hi + y_lo)
    wy = 0.5 * (y_hi - y_lo) * gw
    t = xg[None, :] + 1j * yg[:, None]
    a = cutoff(t.real, t.imag)
    if not np.any(a):
        return LhsResult(0.0, 0.0, 0.0)
    S = weight(H, bdry, t)
    if log_sampler is not None:
        lu = log_sampler(t)
    else:
        with np.errstate(divide="ignore"):
            lu = np.log(sampler(t).astype(complex))
    expo = 2.0 * lu.real - 2.0 * S / h
    wts = 2.0 * (TWO_PI / n_re) * wy[:, None] * a
    value = float(np.sum(np.exp(expo) * wts)) * h ** -0.5
    log_max = float(np.max(2.0 * lu.real))
    wint = float(np.sum(np.exp(-2.0 * S / h) * wts))
    bound = float(np.exp(log_max + np.log(wint))) * h ** -0.5 if wint > 0 else 0.0
    return LhsResult(value, bound, wint)


def trace_on_arclength(pair: EigenPair, n=None):
    """Trace resampled on ``n`` uniform arclength nodes (trigonometric interpolation in tau)."""
    nd = pair.nodes
    n = nd.n if n is None else n
    bdry = pair.curve
    L = float(boundary_arclength(bdry, np.array([TWO_PI]))[0] - boundary_arclength(bdry, np.array([0.0]))[0])
    s = L * np.arange(n) / n
    if np.allclose(nd.speed, nd.speed[0], rtol=1e-12) and n == nd.n:
        scale = TWO_PI / L
        if np.allclose(nd.tau, s * scale, atol=1e-13):
            return s, pair.trace.copy(), L
    grid = TWO_PI * np.arange(4096) / 4096
    sg = boundary_arclength(bdry, grid)
    tau = np.interp(s, np.concatenate((sg, [sg[0] + L])), np.concatenate((grid, [TWO_PI])))
    for _ in range(20):
        err = boundary_arclength(bdry, tau) - s
        sp = np.maximum(bdry.speed(tau), 1e-14)
        tau = tau - err / sp
        if np.max(np.abs(err)) < 1e-13:
            break
    k = np.fft.fftfreq(nd.n, 1.0 / nd.n)
    c = np.fft.fft(pair.trace) / nd.n
    c = c * np.exp(-1j * k * nd.tau[0])
    if nd.n % 2 == 0:
        c[nd.n // 2] *= 0.5
        c = np.append(c, c[nd.n // 2])
        k = np.append(k, nd.n // 2)
    vals = np.exp(1j * np.multiply.outer(tau, k)) @ c
    return s, (vals.real if np.isrealobj(pair.trace) else vals), L


@dataclass(frozen=True)
class RhsResult:
    value: float
    imag: float


def qer_rhs(trace, symbol_fn, h, length=TWO_PI, check=True) -> RhsResult:
    """``<Op_h(b) u, u>`` with left quantization on the circle of circumference ``length``.

    ``trace`` holds samples on a uniform arclength grid ``s_j = j length/n``;
    ``symbol_fn(s, sigma)`` returns the symbol on the outer product of
    ``s`` (length ``n``) and the frequency lattice ``sigma_k = h k 2 pi/length``.
    """
    u = np.asarray(trace)
    n = len(u)
    if check and n < 4.0 / h * length / TWO_PI:
        raise AliasingError("trace needs at least 4/h nodes")
    s = length * np.arange(n) / n
    k = np.fft.fftfreq(n, 1.0 / n)
    sigma = h * k * TWO_PI / length
    coef = np.fft.fft(u) / n
    B = symbol_fn(s, sigma)
    phase = np.exp(1j * np.multiply.outer(s, k) * TWO_PI / length)
    opu = np.sum(B * phase * coef[None, :], axis=1)
    val = np.sum(np.conj(u) * opu) * length / n
    return RhsResult(float(val.real), float(val.imag))


# ---------------------------------------------------------------------------
# face windows
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FaceWindow:
    start: float
    end: float
    eps: float
    length: float

    def __call__(self, s):
        x = np.mod(np.asarray(s, dtype=float) - self.start, self.length)
        span = self.end - self.start
        up = smooth_transition(x / self.eps)
        down = smooth_transition((span - x) / self.eps)
        return np.where(x < span, up * down, 0.0)


def face_windows(bdry, eps_face, basepoint=0.0):
    """Smooth cutoffs equal to 1 on each face minus ``eps_face`` at both ends.

    Faces are the stadium's four pieces, or a single face for a smooth boundary
    (with a notch at ``basepoint``).
    """
    if hasattr(bdry, "face_lengths"):
        lens = np.asarray(bdry.face_lengths, dtype=float)
        start = 0.0
    else:
        L = float(boundary_arclength(bdry, np.array([TWO_PI]))[0])
        lens = np.array([L])
        start = basepoint
    total = float(lens.sum())
    if 2 * eps_face >= lens.min():
        raise ValueError("eps_face leaves an empty plateau")
    ends = start + np.concatenate(([0.0], np.cumsum(lens)))
    return [FaceWindow(float(ends[i]), float(ends[i + 1]), float(eps_face), total)
            for i in range(len(lens))]
