"""Restriction of eigenfunctions to an interior curve and its holomorphic continuation.

The restriction ``u^H(t) = phi(q(t))`` is computed from the boundary trace by
the Green representation,

    Neumann:    u(x) = int N(x, r(s); h) u^bdry(s) ds,
                N    = -(i / 4h) H1(rho / h) <(x - r)/rho, nu_s>,
    Dirichlet:  u(x) = h^{-1} int (i/4) H0(rho / h) (h d_nu phi)(s) ds,

and continued to complex ``t`` by replacing ``rho`` with the complexified
distance and the direction cosine with its bilinear continuation.
"""

from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np
from scipy.optimize import minimize_scalar

from .eigensolver import NEUMANN, EigenPair
from .geometry import TWO_PI, bilinear, complex_distance
from .specfun import bessel_j, hankel1

_CHUNK = 2_000_000


class StripHypothesisError(ValueError):
    """The strip is too wide for the continued layer potential."""


class TouchesBoundaryError(ValueError):
    """The interior curve meets the boundary."""


def distance_to_boundary(H, bdry, n=512) -> float:
    t = TWO_PI * np.arange(n) / n
    q = H(t)
    r = bdry(t)
    return float(np.min(np.linalg.norm(q[:, None, :] - r[None, :, :], axis=-1)))


def strip_speed_bound(H, eps, n=256, n_im=9) -> float:
    """``sup |sqrt<q'(t), q'(t)>|`` over ``|Im t| <= eps`` (complexified arclength rate)."""
    t = TWO_PI * np.arange(n) / n
    y = np.linspace(-eps, eps, n_im)
    d1 = H.derivative(t[None, :] + 1j * y[:, None], 1, check=False)
    return float(np.max(np.abs(np.sqrt(bilinear(d1, d1)))))


def check_strip(H, bdry, eps):
    """Enforce ``2 eps sup|dq^C/dt| < dist(H, bdry)``."""
    dist = distance_to_boundary(H, bdry)
    if dist <= 0:
        raise TouchesBoundaryError("interior curve touches the boundary")
    if eps > H.strip_halfwidth + 1e-14:
        raise StripHypothesisError(f"eps = {eps} exceeds the certified strip {H.strip_halfwidth}")
    if 2 * eps * strip_speed_bound(H, eps) >= dist:
        raise StripHypothesisError(f"eps = {eps} violates 2 eps sup|q'| < dist(H, bdry)")


def _kernel_apply(pair: EigenPair, H, t):
    """Green-representation quadrature at (possibly complex) parameters ``t``."""
    nd = pair.nodes
    bdry = pair.curve
    lam = pair.lam
    t = np.asarray(t)
    flat = t.ravel()
    out = np.empty(flat.shape, dtype=complex)
    dens = nd.weights * pair.trace
    block = max(1, _CHUNK // nd.n)
    for start in range(0, len(flat), block):
        tt = flat[start:start + block]
        rho = complex_distance(H, bdry, tt[:, None], nd.tau[None, :])
        z = lam * rho
        if pair.bc == NEUMANN:
            D = H.derivative(tt.astype(complex), 0)[:, None, :] - nd.x[None, :, :]
            cos = bilinear(D, nd.normal[None, :, :]) / rho
            ker = -0.25j * lam * hankel1(1, z) * cos
        else:
            ker = 0.25j * lam * hankel1(0, z)
        out[start:start + block] = ker @ dens
    return out.reshape(t.shape)


def restrict(pair: EigenPair, H, t):
    """Real restriction ``u^H(t)`` at real parameters ``t``."""
    if distance_to_boundary(H, pair.curve) <= 0:
        raise TouchesBoundaryError("interior curve touches the boundary")
    vals = _kernel_apply(pair, H, np.asarray(t, dtype=float))
    return vals.real


def continue_complex(pair: EigenPair, H, t, check=True):
    """Holomorphic continuation ``u^{H,C}(t)`` on the strip."""
    t = np.asarray(t, dtype=complex)
    if check:
        check_strip(H, pair.curve, float(np.max(np.abs(t.imag))) if t.size else 0.0)
    return _kernel_apply(pair, H, t)


@dataclass(frozen=True)
class DiscContinuation:
    """Closed-form continuation ``C J_m(lam r0) cos(m t)`` (or ``sin``) for disc pairs.

    Entire in ``t``; :meth:`log` returns a complex logarithm that stays finite
    far from the real axis.
    """

    m: int
    lam: float
    amplitude: float
    parity: str = "even"

    @classmethod
    def from_pair(cls, pair: EigenPair, r0: float):
        m = int(pair.meta["m"])
        return cls(m, pair.lam, pair.meta["C"] * bessel_j(m, pair.lam * r0), pair.parity)

    def __call__(self, t):
        t = np.asarray(t, dtype=complex)
        f = np.cos if self.parity == "even" else np.sin
        return self.amplitude * f(self.m * t)

    def log(self, t):
        w = self.m * np.asarray(t, dtype=complex)
        sgn = np.where(w.imag >= 0, 1.0, -1.0)
        # the dominant exponential is exp(-i sgn w); factor it out
        lead = -1j * sgn * w
        ratio = np.exp(2j * sgn * w)
        if self.parity == "even":
            core = 0.5 * (1.0 + ratio)
        else:
            core = 0.5j * sgn * (1.0 - ratio)
        return np.log(complex(self.amplitude)) + lead + np.log(core)


@dataclass
class StripGrid:
    """Samples of ``u^{H,C}`` on ``[-pi, pi) x [-eps, eps]``."""

    re: np.ndarray
    im: np.ndarray
    values: np.ndarray
    eps: float
    pair_id: str = ""
    curve_id: str = ""

    @property
    def t(self):
        return self.re[None, :] + 1j * self.im[:, None]

    def save(self, stem):
        np.savez(f"{stem}.npz", re=self.re, im=self.im, values=self.values)
        with open(f"{stem}.json", "w") as fh:
            json.dump({"eps": self.eps, "pair_id": self.pair_id, "curve_id": self.curve_id,
                       "shape": list(self.values.shape)}, fh, indent=2)

    @classmethod
    def load(cls, stem):
        with open(f"{stem}.json") as fh:
            meta = json.load(fh)
        data = np.load(f"{stem}.npz")
        return cls(data["re"], data["im"], data["values"], meta["eps"], meta["pair_id"],
                   meta["curve_id"])

    def to_csv(self, path):
        rows = ["re_t,im_t,abs_u"]
        for i, y in enumerate(self.im):
            for j, x in enumerate(self.re):
                rows.append(f"{x:.12g},{y:.12g},{abs(self.values[i, j]):.12g}")
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")


def strip_grid(pair, H, eps, n_re=512, n_im=33, sampler=None) -> StripGrid:
    re = TWO_PI * np.arange(n_re) / n_re - np.pi
    im = np.linspace(-eps, eps, n_im)
    t = re[None, :] + 1j * im[:, None]
    vals = sampler(t) if sampler is not None else continue_complex(pair, H, t)
    pid = f"{pair.lam:.12f}:{pair.bc}:{pair.parity}"
    return StripGrid(re, im, vals, eps, pid, getattr(H, "domain_hash", lambda: "")())


@dataclass(frozen=True)
class TubeMax:
    value: float
    argmax: complex
    annulus_max: float
    annulus_min: float


def grauert_max(pair, H, eps, n_re=512, n_im=33, delta=None, sampler=None) -> TubeMax:
    """Maximum of ``|u^{H,C}|`` on the strip, refined by a golden-section step in ``Re t``.

    Also reports the max and min of ``|u^C|`` over the band
    ``eps - delta <= |Im t| <= eps``.
    """
    f = sampler if sampler is not None else (lambda t: continue_complex(pair, H, t))
    if eps == 0:
        re = TWO_PI * np.arange(n_re) / n_re - np.pi
        vals = np.abs(f(re.astype(complex)))
        j = int(np.argmax(vals))
        v = float(vals[j])
        return TubeMax(v, complex(re[j]), v, float(vals.min()))
    grid = strip_grid(pair, H, eps, n_re, n_im, sampler=f)
    mags = np.abs(grid.values)
    i, j = np.unravel_index(np.argmax(mags), mags.shape)
    y = grid.im[i]
    dx = grid.re[1] - grid.re[0]
    res = minimize_scalar(lambda x: -abs(f(np.array([x + 1j * y]))[0]),
                          bounds=(grid.re[j] - dx, grid.re[j] + dx), method="bounded",
                          options={"xatol": 1e-10})
    best = max(-res.fun, mags[i, j])
    arg = complex(res.x + 1j * y) if -res.fun >= mags[i, j] else complex(grid.t[i, j])
    delta = eps if delta is None else delta
    band = np.abs(np.abs(grid.im) - eps) <= delta + 1e-14
    return TubeMax(float(best), arg, float(mags[band].max()), float(mags[band].min()))


def wkb_leading(H, bdry, t, s, h):
    """Leading complex WKB form of the Neumann kernel, ``(2 pi h)^{-1/2} e^{i rho/h} a0``."""
    rho = complex_distance(H, bdry, t, s)
    D = H.derivative(np.asarray(t, dtype=complex), 0) - bdry.derivative(np.asarray(s, dtype=float), 0)
    d1 = bdry.derivative(np.asarray(s, dtype=float), 1)
    nu = np.stack([d1[..., 1], -d1[..., 0]], -1) / np.linalg.norm(d1, axis=-1)[..., None]
    cos = bilinear(D, nu) / rho
    a0 = -0.5j * np.exp(-0.75j * np.pi) * rho ** -0.5 * cos
    return (2 * np.pi * h) ** -0.5 * np.exp(1j * rho / h) * a0, a0, rho


def neumann_kernel(H, bdry, t, s, h):
    """Exact continued kernel ``-(i/4h) H1(rho/h) cos(theta)``."""
    rho = complex_distance(H, bdry, t, s)
    D = H.derivative(np.asarray(t, dtype=complex), 0) - bdry.derivative(np.asarray(s, dtype=float), 0)
    d1 = bdry.derivative(np.asarray(s, dtype=float), 1)
    nu = np.stack([d1[..., 1], -d1[..., 0]], -1) / np.linalg.norm(d1, axis=-1)[..., None]
    cos = bilinear(D, nu) / rho
    return -0.25j / h * hankel1(1, rho / h) * cos


def wkb_validate(H, bdry, t, s, h):
    """Relative deviation ``|N^C - N_WKB| / |N_WKB|`` of the exact kernel from its WKB form."""
    exact = neumann_kernel(H, bdry, t, s, h)
    lead, _, _ = wkb_leading(H, bdry, t, s, h)
    return np.abs(exact - lead) / np.abs(lead)


def continue_complex_derivative(pair: EigenPair, H, t, check=True):
    """``d u^{H,C} / dt`` from the differentiated kernel (same quadrature)."""
    t = np.asarray(t, dtype=complex)
    if check:
        check_strip(H, pair.curve, float(np.max(np.abs(t.imag))) if t.size else 0.0)
    nd = pair.nodes
    lam = pair.lam
    flat = t.ravel()
    out = np.empty(flat.shape, dtype=complex)
    dens = nd.weights * pair.trace
    block = max(1, _CHUNK // nd.n)
    for start in range(0, len(flat), block):
        tt = flat[start:start + block]
        rho = complex_distance(H, pair.curve, tt[:, None], nd.tau[None, :])
        D = H.derivative(tt, 0)[:, None, :] - nd.x[None, :, :]
        q1 = H.derivative(tt, 1)[:, None, :]
        rho_t = bilinear(D, q1) / rho
        z = lam * rho
        h1 = hankel1(1, z)
        if pair.bc == NEUMANN:
            h0 = hankel1(0, z)
            dn = bilinear(D, nd.normal[None, :, :])
            cos = dn / rho
            cos_t = bilinear(q1, nd.normal[None, :, :]) / rho - dn * rho_t / rho ** 2
            ker = -0.25j * lam * (lam * rho_t * (h0 - h1 / z) * cos + h1 * cos_t)
        else:
            ker = -0.25j * lam * lam * rho_t * h1
        out[start:start + block] = ker @ dens
    return out.reshape(t.shape)
