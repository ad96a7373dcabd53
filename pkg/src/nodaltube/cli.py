"""Batch experiment runner.

Every subcommand reads one JSON config, writes CSV/JSON outputs into the
output directory and returns an exit code: 0 success, 2 config error,
3 numerical failure, 4 invariant failure.  Each CSV starts with a comment
line carrying the config hash and library version.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ThreadPoolExecutor
import csv
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .continuation import (DiscContinuation, StripHypothesisError, TouchesBoundaryError,
                           check_strip, continue_complex, continue_complex_derivative,
                           grauert_max, restrict)
from .eigensolver import (DIRICHLET, NEUMANN, EigenPair, UNIT_DISC, disc_eigenpair, eig_scan)
from .geometry import (AnalyticClosedCurve, StadiumCurve, arclength_reparametrize, load_curve,
                       weight, weight_asymptotic)
from .microlocal import (glancing_symbol, liouville_limit, qer_lhs, qer_rhs, residual_decay,
                         trace_on_arclength, tube_cutoff, zero_cutoff)
from .specfun import bessel_root
from .zeros import (BoundaryQuadrature, OvalDomain, conformal_disc_to_oval, margin_radius,
                    real_zero_grid, theorem1_chain)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 2, 3, 4


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class InvariantError(RuntimeError):
    """A checked inequality or identity failed."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

DEFAULTS = {
    "domain": {"kind": "disc"},
    "interior": {"kind": "circle", "radius": 0.5, "center": [0.0, 0.0]},
    "bc": NEUMANN,
    "nq": 512,
    "eps": 0.15,
    "delta": 0.05,
    "radii": [4.0, 8.0],
    "grid": {"n_re": 512, "n_im": 33},
}


def config_hash(cfg) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def load_config(path):
    try:
        with open(path) as fh:
            user = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    cfg = json.loads(json.dumps(DEFAULTS))
    cfg.update(user)
    if cfg["bc"] not in (NEUMANN, DIRICHLET):
        raise ConfigError(f"bc must be {NEUMANN!r} or {DIRICHLET!r}")
    eps = cfg["eps"]
    if not isinstance(eps, (int, float)) or eps < 0:
        raise ConfigError("eps must be a non-negative number")
    if "window" in cfg and "pairs" in cfg:
        raise ConfigError("give either 'window' or 'pairs', not both")
    if "window" in cfg:
        w = cfg["window"]
        if len(w) != 2 or not w[0] < w[1] or w[0] <= 0:
            raise ConfigError("window must be [k_lo, k_hi] with 0 < k_lo < k_hi")
    return cfg


def build_domain(spec):
    kind = spec.get("kind", "disc")
    if kind == "disc":
        return UNIT_DISC
    if kind == "ellipse":
        return AnalyticClosedCurve.ellipse(spec.get("a", 1.0), spec.get("b", 0.8),
                                           tuple(spec.get("center", (0.0, 0.0))),
                                           spec.get("angle", 0.0))
    if kind == "stadium":
        return StadiumCurve(spec.get("half_flat", 1.0), spec.get("radius", 1.0))
    if kind == "file":
        return load_curve(spec["path"])
    raise ConfigError(f"unknown domain kind {kind!r}")


def build_interior(spec):
    kind = spec.get("kind", "circle")
    center = tuple(spec.get("center", (0.0, 0.0)))
    if kind == "circle":
        return AnalyticClosedCurve.circle(spec.get("radius", 0.5), center,
                                          strip_halfwidth=spec.get("strip_halfwidth", 2.0))
    if kind == "ellipse":
        base = AnalyticClosedCurve.ellipse(spec["a"], spec["b"], center, spec.get("angle", 0.0))
        return arclength_reparametrize(base) if spec.get("arclength", False) else base
    if kind == "file":
        return load_curve(spec["path"])
    raise ConfigError(f"unknown interior kind {kind!r}")


def _check_eps(H, bdry, eps):
    try:
        check_strip(H, bdry, eps)
    except (StripHypothesisError, TouchesBoundaryError) as exc:
        raise ConfigError(f"invalid eps: {exc}") from exc


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------

def write_csv(path, header, rows, cfg):
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash(cfg)} version={__version__}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) for v in r])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _sha(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def write_manifest(out, cfg, files):
    manifest = {
        "version": __version__,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "files": {os.path.basename(f): _sha(f) for f in files},
    }
    path = os.path.join(out, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# ---------------------------------------------------------------------------
# eigenpairs
# ---------------------------------------------------------------------------

def _disc_pair_list(cfg):
    out = []
    for m, n in cfg["pairs"]:
        if cfg["bc"] == NEUMANN and m == 0 and n < 2:
            raise ConfigError("Neumann (0, 1) is the constant mode; start at n = 2")
        out.append((int(m), int(n)))
    return out


def solve_pairs(cfg, threads=1):
    bdry = build_domain(cfg["domain"])
    if "pairs" in cfg:
        if cfg["domain"].get("kind", "disc") != "disc":
            raise ConfigError("(m, n) lists are only available on the disc")
        todo = _disc_pair_list(cfg)
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(lambda mn: disc_eigenpair(mn[0], mn[1], cfg["bc"], nq=cfg["nq"]),
                               todo))
    if "window" in cfg:
        lo, hi = cfg["window"]
        return eig_scan(bdry, lo, hi, cfg["bc"], nq=cfg["nq"])
    raise ConfigError("config needs 'window' or 'pairs'")


def load_pairs(out):
    path = os.path.join(out, "manifest.json")
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        man = json.load(fh)
    names = sorted(f for f in man["files"] if f.startswith("pair_"))
    return [EigenPair.load(os.path.join(out, f)) for f in names]


def cmd_solve(cfg, out, threads=1, **_):
    pairs = solve_pairs(cfg, threads)
    files = []
    for i, p in enumerate(pairs):
        f = os.path.join(out, f"pair_{i:04d}.json")
        p.save(f)
        files.append(f)
    rows = [(i, p.lam, p.bc, p.parity, "-".join(map(str, p.label))) for i, p in enumerate(pairs)]
    csvp = os.path.join(out, "eigenvalues.csv")
    write_csv(csvp, ["index", "lambda", "bc", "parity", "label"], rows, cfg)
    files.append(csvp)
    write_manifest(out, cfg, files)
    return EXIT_OK


def _pairs_for(cfg, out, threads):
    pairs = load_pairs(out)
    return pairs if pairs is not None else solve_pairs(cfg, threads)


# ---------------------------------------------------------------------------
# count
# ---------------------------------------------------------------------------

def cmd_count(cfg, out, threads=1, **_):
    pairs = _pairs_for(cfg, out, threads)
    H = build_interior(cfg["interior"])
    eps = cfg["eps"]
    oval = OvalDomain.ellipse(eps)
    kappa = conformal_disc_to_oval(oval)
    quad = BoundaryQuadrature.build(kappa)
    delta_cover = kappa.covering_radius()
    if pairs:
        _check_eps(H, pairs[0].curve, oval.semi_axes[1])

    def one(p):
        u = lambda t: continue_complex(p, H, t, check=False)  # noqa: E731
        du = lambda t: continue_complex_derivative(p, H, t, check=False)  # noqa: E731
        t = real_zero_grid(p.lam, H.length())
        return theorem1_chain(u, du, p.lam, oval, kappa=kappa, quad=quad,
                              real_samples=restrict(p, H, t), delta=margin_radius(delta_cover))

    with ThreadPoolExecutor(max_workers=threads) as ex:
        reps = list(ex.map(one, pairs))
    rows = [(r.lam, r.n_real, r.n_complex, r.two_F, r.ratio_over_h, r.holds) for r in reps]
    write_csv(os.path.join(out, "count.csv"),
              ["lambda", "n_real", "n_complex", "two_F", "ratio_over_h", "chain_holds"], rows, cfg)
    bad = [r for r in reps if not r.holds]
    if bad:
        links = sorted({k for r in bad for k, ok in r.links().items() if not ok})
        print(f"chain inequality failed for {len(bad)} of {len(reps)} pairs: {', '.join(links)}",
              file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


# ---------------------------------------------------------------------------
# qer
# ---------------------------------------------------------------------------

def qer_family(qcfg):
    """Disc Neumann pairs with ``m / lambda`` closest to ``sigma0`` for each ``m``."""
    sigma0 = qcfg["sigma0"]
    out = []
    for m in qcfg.get("m", [10, 20, 40, 80]):
        best, best_n = None, None
        n = 1
        while True:
            lam = bessel_root(m, n, "J'")
            if best is None or abs(m / lam - sigma0) < abs(m / best - sigma0):
                best, best_n = lam, n
            if m / lam < sigma0:
                break
            n += 1
        out.append((m, best_n, best))
    return out


def _qer_setup(cfg):
    q = {"r0": 0.2, "y_lo": 0.1, "y_hi": 1.45, "ramp": 0.3, "n_im": 96, "n_y": 540,
         "m": [10, 20, 40, 80], "cutoff": "tube"}
    q.update(cfg.get("qer", {}))
    H = AnalyticClosedCurve.circle(q["r0"])
    if q["cutoff"] == "zero":
        cut = zero_cutoff
    else:
        cut = tube_cutoff(q["y_lo"], q["y_hi"], q["ramp"])
    return q, H, cut


def cmd_qer(cfg, out, threads=1, long_running=False, **_):
    q, H, cut = _qer_setup(cfg)
    if cfg["domain"].get("kind", "disc") == "stadium":
        if not long_running:
            raise ConfigError("stadium QER trends need --long-running")
        return _qer_stadium(cfg, out, q)
    bdry = UNIT_DISC
    y = np.linspace(q["y_lo"], q["y_hi"], q["n_y"] + 1)[1:]
    sym = glancing_symbol(H, bdry, cut, y, n_tau=4)
    if "sigma0" not in q:
        q["sigma0"] = float(abs(np.interp(0.5 * (q["y_lo"] + q["y_hi"]), sym.y, sym.sigma[:, 0])))
    limit = liouville_limit(sym)

    def one(item):
        m, n, lam = item
        nq = max(512, 1 << int(np.ceil(np.log2(4 * lam + 1))))
        p = disc_eigenpair(m, n, NEUMANN, nq=nq)
        cf = DiscContinuation.from_pair(p, q["r0"])
        lhs = qer_lhs(None, H, bdry, lam, cut, n_re=max(256, 8 * m), n_im=q["n_im"],
                      log_sampler=cf.log)
        _, tr, length = trace_on_arclength(p)
        rhs = qer_rhs(tr, sym, 1.0 / lam, length=length)
        return lam, lhs, rhs

    with ThreadPoolExecutor(max_workers=threads) as ex:
        res = list(ex.map(one, qer_family(q)))
    rows = []
    for lam, lhs, rhs in res:
        rel = abs(lhs.value - rhs.value) / rhs.value if rhs.value else 0.0
        rows.append((lam, 1.0 / lam, lhs.value, rhs.value, rel, limit))
        if lhs.value > lhs.bound * (1 + 1e-12):
            raise InvariantError("weighted-integral bound violated")
    write_csv(os.path.join(out, "qer.csv"),
              ["lambda", "h", "lhs", "rhs", "rel_diff", "liouville_limit"], rows, cfg)
    return EXIT_OK


def _qer_stadium(cfg, out, q):
    """Trend report ``lhs / limit`` along stadium eigenpairs (no pass/fail)."""
    bdry = build_domain(cfg["domain"])
    H = build_interior(cfg.get("interior_stadium", {"kind": "circle", "radius": 0.3}))
    lo, hi = cfg.get("window", [4.0, 6.0])
    pairs = eig_scan(bdry, lo, hi, cfg["bc"], nq=cfg["nq"])
    eps = q.get("eps_tube", 0.3)
    cut = tube_cutoff(0.25 * eps, eps, 0.25 * eps)
    y = np.linspace(0.25 * eps, eps, 121)[1:]
    sym = glancing_symbol(H, bdry, cut, y, n_tau=64, bc=cfg["bc"])
    limit = liouville_limit(sym)
    rows = []
    for p in pairs:
        sampler = lambda t, p=p: continue_complex(p, H, t, check=False)  # noqa: E731
        lhs = qer_lhs(sampler, H, bdry, p.lam, cut, n_re=256, n_im=32)
        rows.append((p.lam, 1.0 / p.lam, lhs.value, limit, lhs.value / limit if limit else np.nan))
    write_csv(os.path.join(out, "qer_stadium_trend.csv"),
              ["lambda", "h", "lhs", "liouville_limit", "lhs_over_limit"], rows, cfg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# growth, weight, decay
# ---------------------------------------------------------------------------

def weight_bounds(H, bdry, eps, delta, n=256):
    """``m_H(eps - delta) = min S`` and ``M_H(eps) = max S`` over ``Re t``."""
    x = 2 * np.pi * np.arange(n) / n - np.pi
    lo = 0.0 if eps - delta <= 0 else float(np.min(weight(H, bdry, x + 1j * (eps - delta))))
    hi = float(np.max(weight(H, bdry, x + 1j * eps))) if eps > 0 else 0.0
    return lo, hi


def cmd_growth(cfg, out, threads=1, **_):
    pairs = _pairs_for(cfg, out, threads)
    H = build_interior(cfg["interior"])
    eps, delta = cfg["eps"], cfg["delta"]
    bdry = pairs[0].curve if pairs else build_domain(cfg["domain"])
    _check_eps(H, bdry, eps)
    m_lo, m_hi = weight_bounds(H, bdry, eps, delta)
    g = cfg["grid"]

    def one(p):
        return p.lam, np.log(grauert_max(p, H, eps, n_re=g["n_re"], n_im=g["n_im"]).value)

    with ThreadPoolExecutor(max_workers=threads) as ex:
        res = sorted(ex.map(one, pairs))
    lam = np.array([r[0] for r in res])
    logm = np.array([r[1] for r in res])
    slope = float(np.polyfit(lam, logm, 1)[0]) if len(lam) >= 2 else float("nan")
    inside = bool(m_lo <= slope <= m_hi) if np.isfinite(slope) else False
    rows = [(l_, v, m_lo, m_hi, slope, inside) for l_, v in zip(lam, logm)]
    write_csv(os.path.join(out, "growth.csv"),
              ["lambda", "log_max_uC", "m_H", "M_H", "slope", "slope_in_bounds"], rows, cfg)
    return EXIT_OK


def cmd_weight(cfg, out, **_):
    H = build_interior(cfg["interior"])
    bdry = build_domain(cfg["domain"])
    wcfg = {"n_re": 64, "im": [0.025, 0.05, 0.1, 0.2]}
    wcfg.update(cfg.get("weight", {}))
    x = 2 * np.pi * np.arange(wcfg["n_re"]) / wcfg["n_re"] - np.pi
    L = H.length()
    rows = []
    for y in wcfg["im"]:
        S = weight(H, bdry, x + 1j * y)
        kappa = H.curvature(x)
        asym = weight_asymptotic(kappa, np.full_like(x, y * L / (2 * np.pi)))
        rows.extend((xi, y, s, a) for xi, s, a in zip(x, S, asym))
    write_csv(os.path.join(out, "weight.csv"), ["re_t", "im_t", "S", "S_asymptotic"], rows, cfg)
    return EXIT_OK


def cmd_decay(cfg, out, **_):
    d = {"ratio": 0.6, "lam_range": [10.0, 60.0], "r0": 0.5}
    d.update(cfg.get("decay", {}))
    fam = []
    for m in range(1, int(d["lam_range"][1]) + 1):
        n = 1
        best = None
        while True:
            lam = bessel_root(m, n, "J'")
            if best is None or abs(m / lam - d["ratio"]) < abs(m / best[1] - d["ratio"]):
                best = (n, lam)
            if m / lam < d["ratio"]:
                break
            n += 1
        n, lam = best
        if d["lam_range"][0] <= lam <= d["lam_range"][1] and abs(m / lam - d["ratio"]) < 0.05:
            p = disc_eigenpair(m, n, cfg["bc"], nq=256)
            fam.append((lam, DiscContinuation.from_pair(p, d["r0"])))
    oval = OvalDomain.ellipse(cfg["eps"])
    fits = residual_decay(fam, oval, cfg["radii"])
    rows = []
    for f in fits:
        for lam, v in zip(f.lam, f.log_residual):
            rows.append((f.radius, lam, v, f.c, f.b))
    write_csv(os.path.join(out, "decay.csv"), ["R", "lambda", "log_residual", "c_R", "b_R"],
              rows, cfg)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "count": cmd_count,
    "qer": cmd_qer,
    "growth": cmd_growth,
    "weight": cmd_weight,
    "decay": cmd_decay,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="nodaltube", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", default=None, help="output directory (default: config 'output')")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--long-running", action="store_true",
                        help="enable long trend runs (stadium QER)")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = args.out or cfg.get("output", "out")
        os.makedirs(out, exist_ok=True)
        return COMMANDS[args.command](cfg, out, threads=max(1, args.threads),
                                      long_running=args.long_running)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantError as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
