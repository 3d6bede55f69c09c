"""Command-line front end: kernel tables, resonance reports, scans, audits.

Reports are deterministic: identical configs give byte-identical output
regardless of the host's thread settings.  That requires capping the BLAS
thread pools before numpy ever loads, which is why this module sets the
environment first thing and why the package __init__ imports submodules
lazily.  All numeric output is decimal with 17 significant digits.

Exit codes: 0 success, 1 tolerance failure, 2 usage error, 3 numerical
non-convergence (under --strict, or unconverged kernel entries without
--allow-unconverged).
"""

import os

for _k in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS",
           "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ[_k] = "1"

import argparse
import hashlib
import json
import sys

import numpy as np

from .inequalities import (audit_suite, hls_hardy_check, intcal_regime_check,
                           kernel_bound_check)
from .lap import ScanResult, kernel_nullity_scan, lap_scan
from .lattice import GridFn, Potential, load_potential
from .levelset import level_set_mesh, stone_rhs
from .quadrature import QuadratureConfig, kernel_Kl
from .resolvent import stone_lhs
from .resonance import (asymptote_check, classify_state, decay_fit,
                        solve_threshold_state, threshold_couplings)
from .symbol import threshold_distance

__all__ = ["main"]

_G17 = lambda v: format(float(v), ".17g")  # noqa: E731


def _config_fingerprint(args) -> str:
    items = sorted((k, repr(v)) for k, v in vars(args).items()
                   if k not in ("func", "out"))
    return hashlib.sha256(repr(items).encode()).hexdigest()[:12]


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_grid(spec: str) -> np.ndarray:
    try:
        lo, hi, step = (float(p) for p in spec.split(":"))
    except ValueError:
        raise SystemExit(2)
    if step <= 0 or hi < lo:
        raise SystemExit(2)
    n = int(round((hi - lo) / step))
    vals = lo + step * np.arange(n + 1)
    return vals[vals <= hi + 1e-12 * max(1.0, abs(hi))]


def _parse_potential(spec: str, d: int, table=None):
    """'inline:x,y,z=v;...', 'preset:<name>', 'none', or a file path."""
    if spec in ("none", "0"):
        return None
    if spec.startswith("inline:"):
        sites, vals = [], []
        for part in spec[len("inline:"):].split(";"):
            part = part.strip()
            if not part:
                continue
            coords, val = part.split("=")
            sites.append([int(c) for c in coords.split(",")])
            vals.append(float(val))
        return Potential(d, sites, vals)
    if spec.startswith("preset:"):
        name = spec[len("preset:"):]
        if table is None:
            raise ValueError("presets need a kernel table")
        k0 = float(table.value((0,) * d))
        if name == "critical-delta":
            return Potential.delta(d, -1.0 / k0)
        if name == "odd-pair":
            k2 = float(table.value((2,) + (0,) * (d - 1)))
            g = -1.0 / (k0 - k2)
            e1 = (1,) + (0,) * (d - 1)
            me1 = (-1,) + (0,) * (d - 1)
            return Potential(d, [e1, me1], [g, g])
        raise SystemExit(2)
    if spec.startswith("file:"):
        spec = spec[len("file:"):]
    return load_potential(spec, d)


def _parse_f(spec: str, d: int) -> GridFn:
    if spec == "delta0":
        return GridFn.delta(d, 1)
    if spec == "delta0+e1":
        f = GridFn.delta(d, 1)
        f.values[f._idx((1,) + (0,) * (d - 1))] = 1.0
        return f
    pot = load_potential(spec[5:] if spec.startswith("file:") else spec, d)
    return GridFn.from_sites(d, int(pot.support_radius()), pot.sites, pot.vals)


# --- commands ---------------------------------------------------------------


def cmd_kernel(args) -> int:
    if args.l >= args.d or args.l <= 0:
        print("error: need 0 < l < d", file=sys.stderr)
        return 2
    cfg = QuadratureConfig(grid_size=args.N, cache_dir=args.cache_dir) \
        if (args.N or args.cache_dir) else None
    table = kernel_Kl(args.d, args.l, args.L, cfg)
    out = args.out or f"K{args.l}_d{args.d}_L{args.L}.lrk"
    table.save(out)
    nunc = int(table.unconverged.sum())
    lines = [
        f"config {_config_fingerprint(args)}",
        f"table {table.fingerprint()}",
        f"K_{args.l}(0) = {_G17(table.value((0,) * args.d))}",
        f"max_rel_error = {_G17(table.max_rel_error())}",
        f"unconverged = {nunc}",
    ]
    if args.L >= 1:
        kb = kernel_bound_check(args.l, args.d, args.L, table=table)
        lines.append(f"decay_sup = {_G17(kb.sup)}")
        lines.append(f"decay_dyadic_ratio = {_G17(kb.ratio)}")
    lines.append(f"written {out}")
    print("\n".join(lines))
    if nunc and not args.allow_unconverged:
        return 3
    return 0


def cmd_resonance(args) -> int:
    cfg = QuadratureConfig(cache_dir=args.cache_dir) if args.cache_dir else None
    d = args.d
    box = args.L or {3: 50, 4: 24}.get(d, 16)
    table = kernel_Kl(d, 2, 2 * box, cfg)
    V = _parse_potential(args.potential, d, table)
    report = {
        "config_fingerprint": _config_fingerprint(args),
        "table_fingerprint": table.fingerprint(),
        "d": d,
        "box_L": box,
        "couplings": [],
        "states": [],
    }
    if V is not None and len(V.sites):
        g, mu = threshold_couplings(V, table, cfg)
        report["couplings"] = [float(v) for v in g]
        try:
            res = solve_threshold_state(V, box, table, cfg)
        except ArithmeticError:
            res = None
        if res is not None:
            report["singular_values"] = [float(s) for s in res.singular_values]
            r1, r2 = {3: (30.0, 50.0), 4: (12.0, 20.0)}.get(d, (8.0, 14.0))
            r2 = min(r2, float(box))
            r1 = min(r1, 0.6 * r2)
            for st in res.states:
                cls = classify_state(st, V)
                slope, _, resid = decay_fit(st.u, r1, r2)
                entry = {
                    "s0": float(st.s0),
                    "s0_rel": float(cls["s0_rel"]),
                    "classification": cls["kind"],
                    "null_residual": float(st.null_residual),
                    "decay_exponent": float(slope),
                    "decay_resid": float(resid),
                }
                if cls["kind"] == "resonance":
                    devmax, _ = asymptote_check(st, r1, r2)
                    entry["asymptote_residual"] = float(devmax)
                report["states"].append(entry)
    _emit(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out)
    return 0


def cmd_stone(args) -> int:
    d = args.d
    if d != 3:
        print("error: stone check is d=3 only", file=sys.stderr)
        return 2
    f = _parse_f(args.f, d)
    lam = args.lam
    near = threshold_distance(lam, d) < 0.5
    tol = args.tol * (5.0 if near else 1.0)
    lhs, rep = stone_lhs(f, lam, side=args.side)
    mesh = level_set_mesh(lam, n=args.mesh_n, cutoff=args.cutoff, d=d)
    rhs = stone_rhs(f, mesh)
    gap = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    rows = ["# config " + _config_fingerprint(args),
            "lam,side,lhs,rhs,rel_gap,ladder_diag,converged,tag",
            ",".join([_G17(lam), args.side, _G17(lhs), _G17(rhs), _G17(gap),
                      _G17(rep.diagnostic), str(int(rep.converged)),
                      "near-threshold" if near else "ok"])]
    _emit("\n".join(rows) + "\n", args.out)
    if args.strict and not rep.converged:
        return 3
    return 1 if gap > tol else 0


def cmd_lap(args) -> int:
    d = args.d
    if d != 3:
        print("error: lap scans are d=3 only", file=sys.stderr)
        return 2
    grid = _parse_grid(args.grid)
    boxes = [int(b) for b in args.boxes.split(",")]
    if args.potential.startswith("preset:"):
        V = _parse_potential(args.potential, d, kernel_Kl(d, 2, 2))
    else:
        V = _parse_potential(args.potential, d)
    if args.nullity:
        if V is None:
            print("error: nullity scan needs a potential", file=sys.stderr)
            return 2
        sv = kernel_nullity_scan(V, grid, side=args.side)
        rows = ["# config " + _config_fingerprint(args), "lam,sigma_min"]
        rows += [f"{_G17(l)},{_G17(s)}" for l, s in zip(grid, sv)]
        _emit("\n".join(rows) + "\n", args.out)
        return 0
    res = lap_scan(V, grid, boxes, s=args.s, side=args.side)
    text = ("# config " + _config_fingerprint(args) + "\n"
            + "# result " + res.fingerprint() + "\n" + res.to_csv())
    _emit(text, args.out)
    if not all(np.isfinite(r.norm) for r in res.rows):
        return 1
    if args.strict and not all(r.converged for r in res.rows):
        return 3
    return 0


def cmd_audit(args) -> int:
    cfg = QuadratureConfig(cache_dir=args.cache_dir) if args.cache_dir else None
    rows = []
    if args.regime == "suite":
        rows = audit_suite(cfg=cfg)
    elif args.regime == "intcal":
        rc = intcal_regime_check(args.k, args.l, args.d, args.R or 64)
        rows = [{"check": f"intcal-{rc.tag}",
                 "params": f"d={args.d},k={args.k},l={args.l}",
                 "value": rc.sup_ratio, "growth": rc.growth,
                 "envelope_exp": rc.envelope_exp, "passed": not rc.grew}]
    elif args.regime == "kernel":
        kb = kernel_bound_check(int(args.l), args.d, args.R or 40, cfg=cfg)
        rows = [{"check": "kernel-decay",
                 "params": f"d={args.d},l={int(args.l)},R={args.R or 40}",
                 "value": kb.sup, "ratio": kb.ratio,
                 "passed": bool(np.isfinite(kb.sup))}]
    elif args.regime == "hardy":
        n, info = hls_hardy_check(args.alpha, args.beta, args.d, args.L or 16,
                                  cfg=cfg)
        rows = [{"check": "hardy", "params":
                 f"d={args.d},a={args.alpha},b={args.beta},L={args.L or 16}",
                 "value": n, "passed": bool(np.isfinite(n))}]
    else:
        return 2
    lines = ["# config " + _config_fingerprint(args),
             "check,params,value,detail,passed"]
    ok = True
    for r in rows:
        detail = ";".join(f"{k}={_G17(v)}" for k, v in sorted(r.items())
                          if k not in ("check", "params", "value", "passed"))
        lines.append(",".join([r["check"], r["params"].replace(",", " "),
                               _G17(r["value"]), detail,
                               str(int(bool(r["passed"])))]))
        ok = ok and bool(r["passed"])
    _emit("\n".join(lines) + "\n", args.out)
    return 0 if ok else 1


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lrkit",
                                description="Lattice resolvent toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--d", type=int, default=3)
        sp.add_argument("--out", default=None)
        sp.add_argument("--cache-dir", default=os.environ.get("LRK_CACHE_DIR"))
        sp.add_argument("--strict", action="store_true")

    k = sub.add_parser("kernel", help="build a convolution kernel table")
    common(k)
    k.add_argument("--l", type=int, default=2)
    k.add_argument("--L", type=int, required=True)
    k.add_argument("--N", type=int, default=None)
    k.add_argument("--allow-unconverged", action="store_true")
    k.set_defaults(func=cmd_kernel)

    r = sub.add_parser("resonance", help="threshold state report")
    common(r)
    r.add_argument("--potential", required=True)
    r.add_argument("--L", type=int, default=None)
    r.set_defaults(func=cmd_resonance)

    s = sub.add_parser("stone", help="spectral-density consistency check")
    common(s)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--f", default="delta0")
    s.add_argument("--side", choices=("+", "-"), default="+")
    s.add_argument("--mesh-n", type=int, default=256)
    s.add_argument("--cutoff", type=float, default=0.05)
    s.add_argument("--tol", type=float, default=1e-2)
    s.set_defaults(func=cmd_stone)

    lp = sub.add_parser("lap", help="weighted resolvent scans")
    common(lp)
    lp.add_argument("--grid", required=True, help="lo:hi:step")
    lp.add_argument("--potential", default="none")
    lp.add_argument("--boxes", default="8,12,16")
    lp.add_argument("--s", type=float, default=1.0)
    lp.add_argument("--side", choices=("+", "-"), default="+")
    lp.add_argument("--nullity", action="store_true",
                    help="smallest singular value of I + R0 V instead")
    lp.set_defaults(func=cmd_lap)

    a = sub.add_parser("audit", help="inequality audits")
    common(a)
    a.add_argument("--regime", default="suite",
                   choices=("suite", "intcal", "kernel", "hardy"))
    a.add_argument("--k", type=float, default=2.0)
    a.add_argument("--l", type=float, default=2.0)
    a.add_argument("--R", type=int, default=None)
    a.add_argument("--L", type=int, default=None)
    a.add_argument("--alpha", type=float, default=1.0)
    a.add_argument("--beta", type=float, default=1.0)
    a.set_defaults(func=cmd_audit)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.cache_dir:
        os.environ["LRK_CACHE_DIR"] = args.cache_dir
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
