"""Acceptance battery: ten end-to-end criteria with printed pass/fail lines.

Each test records one "[criterion NN] PASS/FAIL ..." line (echoed in the
terminal summary) before asserting, so a red criterion still reports its
measured numbers.  Criterion 01 times a from-scratch build of the big d=3
kernel table; everything downstream reuses it through the in-process memo.
"""

import os
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

import lrkit.quadrature as quad
from lrkit.inequalities import audit_suite
from lrkit.lap import kernel_nullity_scan, lap_scan
from lrkit.lattice import GridFn, Potential, lorentz_quasinorm
from lrkit.levelset import (l2_membership, l2_membership_symmetric,
                            level_set_mesh, restrict_fourier, stone_rhs,
                            surface_integral)
from lrkit.quadrature import QuadratureConfig, kernel_Kl, kernel_class_values
from lrkit.resolvent import stone_lhs
from lrkit.resonance import (asymptote_check, birman_schwinger_matrix,
                             classify_state, decay_fit, solve_threshold_state)

C3 = 1.0 / (4.0 * np.pi)


def test_criterion_01_kernel_constant_and_doubling(acceptance_report):
    # time an honest from-scratch build: purge the memo, bypass disk cache
    cfg = QuadratureConfig(cache_dir=None)
    N = quad._default_kernel_grid(3, 60)
    N += N % 2
    quad._MEMO.pop(("K", 3, 2, 60, N, cfg.patch_radius, cfg.patch_nodes,
                    cfg.target_rel_err), None)
    t0 = time.perf_counter()
    table = kernel_Kl(3, 2, 60, cfg)
    wall = time.perf_counter() - t0

    ax = np.arange(61, dtype=float)
    gx, gy, gz = np.meshgrid(ax, ax, ax, indexing="ij")
    r = np.sqrt(gx**2 + gy**2 + gz**2)
    mask = (r >= 20.0) & (r <= 60.0)
    dev = float((np.abs(table.values * r - C3)[mask] / C3).max())
    doubling = table.max_rel_error()
    nunc = int(table.unconverged.sum())

    ok = dev <= 0.03 and doubling <= 1e-6 and nunc == 0 and wall <= 120.0
    acceptance_report(
        f"[criterion 01] {'PASS' if ok else 'FAIL'} kernel asymptotics: "
        f"max |K_2(x)|x|-c3|/c3 = {dev:.2e} (<=3e-2), doubling error "
        f"{doubling:.2e} (<=1e-6), unconverged {nunc}, build {wall:.1f}s (<=120s)")
    assert dev <= 0.03
    assert doubling <= 1e-6
    assert nunc == 0
    assert wall <= 120.0


def test_criterion_02_exact_resonance_d3(acceptance_report, table_d3_L60,
                                         critical_delta):
    table, V = table_d3_L60, critical_delta
    k0 = float(table.value((0, 0, 0)))
    M, _ = birman_schwinger_matrix(V, table)
    bs_dev = float(np.max(np.abs(np.linalg.eigvals(M) + 1.0)))

    st = solve_threshold_state(V, 50, table).state
    ref = table.value_block(3, 50) / k0
    idx = np.abs(np.arange(-50, 51))
    err = table.errors[np.ix_(idx, idx, idx)] / k0
    entry_ok = bool(np.all(np.abs(st.u.values - ref) <= 10.0 * err + 1e-16))
    # s0 in the max-norm gauge: u = K_2/K_2(0), so s0 * K_2(0) = -1
    s0_dev = abs(st.s0 * k0 + 1.0)
    kind = classify_state(st, V)["kind"]
    asym, _ = asymptote_check(st, 30.0, 50.0)
    slope, _, _ = decay_fit(st.u, 30.0, 50.0)

    ok = (bs_dev <= 1e-8 and entry_ok and s0_dev <= 1e-8
          and kind == "resonance" and asym <= 0.05 and abs(slope + 1.0) <= 0.1)
    acceptance_report(
        f"[criterion 02] {'PASS' if ok else 'FAIL'} critical delta well d=3: "
        f"BS eig dev {bs_dev:.1e} (<=1e-8), u=K_2/K_2(0) within 10x error: "
        f"{entry_ok}, s0*K_2(0)+1 = {s0_dev:.1e} (<=1e-8), kind={kind}, "
        f"asymptote dev {asym:.2e} (<=5e-2), decay {slope:.3f} (-1+-0.1)")
    assert bs_dev <= 1e-8
    assert entry_ok
    assert s0_dev <= 1e-8
    assert kind == "resonance"
    assert asym <= 0.05
    assert abs(slope + 1.0) <= 0.1


def test_criterion_03_dimension_dichotomy(acceptance_report, table_d4_L30):
    # d=5: the same construction gives a genuine eigenfunction
    tab5 = kernel_Kl(5, 2, 4)
    k05 = float(tab5.value((0,) * 5))
    V5 = Potential.delta(5, -1.0 / k05)
    st5 = solve_threshold_state(V5, 4, tab5).state
    kind5 = classify_state(st5, V5)["kind"]
    reps, vals, _, mults = kernel_class_values(5, 2, 32)
    mem5 = l2_membership_symmetric(reps, vals / k05, mults, [4, 8, 16, 32])

    # d=4: the same construction still gives a resonance
    k04 = float(table_d4_L30.value((0,) * 4))
    V4 = Potential.delta(4, -1.0 / k04)
    st4 = solve_threshold_state(V4, 24, table_d4_L30).state
    kind4 = classify_state(st4, V4)["kind"]

    ok = kind5 == "eigenfunction" and mem5["member"] and kind4 == "resonance"
    ratios = ", ".join(f"{x:.3f}" for x in mem5["ratios"])
    acceptance_report(
        f"[criterion 03] {'PASS' if ok else 'FAIL'} dimension dichotomy: "
        f"d=5 kind={kind5} with square-summable shells (increment ratios "
        f"{ratios} <= 0.55), d=4 kind={kind4}")
    assert kind5 == "eigenfunction"
    assert mem5["member"], mem5
    assert kind4 == "resonance"


def test_criterion_04_odd_eigenfunction_branch(acceptance_report,
                                               table_d3_L60):
    table = table_d3_L60
    k0 = float(table.value((0, 0, 0)))
    k2 = float(table.value((2, 0, 0)))
    g = -1.0 / (k0 - k2)
    V = Potential(3, [(1, 0, 0), (-1, 0, 0)], [g, g])
    st = solve_threshold_state(V, 50, table).state

    odd_w = abs(st.w[0] + st.w[1]) <= 1e-8
    flip = st.u.values[::-1, :, :]
    odd_u = float(np.max(np.abs(st.u.values + flip))) <= 1e-10
    s0 = abs(st.s0)
    slope, _, _ = decay_fit(st.u, 30.0, 50.0)
    mem = l2_membership(st.u, [6, 12, 24, 48])

    ok = odd_w and odd_u and s0 <= 1e-10 and slope <= -1.8 and mem["member"]
    ratios = ", ".join(f"{x:.3f}" for x in mem["ratios"])
    acceptance_report(
        f"[criterion 04] {'PASS' if ok else 'FAIL'} odd two-site well d=3: "
        f"null vector odd {odd_w and odd_u}, |s0| = {s0:.1e} (<=1e-10), "
        f"decay {slope:.3f} (<=-1.8), square-summable (ratios {ratios})")
    assert odd_w and odd_u
    assert s0 <= 1e-10
    assert slope <= -1.8
    assert mem["member"], mem


def test_criterion_05_spectral_density_consistency(acceptance_report):
    f0 = GridFn.delta(3, 1)
    f1 = GridFn.delta(3, 1)
    f1.values[f1._idx((1, 0, 0))] = 1.0
    t0 = time.perf_counter()
    gaps = {}
    for lam, tol in ((2.0, 1e-2), (6.0, 1e-2), (4.0, 5e-2)):
        mesh = level_set_mesh(lam, n=256, cutoff=0.05)
        for name, f in (("delta0", f0), ("delta0+e1", f1)):
            lhs, rep = stone_lhs(f, lam)
            rhs = stone_rhs(f, mesh)
            gaps[(lam, name)] = (abs(lhs - rhs) / abs(rhs), tol, rep.converged)
    wall = time.perf_counter() - t0

    ok = wall <= 300.0 and all(g <= tol and conv
                               for g, tol, conv in gaps.values())
    worst_reg = max(g for (lam, _), (g, _, _) in gaps.items() if lam != 4.0)
    worst_thr = max(g for (lam, _), (g, _, _) in gaps.items() if lam == 4.0)
    acceptance_report(
        f"[criterion 05] {'PASS' if ok else 'FAIL'} density consistency d=3: "
        f"max rel gap {worst_reg:.1e} at lam in {{2,6}} (<=1e-2), "
        f"{worst_thr:.1e} at lam=4 (<=5e-2), runtime {wall:.1f}s (<=300s)")
    for (lam, name), (g, tol, conv) in gaps.items():
        assert conv, (lam, name)
        assert g <= tol, (lam, name, g)
    assert wall <= 300.0


def test_criterion_06_restriction_probe(acceptance_report):
    rng = np.random.default_rng(2026)
    fs = [GridFn(3, 6, rng.standard_normal((13, 13, 13))) for _ in range(100)]

    def max_ratio(mesh):
        best = 0.0
        for f in fs:
            fh = restrict_fourier(f, mesh)
            num = np.sqrt(float(np.real(
                surface_integral(mesh, np.abs(fh) ** 2, "mu"))))
            best = max(best, num / lorentz_quasinorm(f, 2.0, 1.0))
        return best

    r_coarse = max_ratio(level_set_mesh(4.0, n=256, cutoff=0.05))
    r_fine = max_ratio(level_set_mesh(4.0, n=512, cutoff=0.025))
    change = abs(r_fine - r_coarse) / r_coarse

    # the excised-mass probe needs cutoffs above the mesh resolution floor
    # (~8 pi^2 / n); at the default 0.05 nothing is excised at these n
    exc1 = level_set_mesh(4.0, n=512, cutoff=0.8).excised_mu
    exc2 = level_set_mesh(4.0, n=1024, cutoff=0.4).excised_mu
    drop = 1.0 - exc2 / exc1

    ok = change < 0.10 and drop >= 0.25
    acceptance_report(
        f"[criterion 06] {'PASS' if ok else 'FAIL'} restriction probe lam=4: "
        f"max ratio {r_coarse:.6f} -> {r_fine:.6f}, change {change:.2%} "
        f"(<10%); excised measure drop per cutoff halving {drop:.1%} (>=25%)")
    assert change < 0.10
    assert drop >= 0.25


def test_criterion_07_interior_nullity(acceptance_report):
    rng = np.random.default_rng(77)
    ax = (-1, 0, 1)
    sites = [(a, b, c) for a in ax for b in ax for c in ax]
    pots = [Potential(3, sites, rng.uniform(-0.2, 0.2, size=len(sites)))
            for _ in range(20)]
    grid = np.arange(0.5, 11.6, 0.5)
    sv = kernel_nullity_scan(pots, grid)
    smin = float(sv.min())

    ok = sv.shape == (20, 23) and smin >= 0.5
    acceptance_report(
        f"[criterion 07] {'PASS' if ok else 'FAIL'} interior nullity scan: "
        f"min sigma_min {smin:.4f} over 20 potentials x 23 energies (>=0.5)")
    assert sv.shape == (20, 23)
    assert smin >= 0.5


def test_criterion_08_scan_stability(acceptance_report, dos_table_32):
    t0 = time.perf_counter()
    free_grid = np.arange(0.0, 12.0 + 1e-9, 0.25)       # covers 0, 4, 8, 12
    pert_grid = np.arange(0.25, 11.75 + 1e-9, 0.25)
    res_free = lap_scan(None, free_grid, [12, 16], table=dos_table_32)
    res_pert = lap_scan(Potential.delta(3, -0.5), pert_grid, [12, 16],
                        table=dos_table_32)
    wall = time.perf_counter() - t0

    norms = {}
    for r in res_free.rows + res_pert.rows:
        norms[(r.kind, r.lam, r.box)] = r.norm
    finite = all(np.isfinite(v) for v in norms.values())
    growths = []
    for (kind, lam, box), v in norms.items():
        if box == 16:
            growths.append(v / norms[(kind, lam, 12)] - 1.0)
    worst = max(growths)

    ok = finite and worst < 0.10 and wall <= 900.0
    acceptance_report(
        f"[criterion 08] {'PASS' if ok else 'FAIL'} scan stability: "
        f"{len(norms)} entries finite={finite}, max box-12->16 growth "
        f"{worst:.2%} (<10%), runtime {wall:.1f}s (<=900s)")
    assert finite
    assert worst < 0.10
    assert wall <= 900.0


def test_criterion_09_inequality_audits(acceptance_report, table_d3_L60,
                                        table_d3_l1_L40, table_d4_L30):
    rows = audit_suite(tables={"d3l2": table_d3_L60, "d3l1": table_d3_l1_L40,
                               "d4l2": table_d4_L30})
    npass = sum(bool(r["passed"]) for r in rows)
    failed = [r for r in rows if not r["passed"]]
    hardy = next(r for r in rows if r["check"] == "hardy-box-growth")
    oracle = next(r for r in rows if r["check"] == "hardy-fourier-oracle")

    ok = not failed
    detail = "; ".join(f"{r['check']} ({r['params']})" for r in failed)
    acceptance_report(
        f"[criterion 09] {'PASS' if ok else 'FAIL'} inequality audits: "
        f"{npass}/{len(rows)} checks passed"
        + (f"; failing: {detail} — box norm grows {hardy['growth']:.2%} from "
           f"L=16 to L=24 (target <5%; the compressed norm climbs toward its "
           f"lattice value ~4 logarithmically, see README), Fourier-oracle "
           f"gap {oracle['gap']:.2%} (<10%) does pass" if failed else ""))
    assert not failed, (
        "audit rows failed: "
        + "; ".join(f"{r['check']}: {r}" for r in failed))


def test_criterion_10_byte_identical_reports(acceptance_report, tmp_path):
    cmds = [
        ("kernel", ["kernel", "--L", "2", "--out", "k.lrk"], "k.lrk"),
        ("resonance", ["resonance", "--potential", "preset:critical-delta",
                       "--L", "6", "--out", "r.json"], "r.json"),
        ("lap", ["lap", "--grid", "2:3:0.5", "--boxes", "2,3",
                 "--potential", "inline:0,0,0=-0.5", "--out", "s.csv"],
         "s.csv"),
    ]
    tvars = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS")

    # one fixed cache path (part of the config) wiped before every run, so
    # both thread counts recompute from scratch under an identical config
    cache = tmp_path / "cache"
    outputs = {}
    for threads in (1, 4):
        for name, argv, outfile in cmds:
            wd = tmp_path / f"t{threads}_{name}"
            wd.mkdir()
            env = dict(os.environ)
            for k in tvars:
                env[k] = str(threads)
            env["LRK_CACHE_DIR"] = str(cache)
            shutil.rmtree(cache, ignore_errors=True)
            cache.mkdir()
            p = subprocess.run([sys.executable, "-m", "lrkit.cli"] + argv,
                               capture_output=True, text=True, env=env,
                               cwd=wd)
            assert p.returncode == 0, (name, threads, p.stderr)
            outputs[(name, threads)] = (p.stdout, (wd / outfile).read_bytes())

    mismatched = [name for name, _, _ in cmds
                  if outputs[(name, 1)] != outputs[(name, 4)]]
    ok = not mismatched
    acceptance_report(
        f"[criterion 10] {'PASS' if ok else 'FAIL'} determinism: "
        f"{len(cmds)} commands re-run with 1 vs 4 threads, "
        + ("all reports byte-identical" if ok
           else f"mismatch in: {', '.join(mismatched)}"))
    assert not mismatched
