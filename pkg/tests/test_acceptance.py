"""Desk-scale acceptance suite: one test per criterion, each at its stated tolerance.

Run ``pytest tests/test_acceptance.py`` to see the per-criterion summary block.
"""

import math
import time

import numpy as np
import pytest
from scipy.special import iv

import oracles
from tracestab.convex2d import ConvexPolygon, asymmetry_indices, outer_parallel_area, random_convex_polygon, regular_polygon
from tracestab.fem import OUTER, linear_steklov_reference, mesh_domain, minimize_trace_quotient, radiality_check, robin_neumann_fem
from tracestab.harness import SuiteConfig, counterexample_4d, run_suite, shell_domain
from tracestab.radial import Ball, ProblemParams, Shell, robin_neumann_shell, sigma_ball, solve_ball, solve_shell
from tracestab.webfunc import ClassParams, HoledDomain, build_web, hybrid_asymmetry

pytestmark = pytest.mark.slow

BALL_D2 = math.sqrt(iv(1, 1.0) / iv(0, 1.0))
BALL_D3 = math.sqrt(math.exp(-1) / math.sinh(1))


def _timed(f, *args):
    t0 = time.perf_counter()
    out = f(*args)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def mt1():
    return run_suite("mt1", SuiteConfig(sample_count=50, mesh_h=0.02))


def _random_rows(report):
    return [r for r in report.rows if r["kind"] == "random"]


def test_c01_radial_oracles(criterion):
    assert BALL_D2 == pytest.approx(oracles.sigma22_ball_d2(), abs=1e-15)
    assert BALL_D3 == pytest.approx(oracles.sigma22_ball_d3(), abs=1e-15)
    b2, t2 = _timed(lambda: solve_ball(ProblemParams(2, 2, 2, Ball(1.0))).sigma)
    b3, t3 = _timed(lambda: solve_ball(ProblemParams(2, 2, 3, Ball(1.0))).sigma)
    sh, t4 = _timed(lambda: solve_shell(ProblemParams(2, 2, 2, Shell(1.0, 2.0))).sigma)
    shell_ref = oracles.sigma22_shell_d2(1.0, 2.0)
    errs = (abs(b2 - BALL_D2), abs(b3 - BALL_D3), abs(sh - shell_ref))
    ok = max(errs) <= 1e-6 and max(t2, t3, t4) < 1.0
    criterion(1, ok, f"max |err| = {max(errs):.2e} (tol 1e-6), slowest solve {max(t2, t3, t4):.3f} s")
    assert ok


def test_c02_q_scaling(criterion):
    t0 = time.perf_counter()
    spreads = []
    for p, qs in [(2.0, (1.0, 1.5, 2.0)), (3.0, (1.0, 2.0, 3.0))]:
        vals = [sigma_ball(p, q, 2, 1.0) * (2 * math.pi) ** (1 / q) for q in qs]
        spreads.append((max(vals) - min(vals)) / max(vals))
    dt = time.perf_counter() - t0
    ok = max(spreads) <= 1e-8 and dt < 5.0
    criterion(2, ok, f"max relative spread {max(spreads):.2e} (tol 1e-8), {dt:.2f} s")
    assert ok


def test_c03_convex_suite(criterion, mt1):
    rows = _random_rows(mt1)
    gated = [r for r in rows if r["metrics"]["asymmetry_star"] >= 0.05]
    below = all(r["metrics"]["sigma_h"] < 0.668124 for r in gated)
    flags = all(r["checks"][f] for r in rows for f in ("wq", "dwp", "wp"))
    errors = [r for r in mt1.rows if r["kind"] == "error"]
    ok = len(rows) == 50 and len(gated) == 50 and below and flags and not errors
    worst = max(r["metrics"]["sigma_h"] for r in rows)
    criterion(3, ok, f"{len(gated)}/50 with asymmetry >= 0.05, max sigma_h = {worst:.6f} < 0.668124: {below}, web flags: {flags}")
    assert ok


def test_c04_quantitative_chain(criterion, mt1):
    rows = _random_rows(mt1)
    margins = [r["report"]["extras"]["deficit_chain_margin"] for r in rows]
    bern = [r["report"]["extras"]["bernoulli_margin"] for r in rows]
    ok = len(rows) == 50 and min(margins) >= -1e-8 and min(bern) >= -1e-8
    criterion(4, ok, f"min chain margin {min(margins):.3e}, min Bernoulli margin {min(bern):.3e} (tol -1e-8)")
    assert ok


def test_c05_stability_shape(criterion, mt1):
    rows = _random_rows(mt1)
    ratios = [r["metrics"]["ratio"] for r in rows]
    disc = mt1.rows[0]
    assert disc["kind"] == "disc"
    d_def, d_asym = abs(disc["metrics"]["deficit_h"]), disc["metrics"]["asymmetry_star"]
    ok = all(x is not None and x > 0 for x in ratios) and d_def <= 1e-3 and d_asym <= 1e-3
    criterion(5, ok, f"min deficit/asym^2 = {min(ratios):.4f}, disc row deficit {d_def:.2e}, asym {d_asym:.2e}")
    assert ok


def test_c06_holed_suite(criterion):
    rep = run_suite("mt3", SuiteConfig(sample_count=25, mesh_h=0.02))
    rows = _random_rows(rep)
    sigma_A = solve_shell(ProblemParams(2, 2, 2, Shell(1.0, 2.0))).sigma
    below = all(r["metrics"]["sigma_h"] <= sigma_A + 1e-3 for r in rows)
    chain = [r["report"]["extras"]["inner_chain_margin"] for r in rows]
    ok = len(rows) == 25 and below and min(chain) >= -1e-8 and rep.passed
    criterion(6, ok, f"max sigma_h {max(r['metrics']['sigma_h'] for r in rows):.6f} vs shell {sigma_A:.6f}, min inner margin {min(chain):.3e}")
    assert ok


def test_c07_hybrid_asymmetry(criterion):
    rep = run_suite("mt4", SuiteConfig(sample_count=10, mesh_h=0.02))
    shell_row, rows = rep.rows[0], _random_rows(rep)
    assert shell_row["kind"] == "shell"
    a_shell = shell_row["metrics"]["alpha_hyb"]
    pos = all(r["metrics"]["alpha_hyb"] > 0 for r in rows)
    gated = all(r["metrics"]["deficit_h"] > 0 for r in rows if r["metrics"]["alpha_hyb"] > 1e-4)
    delta0 = rep.aggregate["delta0"]
    annular = all(r["metrics"]["nearly_annular"] for r in rep.rows if r["metrics"]["deficit_h"] <= delta0)

    prof = solve_shell(ProblemParams(2, 2, 2, Shell(1.0, 2.0))).normalized()
    outer = regular_polygon(6).with_perimeter(4 * math.pi)
    hole = regular_polygon(6)
    hole = hole.scaled(math.sqrt((outer.area - 3 * math.pi) / hole.area))
    dom = HoledDomain(outer, hole, ClassParams(1.0, 2.0, 0.5))
    hyb = hybrid_asymmetry(dom, build_web(prof, outer))
    plateau = not dom.class_violations() and hyb.A_tilde == 0.0 and hyb.alpha_out > 0

    ok = len(rows) == 10 and a_shell <= 1e-6 and pos and gated and annular and plateau and rep.passed
    criterion(
        7,
        ok,
        f"shell alpha_hyb {a_shell:.1e}, perturbed alpha_hyb > 0: {pos}, deficit gate: {gated}, "
        f"nearly annular below delta0={delta0:.3g}: {annular}, plateau A~ = {hyb.A_tilde}, alpha_out = {hyb.alpha_out:.3e}",
    )
    assert ok


def test_c08_geometry_identities(criterion):
    rng = np.random.default_rng(2024)
    steiner_err, slope_max = 0.0, -math.inf
    for k in range(100):
        poly = random_convex_polygon(int(rng.integers(3, 25)), k, target_perimeter=float(rng.uniform(1, 10)))
        for r in rng.uniform(0, 3, 5):
            steiner_err = max(steiner_err, abs(outer_parallel_area(poly, r) - (poly.area + poly.perimeter * r + math.pi * r * r)))
        slope_max = max(slope_max, float(np.max(poly.profile.perimeter_slope())))
    sq = ConvexPolygon([[0, 0], [1, 0], [1, 1], [0, 1]])
    star = asymmetry_indices(sq).star
    brute = oracles.brute_asymmetry(sq.vertices, 2 / math.pi, (0.3, 0.3), (0.7, 0.7), n=21)
    target = 2 / math.pi - 0.5
    ok = steiner_err <= 1e-12 and slope_max <= -2 * math.pi + 1e-6 and abs(star - target) <= 1e-6 and abs(brute - target) <= 1e-6
    criterion(8, ok, f"Steiner err {steiner_err:.1e}, max slope + 2pi = {slope_max + 2 * math.pi:.2e}, square asym {star:.9f} (brute {brute:.9f})")
    assert ok


def test_c09_fem_cross_validation(criterion):
    poly = random_convex_polygon(7, 11, target_perimeter=2 * math.pi)
    m = mesh_domain(poly, None, 0.05)
    rel = abs(minimize_trace_quotient(m, 2, 2).sigma / linear_steklov_reference(m).sigma - 1)
    coarse = mesh_domain(poly, None, 0.2)
    seq = [linear_steklov_reference(mm).sigma for mm in (coarse, coarse.refine(), coarse.refine().refine())]
    monotone = all(a >= b for a, b in zip(seq, seq[1:]))
    disc_mesh = mesh_domain(regular_polygon(512).with_perimeter(2 * math.pi), None, 0.02)
    ann = shell_domain(1.0, 2.0)
    ann_mesh = mesh_domain(ann.outer, ann.hole, 0.02)
    rad_disc = radiality_check(minimize_trace_quotient(disc_mesh, 2, 2), disc_mesh)
    rad_ann = radiality_check(minimize_trace_quotient(ann_mesh, 2, 2, boundary=OUTER), ann_mesh)
    ok = rel <= 1e-8 and monotone and rad_disc <= 0.05 and rad_ann <= 0.05
    criterion(9, ok, f"nonlinear vs pencil rel {rel:.1e}, nested sigma_h {['%.6f' % s for s in seq]}, radiality disc {rad_disc:.3f} annulus {rad_ann:.3f}")
    assert ok


def test_c10_robin_neumann(criterion):
    lam_shoot = robin_neumann_shell(2, 2, -1.0, 1.0, 2.0)
    ann = shell_domain(1.0, 2.0)
    lam_fem = robin_neumann_fem(mesh_domain(ann.outer, ann.hole, 0.02), 2, -1.0).eigenvalue
    agree = abs(lam_fem / lam_shoot - 1)
    rep = run_suite("robin", SuiteConfig(sample_count=10, mesh_h=0.02))
    rows = _random_rows(rep)
    maximal = all(r["metrics"]["lambda_shell"] >= r["metrics"]["lambda_h"] - 1e-3 for r in rows)
    ok = agree <= 0.01 and lam_shoot < 0 and lam_fem < 0 and len(rows) == 10 and maximal and rep.passed
    criterion(10, ok, f"shooting {lam_shoot:.6f} vs FEM {lam_fem:.6f} (rel {agree:.1e}), shell maximal over 10 instances: {maximal}")
    assert ok


def test_c11_counterexample(criterion):
    ce, dt = _timed(counterexample_4d, 0.1)
    per_ok = ce["perimeter"] == pytest.approx(16 * math.pi**2, rel=1e-15)
    vol_ok = abs(ce["volume"] - 5.26349) <= 1e-5
    mag_ok = ce["orders_of_magnitude"] >= 4
    ok = per_ok and vol_ok and mag_ok and dt < 1.0
    criterion(
        11,
        ok,
        f"P = 16pi^2: {per_ok}; |Omega| = {ce['volume']:.7f} vs 5.26349 +- 1e-5: {vol_ok}; "
        f"bound / trivial = 10^{ce['orders_of_magnitude']:.2f}: {mag_ok}",
    )
    assert ok
