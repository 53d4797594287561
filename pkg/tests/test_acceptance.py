"""Acceptance suite: one PASS/FAIL line per criterion, printed to the terminal.

Run with ``pytest tests/test_acceptance.py -v``; the grid criteria (5, 6, 8, 10)
take several minutes in total.
"""

import time
from fractions import Fraction as F

import numpy as np
import pytest

from achgjms.background import (
    build_background_from_chart, constant_background, heisenberg, heisenberg_chart, sublaplacian,
    torus_chart,
)
from achgjms.gjms import gjms_apply, gjms_matrix, hermitian_defect, log_normalization
from achgjms.indicial import det4, det_product_check, growth_probe, indicial_matrix
from achgjms.series import QI, is_zero
from achgjms.solver import (
    SolveConfig, _poly_degree, imposed_and_verified, lambda_batch_report, solve, verify,
)
from achgjms.theta import E0, MetricAnsatz, ThetaGeometry, parse_word
from tables import at, d_table, random_base, random_psi, variation, variation_rows, weyl_rows

FAST = dict(check_cotton=False, check_variation=False)
# small analytic perturbation of the homogeneous torus chart; its obstruction density is nonzero
GRID_CHART = torus_chart("0.001*sin(x)", "0.001*cos(x)")


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def all_zero(arr):
    return all(is_zero(a) for a in arr)


# ---------------------------------------------------------------- 1, 2: exact oracles

def test_criterion_1_flat_oracle(report):
    worst, ok = 0.0, True
    for lam in (0, 1, -3):
        t = time.perf_counter()
        r = solve(heisenberg(), SolveConfig(order=14, lam=QI(lam)))
        worst = max(worst, time.perf_counter() - t)
        ok &= all(all_zero(a) for a in r.ansatz.components().values())
        ok &= all(v == 0 for v in r.einstein_orders + r.weyl_orders) and len(r.einstein_orders) == 15
    report(1, ok and worst <= 30, f"phi, E, W- identically zero through rho^14; slowest solve {worst:.1f}s")


def test_criterion_2_constant_background(report):
    bg = constant_background(1, 0)
    runs = {lam: solve(bg, SolveConfig(order=14, lam=QI(lam))) for lam in (0, 7)}
    ok = all(all(v == 0 for v in r.einstein_orders + r.weyl_orders) for r in runs.values())
    same = all(list(runs[0].coefficients[k]) == list(runs[7].coefficients[k]) for k in runs[0].coefficients)
    report(2, ok and same and runs[0].obstruction.data == QI(0),
           f"E, W- exactly zero through rho^14; lambda 0 and 7 identical: {same}")


# ---------------------------------------------------------------- 3, 4: formula reproduction

def test_criterion_3_variation_formulas(report):
    a = QI(1, -1)
    bg = constant_background(2, a)
    bad = []
    for m in range(1, 10):
        rng = np.random.default_rng(m)
        psi, base = random_psi(rng), random_base(rng, m)
        dE = variation(bg, base, m, psi, "einstein")
        dW = variation(bg, base, m, psi, "weyl_asd")
        bad += [(m, w) for w, want in variation_rows(m, psi).items() if at(dE, w) != want]
        bad += [(m, w) for w, want in weyl_rows(m, psi).items() if at(dW, w) != want]
    E = ThetaGeometry(bg, MetricAnsatz.zero(6)).einstein
    e00 = list(E[:, E0, E0])
    corrected = e00 == [QI(0)] * 4 + [QI(-2) * a.abs2(), QI(0), QI(0)]
    report(3, not bad and corrected,
           f"9 rows x m=1..9 exact, mismatches {bad}; E_00 carries -2 rho^4 |A|^2: {corrected}")


def test_criterion_4_difference_tensor_table(report):
    a = QI(1, -1)
    bg = constant_background(2, a)
    bad = []
    D = ThetaGeometry(bg, MetricAnsatz.zero(6)).D
    zero = {k: QI(0) for k in ("phi00", "phi11b", "phi01", "phi11")}
    for word, (const, _) in d_table(1, zero, a).items():
        want = [QI(const) if not isinstance(const, QI) else const] + [QI(0)] * 6
        if word == "110":
            want[2] = -a
        if word == "b01":
            want[2] = a.conjugate()
        if list(D[(slice(None),) + parse_word(word)]) != want:
            bad.append(("const", word))
    for m in range(1, 10):
        psi = random_psi(np.random.default_rng(100 + m))
        dD = variation(bg, MetricAnsatz.zero(m), m, psi, "D")
        bad += [(m, w) for w, (_, lin) in d_table(m, psi, a).items()
                if at(dD, w) != (QI(lin) if not isinstance(lin, QI) else lin)]
    psi = dict(zero, phi11b=QI(3))
    d011 = at(variation(bg, MetricAnsatz.zero(3), 3, psi, "D"), "011") == QI(0, F(-3, 2))
    report(4, not bad and d011, f"{len(d_table(1, zero, a))} entries, m=1..9; "
           f"D_01^1 carries -phi11bar: {d011}; mismatches {bad}")


# ---------------------------------------------------------------- 5, 6: grid background

@pytest.fixture(scope="module")
def grid_solves():
    bg = build_background_from_chart(GRID_CHART, (16, 16, 16), residual_tol=1e-5)
    return {lam: solve(bg, SolveConfig(order=10, lam=lam, strict=False, check_variation=False))
            for lam in (2.0, 0.0)}


@pytest.mark.slow
def test_criterion_5_bianchi_closure(report, grid_solves):
    worst_v = worst_b = 0.0
    where = None
    for r in grid_solves.values():
        for rec in r.records:
            _, ver = imposed_and_verified(rec["m"])
            v = max(rec["post"][k] for k in ver)
            b = max(rec["bianchi"].values())
            if max(v, b) > max(worst_v, worst_b):
                where = rec["m"]
            worst_v, worst_b = max(worst_v, v), max(worst_b, b)
    report(5, worst_v <= 1e-8 and worst_b <= 1e-8,
           f"16^3, N=10: verified rows {worst_v:.1e}, six relations {worst_b:.1e} relative "
           f"(worst at order {where}; target 1e-8)")


@pytest.mark.slow
def test_criterion_6_normal_form(report, grid_solves):
    r2, r0 = grid_solves[2.0], grid_solves[0.0]
    O = np.abs(r2.obstruction.data).max()
    w2 = verify(r2)["weyl_asd_vanishing_order"]
    scale0 = [rec["scale"] for rec in r0.records]
    w0 = max(w / s for w, s in zip(r0.weyl_orders[1:], scale0))
    eta = max(np.abs(r.eta.data - r.lam * r.obstruction.data).max() for r in (r0, r2))
    report(6, w2 >= 6 and w0 <= 1e-8 and eta <= 1e-8 and O > 1e-3,
           f"lambda=2: W- vanishes below order {w2}; lambda=0: max relative W- through "
           f"rho^10 {w0:.1e}; |eta - lambda O| {eta:.1e}; |O| {O:.2e}")


# ---------------------------------------------------------------- 7: lambda sweep

def test_criterion_7_lambda_polynomiality(report):
    bg = constant_background(3, QI(1, 2))
    runs = [solve(bg, SolveConfig(order=12, lam=QI(l), **FAST)) for l in (0, 1, -1, 2, -2, 3, -3)]
    rep = lambda_batch_report(runs)
    deg = rep["degrees"]
    even = all(verify(r)["evenness_ok"] for r in runs)
    free = {n: [k for k, d in enumerate(deg[n]) if d > 0] for n in ("g01", "g11")}
    report(7, rep["degree_bound_ok"] and rep["g01_g11_lambda_free"] and even,
           f"degree <= floor(k/6): {rep['degree_bound_ok']}; evenness: {even}; "
           f"lambda-dependent orders of g01 {free['g01']}, g11 {free['g11']} (claimed none)")


# ---------------------------------------------------------------- 8: GJMS

@pytest.mark.slow
def test_criterion_8_gjms(report):
    flat = build_background_from_chart(heisenberg_chart(), (16, 16, 1), derivatives="symbolic")
    rf = solve(flat, SolveConfig(order=9, **FAST))
    x, y, _ = flat.grid.coords
    rng = np.random.default_rng(0)
    dev = 0.0
    for _ in range(20):
        f = sum(complex(*rng.normal(size=2)) * np.exp(1j * (a * x + b * y))
                for a, b in rng.integers(-3, 4, size=(4, 2)))
        dev = max(dev, np.abs(gjms_apply(rf, 1, f).value.data - sublaplacian(flat, f).data).max())

    norms = log_normalization(1) == F(1, 2) and log_normalization(2) == F(-1)

    bg = build_background_from_chart(torus_chart("0.02*sin(x)", "0.02*cos(x)"), (8, 8, 8),
                                     residual_tol=1e-6)
    lams = [0.0, 1.0, -1.0, 2.0]
    runs = [solve(bg, SolveConfig(order=9, lam=l, strict=False, **FAST)) for l in lams]
    X, Y, T = bg.grid.coords
    basis = [np.exp(1j * (a * X + b * Y + c * T)) for a, b, c in
             ((0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (-1, 0, 1))]
    herm = max(hermitian_defect(gjms_matrix(runs[1], k, basis)) for k in (1, 2, 3))
    f = np.cos(X) + np.sin(Y + T)
    deg = _poly_degree(lams, [gjms_apply(r, 3, f).value.data for r in runs], False, 1e-8)
    ok = dev <= 1e-10 and norms and herm <= 1e-8 and deg <= 1
    report(8, ok, f"|P2 - sublaplacian| {dev:.1e} on 20 functions; constants 1/2, -1: {norms}; "
           f"Hermitian defect k<=3 {herm:.1e}; P6 lambda-degree {deg} (bound 1)")


# ---------------------------------------------------------------- 9, 10: indicial

def test_criterion_9_indicial_determinant(report):
    rep = det_product_check(200)
    d0 = det4(indicial_matrix(0))
    report(9, rep["ok"] and rep["matches"] == 201 and d0 == 534600,
           f"{rep['matches']}/201 exact matches, all nonzero {rep['all_nonzero']}, det P(0) = {d0}")


@pytest.mark.slow
def test_criterion_10_growth_probe(report):
    bg = build_background_from_chart(torus_chart("0.02*sin(x)", "0.02*cos(x)"), (8, 8, 8),
                                     residual_tol=1e-6)
    probes = {N: growth_probe(solve(bg, SolveConfig(order=N, lam=1.0, strict=False, **FAST)))
              for N in (10, 12)}
    r10, r12 = probes[10].ratio, probes[12].ratio
    ok = r10 is not None and r12 is not None and np.isfinite(r10) and abs(r12 / r10 - 1) <= 0.2
    report(10, ok, f"fitted ratio N=10 {r10:.4f}, N=12 {r12:.4f} (change {abs(r12 / r10 - 1):.1%})")
