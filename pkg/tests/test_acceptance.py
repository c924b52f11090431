"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict that is printed as it finishes and
again in the terminal summary.  Thresholds, sample sizes and runtime
limits are the stated ones; seeds are fixed in advance.
"""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from zerocorr import (
    BoxFamily,
    CoefficientModel,
    CorrelationQuery,
    MonteCarloSpec,
    QuadratureSpec,
    coeffs_from_factorization,
    derivative_at_root,
    discriminant_prob_all_real,
    empirical_correlation,
    empirical_intensity,
    empirical_prob_all_real,
    eta_schur,
    eta_vandermonde,
    prob_all_real,
    rho1_bin_integrals,
    rho2_box_integral,
    rho_k_montecarlo,
    rho_k_quadrature,
    rho_n_exponential,
    rho_n_gaussian,
    rho_n_uniform,
)

from conftest import VERDICTS
from oracles import fd_jacobian_det, jacobian_closed_form, poly_product, random_points

MODELS = ("gaussian", "uniform", "exponential")


def make(name: str, n: int) -> CoefficientModel:
    return getattr(CoefficientModel, name)(n)


def verdict(num: int, ok: bool, detail: str):
    VERDICTS[num] = (ok, detail)
    print(f"\ncriterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def rel_err(a, b) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def test_criterion_1_eta_consistency():
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(1, 7))
        n = int(rng.integers(k, 13))
        x = random_points(rng, k)
        tail = rng.standard_normal(n - k + 1)
        worst = max(worst, rel_err(eta_schur(x, tail, n), eta_vandermonde(x, tail, n)))
    took = time.perf_counter() - t0
    verdict(1, worst <= 1e-9 and took < 10, f"200 cases, worst rel err {worst:.2e} (limit 1e-9), {took:.1f}s (limit 10s)")


def test_criterion_2_jacobian_lemma():
    # the closed form is taken exactly as displayed, fixed leading minus included
    rng = np.random.default_rng(1002)
    t0 = time.perf_counter()
    bad = {k: 0 for k in range(1, 5)}
    seen = {k: 0 for k in range(1, 5)}
    worst_mag = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 5))
        n = k + int(rng.integers(0, 6))
        x = random_points(rng, k, gap=0.2)
        tail = rng.standard_normal(n - k + 1)
        fd = fd_jacobian_det(lambda y: eta_vandermonde(y, tail, n), x)
        closed = jacobian_closed_form(x, tail, eta_vandermonde(x, tail, n), n)
        seen[k] += 1
        if abs(fd - closed) > 1e-5 * abs(closed):
            bad[k] += 1
        worst_mag = max(worst_mag, abs(abs(fd) - abs(closed)) / abs(closed))
    took = time.perf_counter() - t0
    failures = sum(bad.values())
    per_k = ", ".join(f"k={k}: {bad[k]}/{seen[k]} off" for k in seen)
    verdict(
        2,
        failures == 0 and took < 30,
        f"{failures}/100 outside 1e-5 ({per_k}); worst |det| rel err {worst_mag:.1e}; {took:.1f}s",
    )


def test_criterion_3_factorization():
    rng = np.random.default_rng(1003)
    worst_coef = worst_der = 0.0
    for _ in range(500):
        k = int(rng.integers(1, 7))
        n = k + int(rng.integers(0, 7))
        x = random_points(rng, k)
        b = rng.standard_normal(n - k + 1)
        full = poly_product(x, b)
        worst_coef = max(worst_coef, rel_err(coeffs_from_factorization(x, b), full))
        deriv = np.polynomial.polynomial.polyder(full)
        for i in range(k):
            got = derivative_at_root(x, i, b)
            h = 1e-4 * (1.0 + abs(x[i]))
            g = [np.polynomial.polynomial.polyval(x[i] + s * h, full) for s in (-2, -1, 1, 2)]
            for want in (np.polynomial.polynomial.polyval(x[i], deriv), (g[0] - 8 * g[1] + 8 * g[2] - g[3]) / (12 * h)):
                worst_der = max(worst_der, abs(got - want) / abs(want))
    verdict(
        3,
        worst_coef <= 1e-12 and worst_der <= 1e-7,
        f"500 cases, expansion rel err {worst_coef:.1e} (limit 1e-12), "
        f"derivative rel err {worst_der:.1e} vs differentiated coefficients and 5-point differences (limit 1e-7)",
    )


def test_criterion_4_closed_form_vs_quadrature():
    rng = np.random.default_rng(1004)
    closed = {"gaussian": rho_n_gaussian, "exponential": rho_n_exponential, "uniform": rho_n_uniform}
    tol = {"gaussian": 1e-6, "exponential": 1e-6, "uniform": 1e-4}
    spec = QuadratureSpec(rel_tol=1e-8, max_evals=20_000_000)
    t0 = time.perf_counter()
    worst = {}
    fails = 0
    for name in MODELS:
        worst[name] = 0.0
        for n in (1, 2, 3):
            model = make(name, n)
            for _ in range(50):
                x = random_points(rng, n)
                want = float(closed[name](x))
                got = rho_k_quadrature(CorrelationQuery(model, tuple(x), "theorem2", spec)).value
                err = abs(got - want) / abs(want) if want else abs(got)
                worst[name] = max(worst[name], err)
                fails += err > tol[name]
    took = time.perf_counter() - t0
    detail = ", ".join(f"{m} worst {worst[m]:.1e} (limit {tol[m]:g})" for m in MODELS)
    verdict(4, fails == 0 and took < 120, f"450 points, {fails} outside; {detail}; {took:.1f}s (limit 120s)")


def test_criterion_5_theorem1_vs_theorem2():
    rng = np.random.default_rng(1005)
    quad = QuadratureSpec(rel_tol=1e-6, max_evals=20_000_000)
    t0 = time.perf_counter()
    cases = fails = 0
    worst = 0.0
    misses = []
    for mi, name in enumerate(MODELS):
        for n in (2, 3, 4):
            model = make(name, n)
            for k in (1, 2):
                for j in range(20):
                    x = tuple(random_points(rng, k))
                    mc = MonteCarloSpec(samples=1_000_000, seed=50_000 + 1000 * mi + 100 * n + 10 * k + j)
                    a = rho_k_quadrature(CorrelationQuery(model, x, "theorem2", quad))
                    b = rho_k_montecarlo(CorrelationQuery(model, x, "theorem1", mc=mc))
                    comb = math.hypot(a.error, b.error)
                    gap = abs(a.value - b.value)
                    cases += 1
                    if gap > 3 * comb:
                        fails += 1
                        misses.append(f"{name} n={n} x={np.round(x, 3).tolist()} z={gap / comb:.2f}")
                    elif comb > 0:
                        worst = max(worst, gap / comb)
    took = time.perf_counter() - t0
    detail = f"{cases - fails}/{cases} within 3 sigma, largest passing z {worst:.2f}; {took:.0f}s (limit 600s)"
    if misses:
        detail += "; misses: " + "; ".join(misses)
    verdict(5, fails == 0 and took < 600, detail)


def test_criterion_6_spot_values():
    quad = QuadratureSpec(rel_tol=1e-8)
    mc = MonteCarloSpec(samples=1_000_000, seed=1006)
    lines, ok = [], True
    for name, x, want in (("gaussian", 0.0, 1 / math.pi), ("uniform", 0.0, 0.25), ("exponential", -1.0, 0.25)):
        q = rho_k_quadrature(CorrelationQuery(make(name, 1), (x,), "theorem2", quad))
        m = rho_k_montecarlo(CorrelationQuery(make(name, 1), (x,), "theorem1", mc=mc))
        good_q = q.converged and abs(q.value - want) <= 1e-8 * want
        good_m = abs(m.value - want) <= 3 * m.error
        ok &= good_q and good_m
        lines.append(f"{name} quad {q.value:.10f} mc {m.value:.5f}+-{m.error:.1e}")
    verdict(6, ok, "; ".join(lines))


def test_criterion_7_empirical_oracle():
    edges = np.linspace(-2.0, 2.0, 21)
    t0 = time.perf_counter()
    ok = True
    parts = []
    for name in MODELS:
        model = make(name, 3)
        emp = empirical_intensity(model, edges, MonteCarloSpec(samples=1_000_000, seed=7))
        ref = rho1_bin_integrals(model, edges, rel_tol=1e-4)
        hits = sum(abs(e.value - r.value) <= 3 * math.hypot(e.error, r.error) for e, r in zip(emp, ref))
        ok &= hits >= 19
        parts.append(f"{name} {hits}/20 bins")
    boxes = (
        ("gaussian", (-2.0, -0.1), (0.1, 2.0)),
        ("uniform", (-1.5, -0.5), (-0.3, 0.6)),
        ("exponential", (-3.0, -1.0), (-0.9, -0.2)),
        ("gaussian", (-1.0, 0.0), (0.5, 1.5)),
        ("uniform", (0.2, 1.0), (1.2, 2.5)),
    )
    for i, (name, b1, b2) in enumerate(boxes):
        model = make(name, 3)
        emp = empirical_correlation(model, BoxFamily((b1, b2)), MonteCarloSpec(samples=1_000_000, seed=7100 + i))
        ref = rho2_box_integral(model, b1, b2, QuadratureSpec(rel_tol=1e-4))
        z = abs(emp.value - ref.value) / math.hypot(emp.error, ref.error)
        ok &= z <= 3
        parts.append(f"box {i + 1} ({name}) z={z:.2f}")
    took = time.perf_counter() - t0
    verdict(7, ok, "; ".join(parts) + f"; {took:.0f}s")


def test_criterion_8_prob_all_real():
    t0 = time.perf_counter()
    ok = True
    parts = []
    for mi, name in enumerate(MODELS):
        model = make(name, 2)
        spec = MonteCarloSpec(samples=10_000_000, seed=8000 + mi)
        p = prob_all_real(model)
        refs = [("roots", empirical_prob_all_real(model, spec))]
        if name == "gaussian":
            refs.append(("discriminant", discriminant_prob_all_real(model, spec)))
        for label, e in refs:
            z = abs(p.value - e.value) / math.hypot(p.error, e.error)
            ok &= z <= 3
            parts.append(f"{name} {p.value:.6f} vs {label} {e.value:.6f} (z={z:.2f})")
    for name in MODELS:
        one = prob_all_real(make(name, 1)).value
        ok &= one == 1.0
    took = time.perf_counter() - t0
    ok &= took < 300
    verdict(8, ok, "; ".join(parts) + f"; n=1 exactly 1; {took:.0f}s (limit 300s)")


def _cli(*argv) -> bytes:
    code = "import sys; from zerocorr.cli import main; sys.exit(main())"
    res = subprocess.run([sys.executable, "-c", code, *argv], capture_output=True, check=True, timeout=600)
    return res.stdout


def test_criterion_9_determinism():
    runs = [
        ["--task", "rho", "--degree", "3", "--k", "2", "--grid", "-1.5:1.5:0.5", "--method", "theorem1",
         "--samples", "200000", "--seed", "9"],
        ["--task", "intensity-profile", "--degree", "2", "--model", "gaussian", "--grid", "-2:2:0.5",
         "--samples", "200000", "--seed", "9", "--rel-tol", "1e-5"],
        ["--task", "rho", "--degree", "2", "--k", "1", "--grid", "-2:2:0.25", "--method", "theorem2"],
    ]
    same = 0
    for argv in runs:
        outs = [_cli(*argv, "--workers", w) for w in ("1", "1", "2", "4")]
        same += all(o == outs[0] and o for o in outs)
    verdict(9, same == len(runs), f"{same}/{len(runs)} commands byte-identical across 2 repeats and workers 1/2/4")
