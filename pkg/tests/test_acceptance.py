"""Acceptance gate: one PASS/FAIL line per criterion, at the contract tolerances.

Lines are collected in ``conftest.ACCEPTANCE_LINES`` and printed in the terminal
summary. Lines tagged ``info`` are extra diagnostics for the per-group
time-change variant and do not decide any criterion.
"""
import itertools
import math
import time

import pytest

from conftest import ACCEPTANCE_LINES
from hpyp_lab import asymptotics as asy
from hpyp_lab.combinatorics import gfc, gfc_direct, gfc_stirling_expansion, stirling_first_unsigned
from hpyp_lab.errors import ConsistencyError
from hpyp_lab.harness import ExperimentConfig, clt_trend, run_lln, run_mean_check, run_tilted_stable_check
from hpyp_lab.moments import ev_homozygosity_hpyp, ev_partial_sum, ev_vk_power

pytestmark = pytest.mark.slow

BETAS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def report(n, ok, elapsed, detail):
    ACCEPTANCE_LINES.append(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f} s) {detail}")
    print(ACCEPTANCE_LINES[-1])


def info(n, text):
    ACCEPTANCE_LINES.append(f"CRITERION {n}: info {text}")
    print(ACCEPTANCE_LINES[-1])


def rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_1_gfc_triple_agreement():
    t0 = time.perf_counter()
    worst = 0.0
    for beta in BETAS:
        for m in range(1, 13):
            for j in range(1, m + 1):
                ref = gfc_direct(m, j, beta)
                worst = max(worst, rel(gfc(m, j, beta), ref), rel(gfc_stirling_expansion(m, j, beta), ref))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 1.0
    report(1, ok, dt, f"max relative disagreement {worst:.2e} (tol 1e-9)")
    assert ok


def test_criterion_2_stirling_limit():
    t0 = time.perf_counter()
    eps = 1e-6
    worst = 0.0
    for m in range(1, 9):
        for j in range(1, m + 1):
            worst = max(worst, rel(gfc(m, j, eps) / eps**j, stirling_first_unsigned(m, j)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-4 and dt < 1.0
    report(2, ok, dt, f"max relative error {worst:.2e} (tol 1e-4)")
    assert ok


def _stick_moments(N, j, a, th):
    # E[V_k^j] for k = 1..N, each from the previous one by a single stick factor
    out = [ev_vk_power(1, j, a, th)]
    for s in range(1, N):
        out.append(out[-1] * (th + s * a) / (th + s * a + j))
    return out


def test_criterion_3_partial_sum_telescoping():
    t0 = time.perf_counter()
    worst = 0.0
    for a, th, j in itertools.product((0.1, 0.4, 0.7), (0.5, 5.0, 50.0), (1, 2, 3)):
        terms = _stick_moments(1000, j, a, th)
        for k in (1, 17, 1000):
            worst = max(worst, rel(terms[k - 1], ev_vk_power(k, j, a, th)))
        direct = math.fsum(terms)
        worst = max(worst, rel(ev_partial_sum(1000, j, a, th), direct))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 1.0
    report(3, ok, dt, f"27 points, max relative error {worst:.2e} (tol 1e-10)")
    assert ok


def test_criterion_4_exact_mean_vs_sampler():
    t0 = time.perf_counter()
    parts, ok = [], True
    for m, L in [(2, 1), (2, 2), (3, 1), (3, 2)]:
        r_cfg = ExperimentConfig("mean-check", m=m, L=L, theta=20.0, replicates=20_000)
        r = run_mean_check(r_cfg)
        ok &= r.passed
        parts.append(f"(m={m},L={L}) z={r.z_score:+.2f}")
        if L > 1:
            # same draws, per-group exact mean
            alt = ev_homozygosity_hpyp(m, L, r_cfg.params, "per_group").value
            info(4, f"(m={m},L={L}) per-group exact mean gives z={(r.estimate - alt) / r.std_error:+.2f}")
    dt = time.perf_counter() - t0
    ok = ok and dt < 120.0
    report(4, ok, dt, "; ".join(parts) + " (|z| <= 4)")
    assert ok


def test_criterion_5_handa_limit():
    t0 = time.perf_counter()
    worst = 0.0
    for m, a, b in itertools.product((2, 3), (0.3, 0.6), (0.3, 0.6)):
        worst = max(worst, rel(asy.sigma2_total(m, 1, a, b, 1e6).total, asy.handa_limit(m, b)))
    spot = asy.sigma2_total(2, 1, 0.3, 0.5, 1e6).total
    worst = max(worst, rel(spot, 4.0))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-3 and dt < 1.0
    report(5, ok, dt, f"max relative error {worst:.2e}, spot m=2 beta=0.5 total {spot:.6f} (tol 1e-3)")
    assert ok


def test_criterion_6_hdp_limit_stability():
    t0 = time.perf_counter()
    worst, failures = 0.0, []
    for m, L, c in itertools.product((2, 3), (1, 2), (0.5, 1.0, 2.0)):
        try:
            t5 = asy.sigma2_total(m, L, 0.0, 1e-5, c).total
            t6 = asy.sigma2_total(m, L, 0.0, 1e-6, c).total
            worst = max(worst, rel(t5, t6))
        except ConsistencyError as exc:
            failures.append(f"(m={m},L={L},c={c}) {exc}")
    dt = time.perf_counter() - t0
    ok = not failures and worst <= 1e-3 and dt < 5.0
    report(6, ok, dt, f"max relative change {worst:.2e} (tol 1e-3)" + (f"; errors: {failures}" if failures else ""))
    assert ok


def test_criterion_7_tilted_stable_moments():
    t0 = time.perf_counter()
    parts, ok = [], True
    for s, b in itertools.product((0.5, 2.0), (0.3, 0.6)):
        r = run_tilted_stable_check(ExperimentConfig("tilted-stable-check", m=3, beta=b, scale_mass=s,
                                                     replicates=100_000))
        ok &= r.passed
        zs = ",".join(f"{d['z_score']:+.2f}" for d in r.details["orders"].values())
        parts.append(f"(s={s},beta={b}) z=[{zs}]")
    dt = time.perf_counter() - t0
    ok = ok and dt < 120.0
    report(7, ok, dt, "; ".join(parts) + " (|z| <= 4)")
    assert ok


def test_criterion_8_lln():
    t0 = time.perf_counter()
    r = run_lln(ExperimentConfig("lln", m=2, L=1, theta=1000.0, c=1.0, replicates=2000))
    dt = time.perf_counter() - t0
    dev = abs(r.estimate - 1.0)
    ok = r.capped_draws == 0 and dev <= 0.05 and dt < 180.0
    report(8, ok, dt, f"mean ratio {r.estimate:.4f}, |ratio - 1| = {dev:.4f} (tol 0.05)")
    assert ok


def _clt_line(L, time_change):
    t0 = time.perf_counter()
    cfg = ExperimentConfig("clt", m=2, L=L, theta=500.0, c=1.0, replicates=2000, time_change=time_change)
    base, doubled, moved = clt_trend(cfg)
    dt = time.perf_counter() - t0
    if base.estimate is None:
        return False, dt, f"L={L}: {base.reason}"
    ok = base.passed and moved and dt < 600.0
    r0, r1 = base.details["variance_ratio"], doubled.details["variance_ratio"]
    text = (f"L={L}: z={base.z_score:+.2f}, variance ratio {r0:.3f} at theta=500 -> {r1:.3f} at theta=1000, "
            f"predicted {base.predicted_variance:.4f}, KS p {base.ks_p:.3f}")
    if base.reason:
        text += f"; {base.reason}"
    return ok, dt, text


@pytest.mark.parametrize("L", [1, 2])
def test_criterion_9_clt(L):
    ok, dt, text = _clt_line(L, "shared")
    report(9, ok, dt, text + " (|z| <= 4, ratio in [0.75, 1.25], trend toward 1)")
    if L > 1:
        _, dt2, alt = _clt_line(L, "per_group")
        info(9, f"per-group time change, {alt} ({dt2:.1f} s)")
    assert ok


def test_criterion_10_nonnegativity_sweep():
    t0 = time.perf_counter()
    # the full validation grid; it has 162 points (2 x 3 x 3 x 3 x 3)
    grid = list(itertools.product((2, 3), (1, 2, 3), (0.25, 0.5, 0.75), (0.25, 0.5, 0.75), (0.25, 1.0, 4.0)))
    bad, bad_alt = [], 0
    for m, L, a, b, c in grid:
        comps = [asy.sigma2_stable(m, L, a, b, c), asy.sigma2_gamma(m, L, a, b, c), asy.sigma2_level1(m, L, a, b, c)]
        try:
            comps.append(asy.sigma2_total(m, L, a, b, c).total)
        except ConsistencyError:
            comps.append(-1.0)
        if min(comps) < 0:
            bad.append((m, L, a, b, c))
        bad_alt += asy.sigma2_total(m, L, a, b, c, "per_group").total < 0
    dt = time.perf_counter() - t0
    ok = not bad and dt < 5.0
    detail = f"{len(grid) - len(bad)}/{len(grid)} grid points nonnegative"
    if bad:
        detail += f"; negative total at {len(bad)} points, all with L >= {min(p[1] for p in bad)}"
    report(10, ok, dt, detail)
    info(10, f"per-group time change: {len(grid) - bad_alt}/{len(grid)} totals nonnegative")
    assert ok
