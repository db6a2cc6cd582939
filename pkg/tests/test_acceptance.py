"""
Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are the stated ones; nothing here is loosened to make a check
pass.  Monte Carlo runs use 10^6 trials and fixed seeds.
"""

import os
import time

import numpy as np
import pytest

from acceptance_log import record
from oracles import chi2_diff_samples, marcum_quad
from starnoma import analysis, fixtures
from starnoma.cli import main as cli_main
from starnoma.model import CorrelationSpec, preset
from starnoma.partition import (PartitionRequest, algorithm1_nthr, floor_at, plan_partition,
                                uniform_partition)
from starnoma.sim import monte_carlo, noma_op_exact, oma_op_exact
from starnoma.specfun import chi2_diff_cdf, marcum_q

TRIALS = 1_000_000
WORKERS = os.cpu_count() or 1


def _mc(scenario, partition, p, seed=0, **kw):
    return monte_carlo(scenario, partition, p, TRIALS, seed, workers=WORKERS, **kw)


# ---------------------------------------------------------------------------
# 1. special functions against independent oracles
# ---------------------------------------------------------------------------
def test_criterion_1_special_function_oracles():
    t0 = time.time()
    grid = np.linspace(0.0, 20.0, 50)
    marcum_err = {}
    for m in (0.5, 1.0, 1.5, 2.5):
        marcum_err[m] = max(abs(marcum_q(m, a, b) - marcum_quad(m, a, b))
                            for a in grid for b in grid)
    rng = np.random.default_rng(2024)
    n = 10_000_000
    worst_z = 0.0
    for i in range(20):
        mu = rng.uniform(0.0, 8.0)
        nu = rng.uniform(0.2, 3.0)
        u = 0.0 if i == 0 else rng.uniform(0.1, 4.0)
        x = (mu * mu + nu * nu) * rng.uniform(-0.6, 1.6)
        p = float(chi2_diff_cdf(x, mu, nu, u))
        emp = np.mean(chi2_diff_samples(mu, nu, u, n, 100 + i) < x)
        se = max(np.sqrt(p * (1 - p) / n), 1.0 / n)
        worst_z = max(worst_z, abs(emp - p) / se)
    elapsed = time.time() - t0
    ok = max(marcum_err.values()) <= 1e-10 and worst_z <= 3.0 and elapsed < 300
    record(1, ok, f"marcum max |err| {max(marcum_err.values()):.1e} over orders "
                  f"{sorted(marcum_err)}; chi2_diff worst |z| {worst_z:.2f}; {elapsed:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 2. analytic vs Monte Carlo on the fixture partitions
# ---------------------------------------------------------------------------
def test_criterion_2_analytic_matches_monte_carlo():
    t0 = time.time()
    p = np.arange(-10.0, 40.01, 2.5)
    checked = failed = 0
    worst = (0.0, None)
    for (case, n), counts in sorted(fixtures.REFERENCE_COUNTS.items()):
        s = preset(case, n)
        part = fixtures.fixture_partition(case, n)
        exact = analysis.op_all(s, part, p)
        mc = _mc(s, part, p)
        tol = np.maximum(3 * mc.op_se, 0.01)
        mask = (mc.op >= 1e-3) & (np.asarray(counts) >= 24)[None, :]
        gap = np.abs(exact - mc.op)
        checked += int(mask.sum())
        failed += int((mask & (gap > tol)).sum())
        ratio = np.where(mask, gap / tol, 0.0)
        i, k = np.unravel_index(np.argmax(ratio), ratio.shape)
        if ratio[i, k] > worst[0]:
            worst = (ratio[i, k], f"case {case} N={n} U{k + 1} P={p[i]:g} dBm: "
                                  f"exact {exact[i, k]:.4f} vs mc {mc.op[i, k]:.4f}")
    elapsed = time.time() - t0
    ok = failed == 0 and elapsed < 900
    record(2, ok, f"{failed}/{checked} points outside max(3SE, 0.01); worst {worst[0]:.2f}x "
                  f"tolerance at {worst[1]}; {elapsed:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 3. error floor of the users sharing a side
# ---------------------------------------------------------------------------
def test_criterion_3_error_floor():
    s = preset(2)
    part = fixtures.fixture_partition(2, s.n_total)
    # top of the sweep: highest grid point at which user 3's outage 20 dB
    # lower is still resolvable with 10^6 trials (see the ledger)
    p = np.arange(-10.0, 22.51, 2.5)
    mc = _mc(s, part, p)
    floors = analysis.floors(s, part)
    top = len(p) - 1
    low = int(np.flatnonzero(np.isclose(p, p[-1] - 20.0))[0])
    parts = []
    ok = True
    for k in (0, 1):
        tol = max(3 * mc.op_se[top, k], 0.1 * floors[k])
        dev = abs(mc.op[top, k] - floors[k])
        ok &= dev <= tol
        parts.append(f"U{k + 1} mc {mc.op[top, k]:.3e} vs floor {floors[k]:.3e} "
                     f"({dev / floors[k]:.0%} off, tol {tol / floors[k]:.0%})")
    falls = mc.op[top, 2] < mc.op[low, 2] / 5 and mc.op[low, 2] > 0
    ok &= falls
    parts.append(f"U3 mc {mc.op[low, 2]:.2e} -> {mc.op[top, 2]:.2e} over 20 dB")
    record(3, bool(ok), "; ".join(parts))
    assert ok


# ---------------------------------------------------------------------------
# 4. power gaps between surface sizes (two-user case)
# ---------------------------------------------------------------------------
def _power_at(p, op, level):
    """Interpolated power where ``op`` first drops to ``level`` (log-linear)."""
    i = int(np.argmax(op <= level))
    if i == 0 or op[i] > level:
        raise AssertionError("sweep does not bracket the target outage")
    y0, y1 = np.log10(op[i - 1]), np.log10(max(op[i], 1e-12))
    return p[i - 1] + (np.log10(level) - y0) / (y1 - y0) * (p[i] - p[i - 1])


def test_criterion_4_power_gaps():
    p = np.arange(-10.0, 30.01, 0.5)
    at = {}
    for n in (64, 128, 256):
        s = preset(1, n)
        mc = _mc(s, fixtures.fixture_partition(1, n), p)
        at[n] = _power_at(p, mc.op[:, 0], 1e-3)
    gap1, gap2 = at[64] - at[128], at[128] - at[256]
    ok1, ok2 = abs(gap1 - 10.0) <= 2.0, abs(gap2 - 5.0) <= 2.0
    record(4, ok1 and ok2, f"64->128: {gap1:.2f} dB (need 10+-2, {'ok' if ok1 else 'miss'}); "
                           f"128->256: {gap2:.2f} dB (need 5+-2, {'ok' if ok2 else 'miss'})")
    assert ok1 and ok2


# ---------------------------------------------------------------------------
# 5. partitioning invariants and the calibrated reference rows
# ---------------------------------------------------------------------------
def test_criterion_5_partition_invariants():
    problems = []
    for case in (1, 2, 3):
        for n in (60, 90, 120, 150, 180):
            s = preset(case, n)
            plan = plan_partition(s, PartitionRequest())
            c = plan.partition.counts
            if sum(c) != n:
                problems.append(f"{case}/{n} budget")
            if list(c) != sorted(c):
                problems.append(f"{case}/{n} order")
            if plan.partition.n_t != sum(c[k] for k in s.users_on("t")) or \
                    plan.partition.n_r != sum(c[k] for k in s.users_on("r")):
                problems.append(f"{case}/{n} sides")
            if not s.is_two_user:
                eps = PartitionRequest().epsilon
                scan = [m for m in range(1, n // s.K + 1) if floor_at(s, m).max() <= eps]
                if algorithm1_nthr(s, eps) != scan[0]:
                    problems.append(f"{case}/{n} N_thr")
    rows = 0
    for row in fixtures.load_fixtures():
        plan = plan_partition(preset(row["case"], row["n_total"]), fixtures.fixture_request(row))
        rows += 1
        if list(plan.partition.counts) != row["counts"] or \
                (plan.partition.n_t, plan.partition.n_r) != (row["n_t"], row["n_r"]):
            problems.append(f"reference row {row['case']}/{row['n_total']}")
    ok = not problems
    record(5, ok, f"15 preset/N runs checked, {rows} calibrated reference rows "
                  f"(calibration regression); problems: {problems or 'none'}")
    assert ok


# ---------------------------------------------------------------------------
# 6. baselines
# ---------------------------------------------------------------------------
def test_criterion_6_baselines():
    s = preset(1, 256)
    part = fixtures.fixture_partition(1, 256)
    p = np.arange(-10.0, 40.01, 2.5)
    star = _mc(s, part, p)
    uni = _mc(s, uniform_partition(s), p)
    noma = _mc(s, None, p, system="noma")
    oma = _mc(s, None, p, system="oma")
    upper = p >= np.median(p)
    beats = all(np.all(star.op[upper] <= b.op[upper]) and np.all(star.op[upper] < b.op[upper])
                for b in (noma, oma))
    se = np.hypot(star.sumrate_se, uni.sumrate_se)
    rate_ok = bool(np.all(star.sumrate >= uni.sumrate - 3 * se))
    z = 0.0
    for res, exact in ((noma, noma_op_exact), (oma, oma_op_exact)):
        for k in range(s.K):
            ref = exact(s, k, p)
            se_k = np.sqrt(np.clip(ref * (1 - ref), 1.0 / TRIALS, None) / TRIALS)
            z = max(z, float(np.max(np.abs(res.op[:, k] - ref) / se_k)))
    ok = beats and rate_ok and z <= 3.0
    record(6, ok, f"beats NOMA/OMA on upper half: {beats}; sum-rate >= uniform: {rate_ok} "
                  f"(min margin {np.min(star.sumrate - uni.sumrate):.3f}); "
                  f"baseline oracle worst |z| {z:.2f}")
    assert ok


# ---------------------------------------------------------------------------
# 7. phase errors and spatial correlation
# ---------------------------------------------------------------------------
def test_criterion_7_impairments():
    s = preset(1, 64)
    part = fixtures.fixture_partition(1, 64)
    p = np.arange(0.0, 30.01, 2.5)
    mid = len(p) // 2
    curves = [_mc(s, part, p, kappa=k) for k in (2.0, 10.0, np.inf)]
    ordered = True
    for worse, better in zip(curves, curves[1:]):
        noise = 3 * np.hypot(worse.op_se, better.op_se)
        ordered &= bool(np.all(worse.op >= better.op - noise))
        ordered &= bool(np.all(worse.op[mid] > better.op[mid]))
    iid = _mc(s, part, p, elements=True)
    half = _mc(s, part, p, correlation=CorrelationSpec.from_frequency(0.5))
    eighth = _mc(s, part, p, correlation=CorrelationSpec.from_frequency(0.125))
    dev = np.abs(half.op - iid.op) - (3 * np.hypot(half.op_se, iid.op_se) + 0.01)
    half_ok = bool(np.all(dev <= 0))
    i, k = np.unravel_index(np.argmax(dev), dev.shape)
    eighth_ok = bool(np.all(eighth.op[mid] > iid.op[mid] + 3 * np.hypot(eighth.op_se[mid],
                                                                        iid.op_se[mid])))
    ok = ordered and half_ok and eighth_ok
    record(7, ok, f"kappa ordering {ordered}; lambda/2 within 3SE+0.01 of iid: {half_ok} "
                  f"(largest |diff| {abs(half.op[i, k] - iid.op[i, k]):.4f} at U{k + 1}, "
                  f"P={p[i]:g} dBm); lambda/8 worse at P={p[mid]:g} dBm: {eighth_ok}")
    assert ok


# ---------------------------------------------------------------------------
# 8. determinism across worker counts
# ---------------------------------------------------------------------------
@pytest.mark.parametrize("extra", [
    ["--preset", "2", "--partition", "fixture", "--baselines", "noma,oma"],
    ["--preset", "1", "--n", "128", "--partition", "fixture", "--kappa", "4", "--format", "json"],
    ["--preset", "3", "--n", "60", "--partition", "uniform", "--correlation", "0.25"],
    ["--preset", "2", "--n", "90", "--partition", "two-stage", "--strict-rate"],
])
def test_criterion_8_determinism(tmp_path, extra):
    outputs = []
    for workers in (1, 8):
        out = tmp_path / f"w{workers}.out"
        rc = cli_main(["run", "--mode", "montecarlo", "--sweep", "0", "20", "5",
                       "--trials", "40000", "--seed", "17", "--workers", str(workers),
                       "--no-timestamp", "-o", str(out)] + extra)
        assert rc == 0
        outputs.append(out.read_bytes())
    part = []
    for _ in range(2):
        out = tmp_path / "p.yaml"
        assert cli_main(["partition", "--preset", "2", "--n", "150", "-o", str(out)]) == 0
        part.append(out.read_bytes())
    ok = outputs[0] == outputs[1] and part[0] == part[1]
    _DETERMINISM.append(ok)
    record(8, all(_DETERMINISM), f"{len(_DETERMINISM)} command(s) byte-identical with 1 and 8 "
                                 f"workers: {all(_DETERMINISM)}")
    assert ok


_DETERMINISM: list[bool] = []
