"""Acceptance gate: one test per criterion, at the stated sizes and tolerances.

``conftest.py`` prints a PASS/FAIL line per criterion at the end of the run.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from tradeprophets.analysis import (best_online_value, eps_margin_failure, expected_alg_blsh,
                                    expected_profit_enumerated, lower_bound_adversarial,
                                    lower_bound_iid, lower_bound_iid_monte_carlo,
                                    phase_adversary_check, theorem1_sweep, theorem2_chain)
from tradeprophets.engine import monte_carlo
from tradeprophets.market import (NO_COSTS, CostModel, IndependentSequence, PriceDistribution,
                                  random_distribution, random_independent_sequence)
from tradeprophets.oracle import (expected_opt_zero_cost, opt_bruteforce, opt_telescoping,
                                  opt_with_costs_dp)
from tradeprophets.traders import BuyLowSellHigh, solve_thresholds

Z = 4.0


def test_criterion_1_oracle_equivalence():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        T = int(rng.integers(1, 13))
        proc = random_independent_sequence(rng, T, 4)
        x = proc.sample(np.array([rng.integers(0, 2 ** 63)], dtype=np.uint64))[0]
        cm = CostModel(float(rng.uniform(0, 0.5)), float(rng.uniform(0, 1)))
        init = bool(rng.integers(0, 2))
        worst = max(worst, abs(opt_with_costs_dp(x, cm, init) - opt_bruteforce(x, cm, init)))
    elapsed = time.perf_counter() - start
    assert worst <= 1e-9
    assert elapsed < 10, f"{elapsed:.1f}s"


def test_criterion_2_zero_cost_opt_formula():
    rng = np.random.default_rng(202)
    for _ in range(1000):
        T = int(rng.integers(1, 60))
        x = rng.uniform(0, 10, size=T) * (rng.random(T) < 0.8)
        assert abs(opt_telescoping(x) - opt_with_costs_dp(x, NO_COSTS)) <= 1e-9
    proc = random_independent_sequence(rng, 40, 4, delta=0.2)
    st = monte_carlo(proc, BuyLowSellHigh(), NO_COSTS, 100_000, master_seed=2)
    exact = expected_opt_zero_cost(proc)
    assert abs(st.opt_mean - exact) <= Z * st.opt_se, (st.opt_mean, exact, st.opt_se)


def test_criterion_3_blsh_expected_profit():
    rng = np.random.default_rng(303)
    start = time.perf_counter()
    misses = []
    for j in range(50):
        proc = random_independent_sequence(rng, 100, 4, delta=float(rng.choice([0.0, 0.3])))
        st = monte_carlo(proc, BuyLowSellHigh(), NO_COSTS, 100_000, master_seed=1000 + j)
        exact = expected_alg_blsh(proc)
        if abs(st.alg_mean - exact) > Z * st.alg_se:
            misses.append((j, st.alg_mean, exact, st.alg_se))
    elapsed = time.perf_counter() - start
    assert not misses
    assert elapsed < 60, f"{elapsed:.1f}s"


def test_criterion_4_competitive_upper_bounds():
    general, iid = theorem1_sweep(1000, seed=404)
    assert len(general) == len(iid) == 1000
    # the 3x bound holds on every instance; equal-mean ones are held to 2x
    assert all(r.e_opt <= 3.0 * r.e_alg + 1e-9 for r in general)
    assert all(r.factor == 2.0 for r in iid)
    violations = [r for r in general + iid if not r.passed]
    assert not violations


def test_criterion_5_adversarial_lower_bound():
    rep = lower_bound_adversarial(0.05, 10_000)
    assert rep["bound"] == pytest.approx(2.69, abs=0.005)
    assert rep["ratio"] >= rep["bound"]
    assert rep["ratio"] >= 2.6
    start = time.perf_counter()
    rep = lower_bound_adversarial(0.01, 10 ** 6)
    elapsed = time.perf_counter() - start
    assert rep["ratio"] >= 2.9
    assert elapsed < 1.0, f"{elapsed:.2f}s"


def test_criterion_6_iid_lower_bound():
    eps, T = 0.1, 10 ** 5
    rep = lower_bound_iid(eps, T)
    assert rep["bound"] >= 1.85
    assert rep["ratio"] >= rep["bound"]
    mc = lower_bound_iid_monte_carlo(eps, T, trials=1000, seed=6)
    assert mc["pass"], mc
    assert mc["ratio_ci_low"] <= rep["ratio"] <= mc["ratio_ci_high"]
    assert mc["ratio_ci_low"] >= 1.85


def test_criterion_7_fee_chain_iid():
    start = time.perf_counter()
    rep = theorem2_chain(PriceDistribution.uniform(0.0, 1.0), CostModel(0.0, 0.1), T=1000,
                         trials=200_000, seed=7, z=Z)
    elapsed = time.perf_counter() - start
    assert rep["alg_lower_bound"] == pytest.approx(80.0, abs=1e-8)
    assert rep["opt_upper_bound"] == pytest.approx(160.5, abs=1e-8)
    assert rep["a"], (rep["alg_mean"], rep["alg_se"])
    assert rep["b"], (rep["opt_mean"], rep["opt_se"])
    assert rep["c"], (rep["gap_mean"], rep["gap_se"])
    assert rep["ratio"] <= rep["ratio_allowance"]
    assert elapsed < 120, f"{elapsed:.1f}s"


def test_criterion_8_threshold_solver():
    rng = np.random.default_rng(808)
    grid = [CostModel(pi, sigma) for pi in (0.0, 0.1, 0.3) for sigma in (0.0, 0.05, 0.25)]
    for _ in range(100):
        delta = float(rng.uniform(0.05, 1.0))
        d = random_distribution(rng, 4, high=10.0, delta=delta)
        for cm in grid:
            th = solve_thresholds(d, cm)
            tails = d.prob_at_least(th.z_high) - d.cdf(th.z_low)
            prices = ((th.z_high * (1 - cm.eps_pi) - cm.eps_sigma)
                      - (th.z_low * (1 + cm.eps_pi) + cm.eps_sigma))
            assert abs(tails) <= 1e-9
            assert abs(prices) <= 1e-9
            if cm.is_zero:
                assert abs(th.z_high - th.median) <= 1e-9
                assert abs(d.cdf(th.median) - 0.5) <= 1e-9


def test_criterion_9_phase_adversary():
    start = time.perf_counter()
    rep = phase_adversary_check(0.1, 1000, k=1)
    elapsed = time.perf_counter() - start
    for name in ("blsh", "greedy"):
        assert rep[name]["alg_profit"] <= 0 + 1e-9
        assert rep[name]["opt_profit"] == pytest.approx(50.0, abs=1e-9)
    assert rep["pass"]
    assert elapsed < 5, f"{elapsed:.2f}s"


def test_criterion_10_eps_margin_failure():
    eps, T = 0.1, 10_000
    rep = eps_margin_failure(eps, T, trials=1000, seed=10, z=Z)
    assert rep["alg_exact"] <= 1 + eps
    assert rep["alg_mean"] <= 1 + eps
    assert rep["never_buys"]
    assert rep["opt_lower_bound"] == pytest.approx((T - 1) * 2 * eps / 25)
    assert rep["opt_mean"] >= rep["opt_lower_bound"] - Z * rep["opt_se"]
    assert rep["ratio"] >= 50


def test_criterion_11_best_online_optimality():
    rng = np.random.default_rng(1111)
    for _ in range(100):
        T = int(rng.integers(1, 7))
        proc = IndependentSequence(tuple(random_distribution(rng, 3) for _ in range(T)))
        best = best_online_value(proc)
        closed = expected_alg_blsh(proc)
        assert abs(best - closed) <= 1e-9
        assert abs(expected_profit_enumerated(proc, BuyLowSellHigh()) - best) <= 1e-9


def _cli(*argv, cwd):
    return subprocess.run([sys.executable, "-m", "tradeprophets", *argv], capture_output=True,
                          cwd=cwd, check=False)


@pytest.mark.parametrize("argv", [
    ("simulate", "--instance", "prop-iid", "--eps", "0.2", "--T", "1000", "--trader", "blsh",
     "--trials", "20000", "--seed", "7", "--output", "rows.csv"),
    ("simulate", "--instance", "prop-iid", "--eps", "0.1", "--T", "200", "--trader", "bbsa",
     "--eps-sigma", "0.05", "--trials", "2000", "--seed", "3", "--format", "json",
     "--output", "rows.json"),
    ("simulate", "--instance", "phase", "--eps", "0.1", "--phases", "100",
     "--trader", "lookahead:1", "--trials", "3", "--seed", "1", "--output", "rows.csv"),
    ("verify", "theorem1", "--random-instances", "200", "--seed", "3", "--output", "rep.json"),
    ("verify", "theorem2", "--dist", "uniform01", "--eps-sigma", "0.1", "--T", "200",
     "--trials", "5000", "--seed", "1", "--output", "rep.json"),
    ("verify", "lowerbound", "--which", "both", "--eps", "0.1", "--T", "1000", "--trials", "500",
     "--seed", "2", "--output", "rep.json"),
    ("verify", "appendix", "--phases", "100", "--T", "10000", "--trials", "50", "--seed", "4",
     "--output", "rep.json"),
], ids=["simulate-csv", "simulate-json", "simulate-phase", "verify-1", "verify-2",
        "verify-lower", "verify-appendix"])
def test_criterion_12_determinism(argv, tmp_path):
    runs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        d.mkdir()
        res = _cli(*argv, cwd=d)
        assert res.returncode == 0, res.stderr.decode()
        files = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
        runs.append((res.stdout, files))
    assert runs[0][0] == runs[1][0]
    assert runs[0][1] == runs[1][1]
    assert runs[0][1], "no output file written"
