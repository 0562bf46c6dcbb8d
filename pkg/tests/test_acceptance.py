"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The summary lines are printed at the end of the pytest run (see conftest.py).
Thresholds are the stated ones; nothing here is relaxed to make a run green.
"""

import math
import time

import numpy as np

from satbandits import estimators as est
from satbandits.env import Environment, MeanSchedule
from satbandits.errors import ParameterError
from satbandits.fast import simulate
from satbandits.hard_instances import lemma1_choose_n, swap_window_params
from satbandits.harness import (ALL_POLICIES, ExperimentConfig, Grid, derive_seed, estimator_report,
                                lowerbound_report, records_to_csv, run_experiment, scaling_report, stream)
from satbandits.policies import PolicySpec
from satbandits.windowed import EpochBuffer, RadiusFn, avg_last, lcb_win, n_delta, ucb_win, win_set
from satbandits.windowed import beta as beta_fn

TOL = 1e-12


def record(verdicts, key, ok, detail):
    verdicts[key] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
    assert ok, detail


# -- 1. windowed statistics fixtures ----------------------------------------------------


def _b(w, T, K):
    return math.sqrt(2 * (4 * math.log(T) + math.log(K)) / w)


ZERO = RadiusFn.zero()
DEF = RadiusFn(100, 2)

# (description, computed thunk, hand value)
WINDOW_FIXTURES = [
    ("win_set(0)", lambda: win_set(0), []),
    ("win_set(1)", lambda: win_set(1), [1]),
    ("win_set(5)", lambda: win_set(5), [1, 2, 4]),
    ("win_set(16)", lambda: win_set(16), [1, 2, 4, 8, 16]),
    ("win_set(31)", lambda: win_set(31), [1, 2, 4, 8, 16]),
    ("win_set(1000)", lambda: win_set(1000), [1, 2, 4, 8, 16, 32, 64, 128, 256, 512]),
    ("avg_last([1,2,3,4],2)", lambda: avg_last(EpochBuffer([1, 2, 3, 4]), 2), 3.5),
    ("avg_last([1,2,3,4],4)", lambda: avg_last(EpochBuffer([1, 2, 3, 4]), 4), 2.5),
    ("avg_last([7],1)", lambda: avg_last(EpochBuffer([7]), 1), 7.0),
    ("avg_last([0.5,-1,2],1)", lambda: avg_last(EpochBuffer([0.5, -1, 2]), 1), 2.0),
    ("avg_last([0.5,-1,2],3)", lambda: avg_last(EpochBuffer([0.5, -1, 2]), 3), 0.5),
    ("lcb zero [0.9]", lambda: lcb_win(EpochBuffer([0.9]), ZERO), 0.9),
    ("lcb zero [.9x4,.1]", lambda: lcb_win(EpochBuffer([0.9] * 4 + [0.1]), ZERO), 0.7),
    ("ucb zero [.9x4,.1]", lambda: ucb_win(EpochBuffer([0.9] * 4 + [0.1]), ZERO), 0.1),
    ("lcb zero [.1x4,.9]", lambda: lcb_win(EpochBuffer([0.1] * 4 + [0.9]), ZERO), 0.9),
    ("ucb zero [.1x4,.9]", lambda: ucb_win(EpochBuffer([0.1] * 4 + [0.9]), ZERO), 0.3),
    ("lcb zero [1,2,3,4,5,6,7,8]", lambda: lcb_win(EpochBuffer(range(1, 9)), ZERO), 8.0),
    ("ucb zero [1,2,3,4,5,6,7,8]", lambda: ucb_win(EpochBuffer(range(1, 9)), ZERO), 4.5),
    ("lcb empty", lambda: lcb_win(EpochBuffer(), DEF), -math.inf),
    ("ucb empty", lambda: ucb_win(EpochBuffer(), DEF), math.inf),
    ("lcb const 0.37 m=3", lambda: lcb_win(EpochBuffer([0.37] * 3), DEF), 0.37 - _b(2, 100, 2)),
    ("ucb const 0.37 m=3", lambda: ucb_win(EpochBuffer([0.37] * 3), DEF), 0.37 + _b(2, 100, 2)),
    ("lcb const 0.6 m=100", lambda: lcb_win(EpochBuffer([0.6] * 100), DEF), 0.6 - _b(64, 100, 2)),
    ("ucb const 0.6 m=100", lambda: ucb_win(EpochBuffer([0.6] * 100), DEF), 0.6 + _b(64, 100, 2)),
    # [0,0,0,4]: suffix means w=1: 4, w=2: 2, w=4: 1
    ("lcb default [0,0,0,4]", lambda: lcb_win(EpochBuffer([0, 0, 0, 4]), DEF),
     max(4 - _b(1, 100, 2), 2 - _b(2, 100, 2), 1 - _b(4, 100, 2))),
    ("ucb default [0,0,0,4]", lambda: ucb_win(EpochBuffer([0, 0, 0, 4]), DEF),
     min(4 + _b(1, 100, 2), 2 + _b(2, 100, 2), 1 + _b(4, 100, 2))),
]


def _matches(got, want):
    if isinstance(want, list):
        return list(got) == want
    if math.isinf(want):
        return got == want
    return abs(got - want) <= TOL


def test_criterion_1_windowed_fixtures(verdicts):
    start = time.perf_counter()
    bad = [name for name, thunk, want in WINDOW_FIXTURES if not _matches(thunk(), want)]
    elapsed = time.perf_counter() - start
    ok = len(WINDOW_FIXTURES) >= 20 and not bad and elapsed < 1.0
    record(verdicts, "1", ok, f"{len(WINDOW_FIXTURES)} fixtures, mismatches={bad}, runtime {elapsed * 1e3:.1f} ms")


# -- 2. scaling on the alternating family ------------------------------------------------


def test_criterion_2_scaling(verdicts):
    cfg = ExperimentConfig(kind="scaling", family="alternating", policies=["nonstat-sat"],
                           grid=Grid(T=[4096, 16384, 65536], L=[1, 2, 4, 8], delta=[0.3], S=[0.5]),
                           replications=200, master_seed=2024)
    report = scaling_report(run_experiment(cfg))
    worst = max(r["mean_regret"] / (50 * r["L"] * math.log(r["T"]) / r["delta"]) for r in report.rows)
    spread = report.spread["nonstat-sat"]
    ok_a, ok_b = worst <= 1.0, spread < 4.0
    lo = min(report.rows, key=lambda r: r["normalized"])
    hi = max(report.rows, key=lambda r: r["normalized"])
    detail = (f"(a) {'pass' if ok_a else 'fail'}: max regret / (50 L lnT / delta) = {worst:.4f}; "
              f"(b) {'pass' if ok_b else 'fail'}: normalized spread {spread:.2f} "
              f"[min {lo['normalized']:.2f} at L={lo['L']},T={lo['T']}; "
              f"max {hi['normalized']:.2f} at L={hi['L']},T={hi['T']}]")
    record(verdicts, "2", ok_a and ok_b, detail)


# -- 3. constant regret of Simple-Sat ---------------------------------------------------


def three_arm(T):
    half = T // 2
    return MeanSchedule(3, T, (1, half + 1, T + 1), np.array([[0.8, 0.2, 0.3], [0.8, 0.7, 0.3]]))


def test_criterion_3_constant_regret(verdicts):
    R, spec, stats = 2000, PolicySpec.parse("simple-sat"), {}
    for T in (2**13, 2**16):
        env = Environment(three_arm(T), 0.5)
        regrets = []
        for rep in range(R):
            seed = derive_seed(3, f"three-arm;T={T}", rep)
            _, reg = simulate(env, spec, stream(seed, "noise"), stream(seed, "policy/simple-sat"))
            regrets.append(reg)
        x = np.asarray(regrets)
        stats[T] = (x.mean(), x.std(ddof=1) / math.sqrt(R))
    (m1, s1), (m2, s2) = stats[2**13], stats[2**16]
    bound = est.thm4_bound(three_arm(2**16), 0.5)
    diff, comb = m2 - m1, math.hypot(s1, s2)
    ok = abs(diff) <= 3 * comb and max(m1, m2) <= 10 * bound
    record(verdicts, "3", ok, f"mean {m1:.3f}+-{s1:.3f} (T=2^13), {m2:.3f}+-{s2:.3f} (T=2^16); "
                              f"diff {diff:.3f} vs 3SE {3 * comb:.3f}; 10*bound {10 * bound:.2f}")


# -- 4. KL separation identity -----------------------------------------------------------


def random_swap_params(rng):
    while True:
        L = int(rng.choice([3, 5, 7]))
        T = int(rng.integers(40, 800)) * (L - 1) // 2
        delta = float(rng.uniform(0.1, 0.45))
        S = float(rng.uniform(delta, 1 - delta))
        try:
            prm = swap_window_params(T, L, delta, S)
        except ParameterError:
            continue
        if prm.n <= 40:  # keeps the all-pairs brute force at desk scale
            return prm


def test_criterion_4_kl_identity(verdicts):
    rng = np.random.default_rng(4)
    worst, pairs = 0.0, 0
    for _ in range(50):
        prm = random_swap_params(rng)
        others = rng.choice(prm.candidates, size=prm.num_blocks)
        block = int(rng.integers(1, prm.num_blocks + 1))
        for a in prm.candidates:
            for b in prm.candidates:
                closed = est.swap_family_pairwise_kl(prm, a, b)
                brute = est.swap_family_pairwise_kl_bruteforce(prm, a, b, block=block, others=others)
                worst = max(worst, abs(closed - brute))
                pairs += 1
    record(verdicts, "4", worst <= TOL, f"50 instances, {pairs} pairs, max |closed - brute| = {worst:.2e}")


# -- 5. candidate-count choice, exhaustive----------------------------------------------------------------


def test_criterion_5_candidate_count(verdicts):
    failures = 0
    for y in range(4, 10**6 + 1):
        x = lemma1_choose_n(y)
        lx = math.log(x)
        if x < 2 or x * lx > y or lx < 0.5 * math.log(y):
            failures += 1
    record(verdicts, "5", failures == 0, f"y in [4, 1e6]: {failures} failures")


# -- 6. deterministic implication ------------------------------------------------------------


def test_criterion_6_implication(verdicts):
    policies = ["perturbed-oracle:0", "perturbed-oracle:0.002", "perturbed-oracle:0.005", "perturbed-oracle:0.01",
                "uniform", "nonstat-sat", "simple-sat", "round-robin"]
    cfg = ExperimentConfig(kind="estimators", family="swap-window", policies=policies,
                           grid=Grid(T=[600], L=[3], delta=[0.1], S=[0.5]), replications=1250, master_seed=6)
    rows = estimator_report(cfg)
    blocks = sum(r["blocks"] for r in rows)
    premise = sum(r["premise_blocks"] for r in rows)
    violations = sum(r["implication_violations"] for r in rows)
    ok = blocks >= 10**4 and violations == 0 and premise > 0
    record(verdicts, "6", ok, f"{blocks} trajectories, premise held on {premise}, violations {violations}")


# -- 7. change-point estimators, Monte-Carlo-------------------------------------------------------------------


def test_criterion_7_changepoint_estimators(verdicts):
    policies = ["fixed:1", "fixed:2", "uniform", "round-robin", "nonstat-sat"]
    cfg = ExperimentConfig(kind="estimators", family="single-switch", policies=policies,
                           grid=Grid(T=[2000], L=[2], delta=[0.5], S=[0.5]), replications=5000, master_seed=7)
    rows = {r["policy"]: r for r in estimator_report(cfg)}
    f1, f2 = rows["fixed:1"], rows["fixed:2"]
    n, l, r, d = f1["n"], f1["l"], f1["r"], f1["delta"]
    prime_rhs = n * math.exp(-r * d**2 / 2)
    double_rhs = n * math.exp(-(l - r) * d**2 / 2)
    ok_p = f1["prime_error"] <= prime_rhs + 3 * f1["prime_se"]
    ok_d = f2["double_prime_error"] <= double_rhs + 3 * f2["double_prime_se"]
    worst_mixed = max(rows.values(), key=lambda row: row["mixed_error"] - 3 * row["mixed_se"])
    ok_m = all(row["mixed_error"] <= 0.75 + 3 * row["mixed_se"] for row in rows.values())
    detail = (f"n={n}, l={l}, r={r}, 5000 blocks/policy; prime {f1['prime_error']:.4f} <= {prime_rhs:.4f}: {ok_p}; "
              f"double-prime {f2['double_prime_error']:.4f} <= {double_rhs:.4f}: {ok_d}; "
              f"mixed max {worst_mixed['mixed_error']:.4f} ({worst_mixed['policy']}) <= 0.75: {ok_m}")
    record(verdicts, "7", ok_p and ok_d and ok_m, detail)


# -- 8. Bayesian regret floor ------------------------------------------------------------------


def test_criterion_8_bayes_floor(verdicts):
    cfg = ExperimentConfig(kind="lowerbound", family="swap-window", policies=list(ALL_POLICIES),
                           grid=Grid(T=[3000], L=[3], delta=[0.5], S=[0.5]), replications=2000, master_seed=8)
    rows = lowerbound_report(cfg, run_experiment(cfg))
    floor = rows[0]["criterion_floor"]
    low = min(rows, key=lambda row: row["mean_regret"])
    ok = len(rows) == len(ALL_POLICIES) and all(row["ok"] for row in rows)
    record(verdicts, "8", ok, f"floor (L-1)ln n/256 = {floor:.4f}; lowest mean {low['mean_regret']:.3f} "
                              f"({low['policy']}); {sum(row['ok'] for row in rows)}/{len(rows)} policies clear it")


# -- 9. n_Delta bound ----------------------------------------------------------------------------


def test_criterion_9_n_delta(verdicts):
    rng = np.random.default_rng(9)
    bad, missing = [], 0
    for _ in range(100):
        T = int(math.exp(rng.uniform(math.log(2), math.log(10**6))))
        K = int(rng.integers(1, 101))
        delta = float(math.exp(rng.uniform(math.log(0.05), math.log(2.0))))
        n = n_delta(T, K, delta)
        if n is None:
            missing += 1
            if not beta_fn(T, T, K) > delta / 2:
                bad.append((T, K, delta, "none"))
            continue
        minimal = beta_fn(n, T, K) <= delta / 2 and (n == 1 or beta_fn(n - 1, T, K) > delta / 2)
        if not (minimal and n <= 8 * (4 * math.log(T) + math.log(K)) / delta**2 + 1 and beta_fn(T, T, K) <= delta / 2):
            bad.append((T, K, delta, n))
    record(verdicts, "9", not bad, f"100 draws, {missing} without n_delta, violations {bad}")


# -- 10. determinism -------------------------------------------------------------------------------


def test_criterion_10_determinism(verdicts):
    def cfg(workers):
        return ExperimentConfig(kind="simulate", family="swap-window",
                                policies=["nonstat-sat", "simple-sat", "oracle-restart", "uniform", "fixed:2"],
                                grid=Grid(T=[1200], L=[3, 5], delta=[0.3], S=[0.5]), replications=20,
                                master_seed=10, workers=workers)

    first = records_to_csv(run_experiment(cfg(1))).encode()
    second = records_to_csv(run_experiment(cfg(1))).encode()
    parallel = records_to_csv(run_experiment(cfg(4))).encode()
    ok = first == second == parallel
    record(verdicts, "10", ok, f"{len(first)} bytes; rerun identical {first == second}; "
                               f"1 vs 4 workers identical {first == parallel}")
