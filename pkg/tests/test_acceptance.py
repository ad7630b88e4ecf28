"""Acceptance criteria, each checked at its stated tolerance and time budget.

Every test records one PASS/FAIL line (see conftest) before asserting.
"""

import math
import time

import numpy as np

from vamcts.bench import (ExperimentConfig, ExperimentKind, OverheadSpec, SelfPlaySpec,
                          measure_overhead, run_experiment)
from vamcts.core import ALL_RULES, ChildStatsView, Rule, SelectorParams
from vamcts.engine import SearchConfig, run_search
from vamcts.envs import BanditSpec, GridworldSpec, gridworld_env, regret_curves
from vamcts.backprop import welford_step
from vamcts.rpo import check_factorization, check_marginal_gain
from vamcts.selectors import scores


def test_criterion_1_factorization(acceptance):
    t0 = time.perf_counter()
    res = check_factorization(np.random.default_rng(101), trials=1000, rtol=1e-12)
    dt = time.perf_counter() - t0
    ok = res.passed and dt < 1.0
    acceptance(1, "factorization identity, 7 rules x 1000 tuples, rtol 1e-12", ok,
               f"{res.detail}; {dt:.2f}s of 1s")
    assert res.passed, res.detail
    assert dt < 1.0


def test_criterion_2_welford(acceptance):
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        size = int(rng.integers(1, 10_001))
        loc = rng.uniform(1.0, 10.0) * rng.choice([-1.0, 1.0])
        stream = rng.normal(loc, rng.uniform(0.01, 5.0), size)
        n, mu, var = 0, 0.0, 0.0
        for v in stream.tolist():
            n, mu, var = welford_step(n, mu, var, v)
        ref_mu, ref_var = float(np.mean(stream)), float(np.var(stream))
        worst = max(worst, abs(mu - ref_mu) / abs(ref_mu))
        if ref_var > 0:
            worst = max(worst, abs(var - ref_var) / ref_var)
        else:
            worst = max(worst, var)
        assert n == size
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 5.0
    acceptance(2, "Welford vs two-pass, 100 streams, rtol 1e-10", ok,
               f"worst rel err {worst:.1e}; {dt:.2f}s of 5s")
    assert worst <= 1e-10
    assert dt < 5.0


def test_criterion_3_marginal_gain(acceptance):
    t0 = time.perf_counter()
    res = check_marginal_gain(np.random.default_rng(303), views=200, eps=1e-6, atol=1e-6)
    dt = time.perf_counter() - t0
    ok = res.passed and dt < 10.0
    acceptance(3, "inverse-RPO marginal gain, 7 rules x 200 views, atol 1e-6", ok,
               f"{res.detail}; {dt:.2f}s of 10s")
    assert res.passed, res.detail
    assert dt < 10.0


# (prior-based rule, prior-free rule, constants mapping under a uniform prior over A actions)
REDUCTIONS = [
    (Rule.UCT_P, Rule.UCT1, lambda p, A: dict(c=p.c / math.sqrt(A))),
    (Rule.UCT_V_P, Rule.UCT_V, lambda p, A: dict(c1=p.c1 / math.sqrt(A), c2=p.c2 / A)),
    (Rule.PUCT_V, Rule.UCT_V_H, lambda p, A: dict(c1=p.c1 / A, c2=p.c2 / A)),
]


def test_criterion_4_uniform_prior_reductions(acceptance):
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(1000):
        A = int(rng.integers(1, 9))
        n = rng.integers(0, 200, size=A)
        q = rng.uniform(-1, 1, size=A)
        sigma = rng.uniform(0, 0.5, size=A)
        v = ChildStatsView(q, n, sigma, np.full(A, 1.0 / A))
        c, c1, c2 = rng.uniform(0.1, 3.0, size=3)
        for with_prior, free, mapping in REDUCTIONS:
            p = SelectorParams(with_prior, c=c, c1=c1, c2=c2)
            a = scores(v, p)
            b = scores(v, SelectorParams(free, **{**dict(c=c, c1=c1, c2=c2), **mapping(p, A)}))
            worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))))
        # PUCT under a uniform prior is the sqrt(N) bonus c/A * sqrt(N)/(1+n)
        p = SelectorParams(Rule.PUCT, c=c)
        direct = q + (c / A) * math.sqrt(v.N) / (1.0 + n)
        worst = max(worst, float(np.max(np.abs(scores(v, p) - direct) / np.maximum(1.0, np.abs(direct)))))
    ok = worst <= 1e-12
    acceptance(4, "uniform-prior reductions, 1000 views, 1e-12", ok, f"worst {worst:.1e}")
    assert ok


def test_criterion_5_bandit_regret(acceptance):
    spec = BanditSpec.bernoulli([0.9, 0.85, 0.1, 0.05])
    checkpoints = [100, 1000, 10_000]
    t0 = time.perf_counter()
    uct1 = regret_curves(spec, SelectorParams(Rule.UCT1, c=math.sqrt(2)), 10_000, range(100), checkpoints).mean(0)
    uctv = regret_curves(spec, SelectorParams(Rule.UCT_V), 10_000, range(100), checkpoints).mean(0)
    dt = time.perf_counter() - t0
    per_t = lambda r: r / np.asarray(checkpoints)  # noqa: E731
    sublinear = all(np.all(np.diff(per_t(r)) < 0) for r in (uct1, uctv))
    ordered = uctv[-1] <= uct1[-1]
    ok = ordered and sublinear and dt < 120
    acceptance(5, "UCT-V regret <= UCT1 at T=1e4 over 100 seeds, both sublinear", ok,
               f"UCT-V {uctv[-1]:.1f} vs UCT1 {uct1[-1]:.1f}; {dt:.1f}s of 120s")
    assert ordered
    assert sublinear
    assert dt < 120


def test_criterion_6_self_play(acceptance, tmp_path):
    rules = [Rule.PUCT, Rule.PUCT_V, Rule.UCT_P, Rule.UCT_V_P]
    cfg = ExperimentConfig(
        ExperimentKind.SELF_PLAY, tuple(SelectorParams(r, c=1.25) for r in rules), (0, 1, 2),
        gridworld=GridworldSpec(5, 5, {(4, 4): 1.0, (4, 0): 0.3}, slip=0.2, max_steps=50),
        search=SearchConfig(64, 0.99),
        self_play=SelfPlaySpec(iterations=20, batch=4, lr=0.1, eval_every=5, eval_episodes=50),
    )
    t0 = time.perf_counter()
    report = run_experiment(cfg, tmp_path)
    dt = time.perf_counter() - t0
    final = {}
    for sel, cp, metric, mean, lo, hi, _ in report.summary:
        if cp == 20:
            final[sel] = (mean, (hi - lo) / 2)
    pv = final["PUCT_V"][0] >= final["PUCT"][0] - final["PUCT"][1]
    vp = final["UCT_V_P"][0] >= final["UCT_P"][0] - final["UCT_P"][1]
    ok = pv and vp and dt < 600
    detail = ", ".join(f"{k} {m:.3f}+-{h:.3f}" for k, (m, h) in final.items())
    acceptance(6, "self-play: PUCT-V >= PUCT - half-band, UCT-V-P >= UCT-P - half-band", ok,
               f"{detail}; {dt:.0f}s of 600s")
    assert pv and vp
    assert dt < 600


def test_criterion_7_overhead(acceptance):
    rules = [Rule.PUCT, Rule.UCT_V_P, Rule.PUCT_V]
    t0 = time.perf_counter()
    us = measure_overhead(GridworldSpec(5, 5, {(4, 4): 1.0, (4, 0): 0.3}, slip=0.2, max_steps=50),
                          [SelectorParams(r) for r in rules], SearchConfig(),
                          OverheadSpec(total_simulations=1_000_000, simulations_per_search=64, rounds=1000))
    dt = time.perf_counter() - t0
    ratios = {r: us[r] / us["PUCT"] for r in ("UCT_V_P", "PUCT_V")}
    within = all(abs(x - 1.0) <= 0.10 for x in ratios.values())
    ok = within and dt < 120
    acceptance(7, "per-simulation time of UCT-V-P and PUCT-V within 10% of PUCT, 1e6 sims", ok,
               ", ".join(f"{k} x{v:.3f}" for k, v in ratios.items()) + f"; {dt:.0f}s of 120s")
    assert within
    assert dt < 120


def test_criterion_8_engine_invariants(acceptance):
    rng = np.random.default_rng(808)
    failures = []
    for i in range(100):
        rule = ALL_RULES[i % len(ALL_RULES)]
        w, h = (int(x) for x in rng.integers(2, 6, size=2))
        spec = GridworldSpec(w, h, {(w - 1, h - 1): 1.0}, slip=float(rng.uniform(0, 0.5)),
                             max_steps=int(rng.integers(3, 30)))
        sims = int(rng.integers(1, 200))
        cfg = SearchConfig(sims, float(rng.uniform(0.5, 1.0)), SelectorParams(rule))
        seed = int(rng.integers(2**31))
        env = gridworld_env(spec)
        tree, dist = run_search(env, env.initial_state(), cfg, seed)
        _, again = run_search(env, env.initial_state(), cfg, seed)
        try:
            tree.check_invariants()
            assert tree.root_visits().sum() == sims
            assert dist.tobytes() == again.tobytes()
            for node in tree.nodes:
                if node.expanded and node.visits:
                    assert sum(node.n) == node.visits
        except AssertionError as exc:
            failures.append(f"search {i}: {exc}")
    ok = not failures
    acceptance(8, "engine invariants on 100 random searches", ok,
               failures[0] if failures else "visit sums, replay and node counts hold")
    assert ok, failures
