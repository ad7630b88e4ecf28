import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vamcts.core import ALL_RULES, Rule, SelectorParams
from vamcts.engine import SearchConfig, TerminalRootError, VarianceSource, act, run_search
from vamcts.envs import BanditSpec, GridworldSpec, bandit_env, gridworld_env


def grid():
    return GridworldSpec(4, 4, {(3, 3): 1.0, (3, 0): 0.3}, slip=0.2, max_steps=20)


def test_single_simulation_is_point_mass():
    env = bandit_env(BanditSpec.bernoulli([0.5, 0.5, 0.5]))
    tree, dist = run_search(env, env.initial_state(), SearchConfig(num_simulations=1), 0)
    assert sorted(dist) == [0.0, 0.0, 1.0]
    assert tree.nodes[0].visits == 1


def test_uct1_prefers_deterministic_better_arm():
    env = bandit_env(BanditSpec.bernoulli([1.0, 0.0]))
    tree, _ = run_search(env, env.initial_state(),
                         SearchConfig(64, selector=SelectorParams(Rule.UCT1)), 0)
    n = tree.root_visits()
    assert n.sum() == 64
    assert n[0] > n[1]


def test_variance_term_is_inert_when_returns_are_constant():
    # deterministic rewards keep every edge variance at zero, so c1 cannot matter
    env = bandit_env(BanditSpec.bernoulli([1.0, 0.0, 1.0, 0.0]))
    runs = [run_search(env, env.initial_state(),
                       SearchConfig(64, selector=SelectorParams(Rule.PUCT_V, c1=c1)), 3)[1]
            for c1 in (0.0, 2 ** 0.5)]
    np.testing.assert_array_equal(*runs)


@pytest.mark.parametrize("rule", ALL_RULES)
def test_search_is_deterministic(rule):
    env = gridworld_env(grid())
    cfg = SearchConfig(48, selector=SelectorParams(rule))
    a = run_search(env, env.initial_state(), cfg, 11)[1]
    b = run_search(env, env.initial_state(), cfg, 11)[1]
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("source", list(VarianceSource))
@pytest.mark.parametrize("normalize", [True, False])
def test_tree_invariants_hold(source, normalize):
    env = gridworld_env(grid())
    cfg = SearchConfig(100, 0.95, SelectorParams(Rule.UCT_V_P), normalize, source)
    tree, dist = run_search(env, env.initial_state(), cfg, 5)
    tree.check_invariants()
    assert tree.nodes[0].visits == 100
    assert dist.sum() == pytest.approx(1.0)


def test_terminal_placeholder_is_re_expanded():
    # one step from the goal with heavy slip: the same edge sometimes ends the
    # episode and sometimes does not
    spec = GridworldSpec.corridor(1, slip=0.6, max_steps=10)
    env = gridworld_env(spec)
    tree, _ = run_search(env, env.initial_state(), SearchConfig(300), 2)
    tree.check_invariants()
    root = tree.nodes[0]
    child = tree.nodes[root.children[1]]
    assert root.n[1] > 0
    assert child.expanded and not child.terminal


def test_terminal_root_is_rejected():
    env = bandit_env(BanditSpec.bernoulli([0.5, 0.5]))
    with pytest.raises(TerminalRootError):
        run_search(env, 1, SearchConfig(), 0)


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(num_simulations=0)
    with pytest.raises(ValueError):
        SearchConfig(gamma=1.2)


def test_act_examples():
    assert act([10, 54]) == 1
    assert act([32, 32]) == 0
    with pytest.raises(ValueError):
        act([1, 3], 1.0)
    with pytest.raises(ValueError):
        act([1, 3], -1.0, np.random.default_rng(0))


def test_act_samples_proportionally():
    rng = np.random.default_rng(0)
    draws = np.array([act([1, 3], 1.0, rng) for _ in range(100_000)])
    freq = draws.mean()
    band = 3 * np.sqrt(0.75 * 0.25 / draws.size)
    assert abs(freq - 0.75) <= band


def test_act_never_samples_unvisited():
    rng = np.random.default_rng(1)
    assert all(act([0, 5, 0, 1], 0.5, rng) in (1, 3) for _ in range(500))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(ALL_RULES), st.integers(1, 80))
def test_random_searches_keep_invariants(seed, rule, sims):
    env = gridworld_env(grid())
    tree, dist = run_search(env, env.initial_state(), SearchConfig(sims, selector=SelectorParams(rule)), seed)
    tree.check_invariants()
    assert tree.nodes[0].visits == sims
    assert tree.root_visits().sum() == sims
