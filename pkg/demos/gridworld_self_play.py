"""
Tabular self-play on a slippery gridworld
=========================================

A lookup table stands in for the network: priors follow root visit
distributions, values follow Monte Carlo returns. We train PUCT and PUCT-V for
a few iterations and score the raw policy head (no search) as training goes.
"""

from vamcts.core import Rule, SelectorParams
from vamcts.engine import SearchConfig
from vamcts.envs import GridworldSpec, gridworld_env, value_iteration
from vamcts.learner import TabularModel, self_play_curve

spec = GridworldSpec(5, 5, {(4, 4): 1.0, (4, 0): 0.3}, slip=0.2, max_steps=50)
print("optimal value from the start:", round(value_iteration(spec, 0.99)[(0, 0)], 3))

for rule in (Rule.PUCT, Rule.PUCT_V):
    config = SearchConfig(64, 0.99, SelectorParams(rule, c=1.25))
    _, curve = self_play_curve(lambda s: gridworld_env(spec, s), TabularModel(4, lr=0.1),
                               config, iterations=10, batch=4, seed=0, eval_every=2,
                               eval_episodes=30)
    print(rule.value, " ".join(f"it{it}:{ret:.3f}" for it, ret in curve))
