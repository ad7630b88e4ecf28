"""Tabular AlphaZero-style self-play.

A lookup table replaces the policy/value network: priors track root visit
distributions and values track Monte Carlo returns, both as exponential moving
averages with rate ``lr``.
"""

from __future__ import annotations

import ast
import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Hashable

import numpy as np

from .core import floor_probs
from .engine import EnvironmentModel, SearchConfig, act, run_search
from .selectors import argmax_lowest

EnvFactory = Callable[[int], EnvironmentModel]


@dataclass
class TabularModel:
    num_actions: int
    lr: float = 1e-3
    values: dict = field(default_factory=dict)
    priors: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.lr <= 1.0:
            raise ValueError("lr must lie in [0, 1]")

    def uniform(self) -> np.ndarray:
        return np.full(self.num_actions, 1.0 / self.num_actions)

    def evaluate(self, key: Hashable) -> tuple[float, np.ndarray]:
        return self.values.get(key, 0.0), self.priors.get(key, self.uniform())

    def update(self, key: Hashable, visit_dist, ret: float):
        prior = self.priors.get(key, self.uniform())
        self.priors[key] = floor_probs((1.0 - self.lr) * prior + self.lr * np.asarray(visit_dist))
        value = self.values.get(key, 0.0)
        self.values[key] = value + self.lr * (ret - value)

    def copy(self) -> "TabularModel":
        return copy.deepcopy(self)


@dataclass
class Transition:
    key: Hashable
    visit_dist: np.ndarray
    reward: float


def play_episode(env: EnvironmentModel, model: TabularModel, config: SearchConfig,
                 rng: np.random.Generator, temperature: float = 1.0) -> list[Transition]:
    evaluator = lambda s: model.evaluate(env.state_key(s))  # noqa: E731
    state = env.initial_state(rng)
    episode = []
    while not env.is_terminal(state):
        _, dist = run_search(env, state, config, int(rng.integers(2**63)), evaluator)
        action = act(dist, temperature, rng)
        key = env.state_key(state)
        state, reward, _ = env.step(state, action, rng)
        episode.append(Transition(key, dist, reward))
    return episode


def returns_to_go(rewards, gamma: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    g = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + gamma * g
        out[t] = g
    return out


def self_play_iteration(env_factory: EnvFactory, model: TabularModel, config: SearchConfig,
                        batch: int, seed: int, temperature: float = 1.0):
    """Play ``batch`` searched episodes against a frozen snapshot, then update.

    Returns the updated copy of ``model`` and a dict of trajectory statistics.
    """
    rng = np.random.default_rng(seed)
    snapshot = model
    episodes = []
    for _ in range(batch):
        env = env_factory(int(rng.integers(2**31)))
        episodes.append(play_episode(env, snapshot, config, rng, temperature))

    updated = model.copy()
    returns = []
    for ep in episodes:
        rtg = returns_to_go([tr.reward for tr in ep], config.gamma)
        returns.append(rtg[0] if len(ep) else 0.0)
        for tr, g in zip(ep, rtg):
            updated.update(tr.key, tr.visit_dist, float(g))
    stats = {
        "episodes": batch,
        "mean_return": float(np.mean(returns)),
        "mean_length": float(np.mean([len(ep) for ep in episodes])),
        "states": len(updated.priors),
    }
    return updated, stats


def evaluate_policy_head(model: TabularModel, env_factory: EnvFactory, episodes: int, seed: int,
                         gamma: float = 0.99) -> float:
    """Mean discounted return of acting greedily on the model prior, no search."""
    if episodes < 1:
        raise ValueError("need at least one episode")
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(episodes):
        env = env_factory(int(rng.integers(2**31)))
        state = env.initial_state(rng)
        discount, ret = 1.0, 0.0
        while not env.is_terminal(state):
            _, prior = model.evaluate(env.state_key(state))
            state, reward, _ = env.step(state, argmax_lowest(prior), rng)
            ret += discount * reward
            discount *= gamma
        total += ret
    return total / episodes


def derive_seed(*parts: int) -> int:
    """Stable child seed from integer parts."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def self_play_curve(env_factory: EnvFactory, model: TabularModel, config: SearchConfig,
                    iterations: int, batch: int, seed: int, eval_every: int = 5,
                    eval_episodes: int = 50, temperature: float = 1.0):
    """Train for ``iterations`` rounds, scoring the policy head every ``eval_every``.

    Returns the final model and a list of ``(iteration, mean return)`` pairs;
    the last iteration is always scored. Every evaluation reuses one episode
    seed so checkpoints are compared on common random numbers.
    """
    if iterations < 1 or eval_every < 1:
        raise ValueError("iterations and eval_every must be positive")
    eval_seed = derive_seed(seed, 1)
    curve = []
    for it in range(1, iterations + 1):
        model, _ = self_play_iteration(env_factory, model, config, batch,
                                       derive_seed(seed, 0, it), temperature)
        if it % eval_every == 0 or it == iterations:
            curve.append((it, evaluate_policy_head(model, env_factory, eval_episodes,
                                                   eval_seed, config.gamma)))
    return model, curve


# --- checkpoints --------------------------------------------------------------

HEADER = "# vamcts tabular model v1"


def save_model(model: TabularModel, path) -> None:
    """Write ``model`` as flat text: a header, ``name=value`` settings, then one
    tab-separated ``state<TAB>value<TAB>p0 p1 ...`` row per state."""
    lines = [HEADER, f"num_actions={model.num_actions}", f"lr={model.lr!r}"]
    keys = sorted(set(model.values) | set(model.priors), key=repr)
    for key in keys:
        value, prior = model.evaluate(key)
        lines.append(f"{key!r}\t{value!r}\t{' '.join(repr(float(p)) for p in prior)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> TabularModel:
    text = Path(path).read_text().splitlines()
    if not text or text[0] != HEADER:
        raise ValueError(f"{path}: not a tabular model checkpoint")
    settings = {}
    model = None
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        if "\t" not in line:
            name, _, val = line.partition("=")
            settings[name.strip()] = val.strip()
            continue
        if model is None:
            model = TabularModel(int(settings["num_actions"]), float(settings["lr"]))
        try:
            key_s, value_s, prior_s = line.split("\t")
            key = ast.literal_eval(key_s)
            prior = np.array([float(p) for p in prior_s.split()])
        except (ValueError, SyntaxError) as exc:
            raise ValueError(f"{path}:{lineno}: malformed row") from exc
        model.values[key] = float(value_s)
        model.priors[key] = prior
    if model is None:
        model = TabularModel(int(settings["num_actions"]), float(settings["lr"]))
    return model
