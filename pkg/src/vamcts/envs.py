"""Desk-scale environments: stochastic bandits and slippery gridworlds."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import PriorDistribution, SelectorParams
from .selectors import argmax_lowest, exploration_terms
from .backprop import welford_step


class ArmKind(str, enum.Enum):
    BERNOULLI = "BERNOULLI"
    TRUNCATED_GAUSSIAN = "TRUNCATED_GAUSSIAN"


@dataclass(frozen=True)
class Arm:
    kind: ArmKind
    mean: float
    std: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ArmKind(self.kind))
        if not 0.0 <= self.mean <= 1.0 or not math.isfinite(self.mean):
            raise ValueError(f"arm parameter {self.mean} outside [0, 1]")
        if self.std < 0 or not math.isfinite(self.std):
            raise ValueError(f"arm std {self.std} must be finite and nonnegative")
        if self.kind is ArmKind.BERNOULLI and self.std != 0.0:
            raise ValueError("Bernoulli arms take no std")

    @classmethod
    def bernoulli(cls, p: float) -> "Arm":
        return cls(ArmKind.BERNOULLI, p)

    @classmethod
    def gaussian(cls, mu: float, sigma: float) -> "Arm":
        return cls(ArmKind.TRUNCATED_GAUSSIAN, mu, sigma)

    @property
    def expected(self) -> float:
        """Mean reward; for Gaussian arms the mean after clipping to [0, 1]."""
        if self.kind is ArmKind.BERNOULLI or self.std == 0.0:
            return self.mean
        mu, s = self.mean, self.std
        a, b = (0.0 - mu) / s, (1.0 - mu) / s
        cdf = lambda z: 0.5 * math.erfc(-z / math.sqrt(2.0))  # noqa: E731
        pdf = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)  # noqa: E731
        inside = mu * (cdf(b) - cdf(a)) + s * (pdf(a) - pdf(b))
        return inside + (1.0 - cdf(b))

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind is ArmKind.BERNOULLI:
            return np.asarray(rng.random(size) < self.mean, dtype=np.float64)
        return np.clip(self.mean + self.std * rng.standard_normal(size), 0.0, 1.0)


@dataclass(frozen=True)
class BanditSpec:
    arms: tuple[Arm, ...]

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))

    @classmethod
    def bernoulli(cls, means: Sequence[float]) -> "BanditSpec":
        return cls(tuple(Arm.bernoulli(p) for p in means))

    @property
    def means(self) -> np.ndarray:
        return np.array([arm.expected for arm in self.arms])

    def reward_table(self, horizon: int, seed) -> np.ndarray:
        """``(horizon, arms)`` table; entry ``[t, a]`` is the reward of pulling ``a`` at ``t``."""
        rng = np.random.default_rng(seed)
        table = np.empty((horizon, len(self.arms)))
        for a, arm in enumerate(self.arms):
            table[:, a] = arm.sample(rng, horizon)
        return table


class BanditEnv:
    """One-step environment: pulling any arm ends the episode."""

    reward_range = (0.0, 1.0)

    def __init__(self, spec: BanditSpec, seed=None, prior=None, value: float = 0.0):
        if len(spec.arms) < 2:
            raise ValueError("a bandit needs at least two arms")
        self.spec = spec
        self.num_actions = len(spec.arms)
        self.rng = np.random.default_rng(seed)
        self.prior = (PriorDistribution.uniform(self.num_actions) if prior is None
                      else PriorDistribution(prior)).probs
        self.value = value

    def initial_state(self, rng=None):
        return 0

    def legal_actions(self, state):
        return range(self.num_actions) if state == 0 else ()

    def is_terminal(self, state) -> bool:
        return state != 0

    def step(self, state, action: int, rng=None):
        rng = self.rng if rng is None else rng
        return 1, float(self.spec.arms[action].sample(rng)), True

    def pull(self, action: int, rng=None) -> float:
        return self.step(0, action, rng)[1]

    def evaluate(self, state):
        return self.value, self.prior

    def state_key(self, state):
        return state


def bandit_env(spec: BanditSpec, seed=None, prior=None) -> BanditEnv:
    return BanditEnv(spec, seed, prior)


# --- gridworld ----------------------------------------------------------------

MOVES = ((0, -1), (1, 0), (0, 1), (-1, 0))  # up, right, down, left


@dataclass(frozen=True)
class GridworldSpec:
    width: int
    height: int
    goals: dict = field(default_factory=dict)
    start: tuple[int, int] = (0, 0)
    slip: float = 0.0
    max_steps: int = 256
    walls: frozenset = frozenset()

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")
        if not self.goals:
            raise ValueError("gridworld needs at least one goal")
        if not 0.0 <= self.slip < 1.0:
            raise ValueError("slip must lie in [0, 1)")
        object.__setattr__(self, "goals", {tuple(k): float(v) for k, v in self.goals.items()})
        object.__setattr__(self, "start", tuple(self.start))
        object.__setattr__(self, "walls", frozenset(tuple(w) for w in self.walls))
        for cell in [*self.goals, self.start, *self.walls]:
            if not self.inside(cell):
                raise ValueError(f"cell {cell} lies outside the grid")
        for r in self.goals.values():
            if not 0.0 <= r <= 1.0:
                raise ValueError("goal rewards must lie in [0, 1]")
        if self.start in self.goals or self.start in self.walls:
            raise ValueError("start must be a free, non-goal cell")

    def inside(self, cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def move(self, cell, action: int):
        dx, dy = MOVES[action]
        nxt = (cell[0] + dx, cell[1] + dy)
        if not self.inside(nxt) or nxt in self.walls:
            return cell
        return nxt

    def cells(self):
        return [(x, y) for y in range(self.height) for x in range(self.width)
                if (x, y) not in self.walls]

    @classmethod
    def corridor(cls, length: int, slip: float = 0.0, max_steps: int = 256) -> "GridworldSpec":
        """1-row corridor; the goal is ``length`` steps to the right of the start."""
        return cls(length + 1, 1, {(length, 0): 1.0}, (0, 0), slip, max_steps)


class GridworldEnv:
    """Four-action grid navigation; state is ``(x, y, t)``.

    With probability ``slip`` the chosen move is replaced by a uniformly random
    one. Entering a goal pays its reward and ends the episode; so does reaching
    ``max_steps``.
    """

    num_actions = 4
    reward_range = (0.0, 1.0)

    def __init__(self, spec: GridworldSpec, seed=None, values=None, priors=None):
        self.spec = spec
        self.rng = np.random.default_rng(seed)
        self.values = values or {}
        self.priors = priors or {}
        self._uniform = np.full(4, 0.25)

    def initial_state(self, rng=None):
        return (*self.spec.start, 0)

    def legal_actions(self, state):
        return range(4)

    def is_terminal(self, state) -> bool:
        x, y, t = state
        return (x, y) in self.spec.goals or t >= self.spec.max_steps

    def step(self, state, action: int, rng=None):
        rng = self.rng if rng is None else rng
        x, y, t = state
        if self.spec.slip > 0.0 and rng.random() < self.spec.slip:
            action = int(rng.integers(4))
        nx, ny = self.spec.move((x, y), action)
        reward = self.spec.goals.get((nx, ny), 0.0)
        nxt = (nx, ny, t + 1)
        return nxt, reward, self.is_terminal(nxt)

    def evaluate(self, state):
        key = state[:2]
        return self.values.get(key, 0.0), self.priors.get(key, self._uniform)

    def state_key(self, state):
        return state[:2]


def gridworld_env(spec: GridworldSpec, seed=None, values=None, priors=None) -> GridworldEnv:
    return GridworldEnv(spec, seed, values, priors)


def value_iteration(spec: GridworldSpec, gamma: float, tol: float = 1e-10,
                    max_iter: int = 100_000) -> dict:
    """Optimal state values of the slippery grid, ignoring the step limit.

    Goal cells are absorbing with value 0; the reward is paid on entry.
    """
    cells = spec.cells()
    V = {c: 0.0 for c in cells}
    for _ in range(max_iter):
        delta = 0.0
        new = {}
        for c in cells:
            if c in spec.goals:
                new[c] = 0.0
                continue
            new[c] = max(_q_value(spec, V, c, a, gamma) for a in range(4))
            delta = max(delta, abs(new[c] - V[c]))
        V = new
        if delta <= tol:
            return V
    raise RuntimeError("value iteration did not converge")


def _q_value(spec, V, cell, action, gamma) -> float:
    total = 0.0
    for a in range(4):
        p = (1.0 - spec.slip) * (a == action) + spec.slip / 4.0
        if p == 0.0:
            continue
        nxt = spec.move(cell, a)
        total += p * (spec.goals.get(nxt, 0.0) + gamma * V[nxt])
    return total


def greedy_policy(spec: GridworldSpec, V: dict, gamma: float) -> dict:
    return {c: argmax_lowest([_q_value(spec, V, c, a, gamma) for a in range(4)])
            for c in spec.cells() if c not in spec.goals}


# --- flat bandit regret -------------------------------------------------------

def regret_curves(spec: BanditSpec, params: SelectorParams, horizon: int, seeds: Sequence[int],
                  checkpoints: Sequence[int] | None = None) -> np.ndarray:
    """Pseudo-regret of ``params.rule`` played as a depth-1 tree.

    Runs every seed in lockstep; returns an array ``(len(seeds), len(checkpoints))``
    of cumulative pseudo-regret after each checkpoint (default: ``horizon``).
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    checkpoints = [horizon] if checkpoints is None else list(checkpoints)
    if any(not 1 <= c <= horizon for c in checkpoints):
        raise ValueError("checkpoints must lie in [1, horizon]")
    seeds = list(seeds)
    S, K = len(seeds), len(spec.arms)
    tables = np.stack([spec.reward_table(horizon, s) for s in seeds])
    means = spec.means
    gaps = means.max() - means
    prior = np.full(K, 1.0 / K)
    n = np.zeros((S, K))
    mu = np.zeros((S, K))
    var = np.zeros((S, K))
    rows = np.arange(S)
    regret = np.zeros(S)
    out = np.zeros((S, len(checkpoints)))
    marks = {c: i for i, c in enumerate(checkpoints)}
    for t in range(horizon):
        sigma = np.sqrt(var)
        # same arithmetic as flat_bandit_run so near-ties break identically
        e1, e2 = exploration_terms(params.rule, n, sigma, prior, t, params)
        arm = np.argmax(mu + e1 + e2, axis=1)
        reward = tables[rows, t, arm]
        # welford_step on the pulled arm, vectorized over seeds
        old_n = n[rows, arm]
        cnt = old_n + 1.0
        delta = reward - mu[rows, arm]
        new_mu = mu[rows, arm] + delta / cnt
        var[rows, arm] = np.maximum((old_n * var[rows, arm] + delta * (reward - new_mu)) / cnt, 0.0)
        mu[rows, arm] = new_mu
        n[rows, arm] = cnt
        regret += gaps[arm]
        if t + 1 in marks:
            out[:, marks[t + 1]] = regret
    return out


def cumulative_regret(spec: BanditSpec, params: SelectorParams, horizon: int, seed: int) -> float:
    """Pseudo-regret ``sum_t (mu* - mu_{a_t})`` of one seeded run."""
    return float(regret_curves(spec, params, horizon, [seed])[0, 0])


def flat_bandit_run(spec: BanditSpec, params: SelectorParams, horizon: int, seed: int):
    """Scalar reference run (one seed, ``welford_step`` per pull); returns pulled arms."""
    table = spec.reward_table(horizon, seed)
    K = len(spec.arms)
    prior = np.full(K, 1.0 / K)
    n = np.zeros(K)
    mu = np.zeros(K)
    var = np.zeros(K)
    arms = []
    for t in range(horizon):
        e1, e2 = exploration_terms(params.rule, n, np.sqrt(var), prior, t, params)
        a = argmax_lowest(mu + e1 + e2)
        cnt, mu[a], var[a] = welford_step(int(n[a]), mu[a], var[a], table[t, a])
        n[a] = cnt
        arms.append(a)
    return np.array(arms)


__all__ = [
    "Arm",
    "ArmKind",
    "BanditEnv",
    "BanditSpec",
    "GridworldEnv",
    "GridworldSpec",
    "bandit_env",
    "cumulative_regret",
    "flat_bandit_run",
    "greedy_policy",
    "gridworld_env",
    "regret_curves",
    "value_iteration",
]
