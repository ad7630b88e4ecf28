"""Shared value types and the empirical visit distribution."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

PROB_FLOOR = 1e-12


class Rule(str, enum.Enum):
    UCT1 = "UCT1"
    PUCT = "PUCT"
    UCT_P = "UCT_P"
    UCT_V = "UCT_V"
    UCT_V_H = "UCT_V_H"
    UCT_V_P = "UCT_V_P"
    PUCT_V = "PUCT_V"

    @classmethod
    def parse(cls, name: str) -> "Rule":
        key = name.strip().upper().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown selector rule {name!r}") from None

    @property
    def uses_prior(self) -> bool:
        return self in (Rule.PUCT, Rule.UCT_P, Rule.UCT_V_P, Rule.PUCT_V)

    @property
    def uses_variance(self) -> bool:
        return self in (Rule.UCT_V, Rule.UCT_V_H, Rule.UCT_V_P, Rule.PUCT_V)


ALL_RULES = tuple(Rule)


class InvalidActionSet(ValueError):
    pass


@dataclass(frozen=True)
class NodeStats:
    n: int = 0
    mu: float = 0.0
    var: float = 0.0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("visit count must be nonnegative")
        if self.var < 0:
            raise ValueError("variance must be nonnegative")

    @property
    def std(self) -> float:
        return math.sqrt(self.var)


def floor_probs(probs, floor: float = PROB_FLOOR) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InvalidActionSet("probability vector must be 1-D and nonempty")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("probabilities must be finite and nonnegative")
    p = np.maximum(p, floor)
    return p / p.sum()


@dataclass(frozen=True, eq=False)
class PriorDistribution:
    """Categorical prior over a node's actions.

    Entries are floored at ``PROB_FLOOR`` and renormalized on construction so
    that ratios ``y / prior`` stay finite.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = floor_probs(self.probs)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, size: int) -> "PriorDistribution":
        if size < 1:
            raise InvalidActionSet("action set must be nonempty")
        return cls(np.full(size, 1.0 / size))

    def __len__(self) -> int:
        return self.probs.size

    def __getitem__(self, a):
        return self.probs[a]

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)


@dataclass(frozen=True)
class SelectorParams:
    rule: Rule = Rule.PUCT
    c: float = 1.0
    c1: float = math.sqrt(2.0)
    c2: float = 3.0

    def __post_init__(self):
        if not isinstance(self.rule, Rule):
            object.__setattr__(self, "rule", Rule.parse(self.rule))
        # zero is allowed so that greedy baselines can be expressed
        for name in ("c", "c1", "c2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def _as_prior(prior, size: int) -> PriorDistribution:
    if prior is None:
        return PriorDistribution.uniform(size)
    if isinstance(prior, PriorDistribution):
        return prior
    return PriorDistribution(prior)


@dataclass(frozen=True, eq=False)
class ChildStatsView:
    """Read-only snapshot of a node's children as seen by a selector."""

    q: np.ndarray
    n: np.ndarray
    sigma: np.ndarray | None = None
    prior: PriorDistribution | None = None
    N: int = field(default=-1)

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        n = np.asarray(self.n, dtype=np.float64)
        if q.ndim != 1 or q.size == 0:
            raise InvalidActionSet("a view needs at least one action")
        sigma = np.zeros_like(q) if self.sigma is None else np.asarray(self.sigma, dtype=np.float64)
        prior = _as_prior(self.prior, q.size)
        if not (n.shape == q.shape == sigma.shape == prior.probs.shape):
            raise ValueError("q, n, sigma and prior must share one length")
        if np.any(n < 0) or np.any(sigma < 0):
            raise ValueError("counts and standard deviations must be nonnegative")
        total = int(n.sum())
        # N may exceed the child counts when the parent counts its own expansion visit
        if self.N != -1 and self.N < total:
            raise ValueError(f"N={self.N} is below the sum of counts {total}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "N", total if self.N == -1 else int(self.N))

    @property
    def num_actions(self) -> int:
        return self.q.size

    @property
    def pi_hat(self) -> np.ndarray:
        return (1.0 + self.n) / (self.num_actions + self.N)


def empirical_pi(n_a: int, N: int, A: int) -> float:
    """Smoothed visit share ``(1 + n_a) / (A + N)``."""
    if A < 1:
        raise InvalidActionSet("action set must be nonempty")
    if n_a < 0 or N < n_a:
        raise ValueError("need 0 <= n_a <= N")
    return (1.0 + n_a) / (A + N)


def guarded_log(N) -> float:
    """``log N`` with ``log N := 0`` for ``N <= 1``."""
    return math.log(N) if N > 1 else 0.0
