"""Four-stage MCTS over an abstract environment model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Protocol, Sequence

import numpy as np

from .backprop import MinMaxStats, backpropagate
from .core import PROB_FLOOR, NodeStats, SelectorParams, floor_probs
from .selectors import argmax_lowest, make_argmax


class EnvironmentModel(Protocol):
    num_actions: int
    reward_range: tuple[float, float]

    def initial_state(self, rng: np.random.Generator) -> Any: ...

    def step(self, state, action: int, rng: np.random.Generator) -> tuple[Any, float, bool]: ...

    def legal_actions(self, state) -> Sequence[int]: ...

    def is_terminal(self, state) -> bool: ...

    def evaluate(self, state) -> tuple[float, np.ndarray]: ...

    def state_key(self, state) -> Hashable: ...


Evaluator = Callable[[Any], "tuple[float, np.ndarray]"]


class VarianceSource(str, enum.Enum):
    RAW = "RAW"
    NORMALIZED = "NORMALIZED"


class TerminalRootError(ValueError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    num_simulations: int = 64
    gamma: float = 0.99
    selector: SelectorParams = field(default_factory=SelectorParams)
    normalize_values: bool = True
    variance_source: VarianceSource = VarianceSource.NORMALIZED

    def __post_init__(self):
        if self.num_simulations < 1:
            raise ValueError("num_simulations must be at least 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        object.__setattr__(self, "variance_source", VarianceSource(self.variance_source))


class Node:
    __slots__ = ("state", "actions", "prior", "n", "mu", "var", "sd", "children", "parent",
                 "parent_slot", "terminal", "expanded", "visits", "depth")

    def __init__(self, state, actions, prior, parent=-1, parent_slot=-1, terminal=False, depth=0):
        k = len(actions)
        self.state = state
        self.actions = [int(a) for a in actions]
        self.prior = None if prior is None else [float(p) for p in prior]
        # per-edge statistics as plain lists: scalar access is the hot path
        self.n = [0] * k
        self.mu = [0.0] * k
        self.var = [0.0] * k
        self.sd = [0.0] * k  # sqrt(var), cached for selection
        self.children = [-1] * k
        self.parent = parent
        self.parent_slot = parent_slot
        self.terminal = terminal
        self.expanded = prior is not None
        self.visits = 0
        self.depth = depth

    def edge_stats(self, slot: int) -> NodeStats:
        return NodeStats(int(self.n[slot]), float(self.mu[slot]), float(self.var[slot]))


class SearchTree:
    """Arena of nodes; children are referenced by index, root is node 0."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.value_bounds = MinMaxStats()
        self.root = 0

    def add(self, node: Node) -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def __len__(self) -> int:
        return len(self.nodes)

    def check_invariants(self):
        """Raise AssertionError if links or visit counts are inconsistent."""
        seen_parent = {}
        for idx, node in enumerate(self.nodes):
            assert node.visits == sum(node.n), f"node {idx}: N != sum of edge counts"
            assert node.sd == [math.sqrt(v) for v in node.var], f"node {idx}: stale sd cache"
            for slot, child in enumerate(node.children):
                if child < 0:
                    assert node.n[slot] == 0, f"node {idx}: visited edge without child"
                    continue
                assert child > idx, "children must be allocated after parents"
                assert child not in seen_parent, f"node {child} has two parents"
                seen_parent[child] = idx
                c = self.nodes[child]
                assert (c.parent, c.parent_slot) == (idx, slot)
                # a child's own visits never exceed the edge count leading to it
                assert c.visits <= node.n[slot]
        for idx, node in enumerate(self.nodes[1:], start=1):
            assert idx in seen_parent, f"node {idx} is orphaned"

    def root_visits(self) -> np.ndarray:
        return np.array(self.nodes[self.root].n, dtype=np.float64)


def _restricted_prior(prior, actions) -> np.ndarray:
    p = np.asarray(prior, dtype=np.float64)[actions]
    if p.min() >= PROB_FLOOR and abs(p.sum() - 1.0) <= 1e-12:
        return p
    return floor_probs(p)


class _Selector:
    """Per-search cache of the selection rule and value transform."""

    def __init__(self, config: SearchConfig, bounds: MinMaxStats):
        self.argmax = make_argmax(config.selector.rule, config.selector)
        self.normalize = config.normalize_values
        self.norm_var = config.normalize_values and config.variance_source is VarianceSource.NORMALIZED
        self.bounds = bounds

    def __call__(self, node: Node) -> int:
        n = node.n
        span = 1.0
        if not self.normalize:
            q = node.mu
        elif self.bounds.maximum > self.bounds.minimum:
            lo = self.bounds.minimum
            span = self.bounds.maximum - lo
            # unvisited edges keep q = 0
            q = [(m - lo) / span if c else 0.0 for m, c in zip(node.mu, n)]
        else:
            # degenerate range: every backed-up value normalizes to 0.5
            q = [0.5 if c else 0.0 for c in n]
        scale = 1.0 / span if self.norm_var else 1.0
        return self.argmax(q, n, node.sd, node.prior, node.visits, scale)


def run_search(env: EnvironmentModel, root_state, config: SearchConfig, rng_seed,
               evaluator: Evaluator | None = None) -> tuple[SearchTree, np.ndarray]:
    """Run ``config.num_simulations`` simulations from ``root_state``.

    Transitions are re-sampled from ``env.step`` on every traversal, so
    stochastic rewards reach the edge statistics; a node's state and prior are
    fixed when it is first expanded. Returns the tree and the root visit
    distribution over ``env.num_actions`` actions.
    """
    if env.is_terminal(root_state):
        raise TerminalRootError("cannot search from a terminal state")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    evaluate = env.evaluate if evaluator is None else evaluator
    tree = SearchTree()
    actions = list(env.legal_actions(root_state))
    _, prior = evaluate(root_state)
    tree.add(Node(root_state, actions, _restricted_prior(prior, actions)))
    select = _Selector(config, tree.value_bounds)
    nodes = tree.nodes

    for _ in range(config.num_simulations):
        node_id = tree.root
        state = root_state
        path = []
        while True:
            node = nodes[node_id]
            slot = select(node)
            state, reward, terminal = env.step(state, node.actions[slot], rng)
            path.append((node_id, slot, reward))
            child_id = node.children[slot]
            if terminal:
                if child_id < 0:
                    child_id = tree.add(Node(state, [], None, node_id, slot, True, node.depth + 1))
                    node.children[slot] = child_id
                leaf_value = 0.0
                break
            if child_id < 0 or not nodes[child_id].expanded:
                value, prior = evaluate(state)
                child_actions = list(env.legal_actions(state))
                child_prior = _restricted_prior(prior, child_actions)
                if child_id < 0:
                    child_id = tree.add(Node(state, child_actions, child_prior,
                                             node_id, slot, False, node.depth + 1))
                    node.children[slot] = child_id
                else:
                    # edge previously ended the episode; this outcome did not
                    old = nodes[child_id]
                    nodes[child_id] = Node(state, child_actions, child_prior,
                                           old.parent, old.parent_slot, False, old.depth)
                leaf_value = float(value)
                break
            node_id = child_id
        backpropagate(tree, path, leaf_value, config.gamma)

    root = nodes[tree.root]
    visits = np.zeros(env.num_actions)
    visits[root.actions] = root.n
    return tree, visits / visits.sum()


def act(visits, temperature: float = 0.0, rng: np.random.Generator | None = None) -> int:
    """Pick a root action from visit counts or a visit distribution."""
    visits = np.asarray(visits, dtype=np.float64)
    if temperature == 0:
        return argmax_lowest(visits)
    if temperature < 0:
        raise ValueError("temperature must be nonnegative")
    if rng is None:
        raise ValueError("sampling needs an explicit random stream")
    logits = np.where(visits > 0, np.log(np.where(visits > 0, visits, 1.0)) / temperature, -np.inf)
    p = np.exp(logits - logits.max())
    return int(rng.choice(visits.size, p=p / p.sum()))
