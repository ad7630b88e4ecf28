"""Welford statistics and discounted path backup."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING, Sequence

from .core import NodeStats

if TYPE_CHECKING:
    from .engine import SearchTree


class StructuralError(ValueError):
    """A backup path does not exist in the tree."""


def welford_step(n: int, mu: float, var: float, v: float) -> tuple[int, float, float]:
    n_new = n + 1
    delta = v - mu
    mu_new = mu + delta / n_new
    delta2 = v - mu_new
    var_new = (n * var + delta * delta2) / n_new
    return n_new, mu_new, max(var_new, 0.0)


def welford_update(stats: NodeStats, v: float) -> NodeStats:
    """Fold one value into ``(n, mean, population variance)`` in O(1)."""
    return NodeStats(*welford_step(stats.n, stats.mu, stats.var, float(v)))


def normalize_value(v: float, seen_min: float, seen_max: float) -> float:
    if seen_min > seen_max:
        raise ValueError("seen_min must not exceed seen_max")
    if seen_max == seen_min:
        return 0.5
    return (v - seen_min) / (seen_max - seen_min)


class MinMaxStats:
    """Running bounds over every value backed up into a tree."""

    def __init__(self):
        self.minimum = float("inf")
        self.maximum = float("-inf")

    def update(self, v: float):
        if v < self.minimum:
            self.minimum = v
        if v > self.maximum:
            self.maximum = v

    @property
    def empty(self) -> bool:
        return self.minimum > self.maximum

    @property
    def span(self) -> float:
        return 0.0 if self.empty else self.maximum - self.minimum

    def normalize(self, v: float) -> float:
        if self.empty:
            return 0.5
        return normalize_value(v, self.minimum, self.maximum)


def backpropagate(tree: "SearchTree", path: Sequence[tuple[int, int, float]],
                  leaf_value: float, gamma: float) -> "SearchTree":
    """Back up ``leaf_value`` along ``path`` (root to leaf) in place.

    Each path entry is ``(node index, action slot, reward)``. Walking from the
    leaf, ``v <- r + gamma * v`` is folded into every traversed edge. An edge
    whose child is terminal uses discount 0, so only its reward is folded.
    """
    if not path:
        raise StructuralError("empty backup path")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    nodes = tree.nodes
    prev = None
    for node_id, slot, _ in path:
        if not 0 <= node_id < len(nodes):
            raise StructuralError(f"node {node_id} is not in the tree")
        node = nodes[node_id]
        if not 0 <= slot < len(node.actions):
            raise StructuralError(f"node {node_id} has no action slot {slot}")
        if prev is not None and nodes[prev[0]].children[prev[1]] != node_id:
            raise StructuralError("path is not a parent-child chain")
        prev = (node_id, slot)

    v = float(leaf_value)
    for node_id, slot, reward in reversed(path):
        node = nodes[node_id]
        child = node.children[slot]
        discount = 0.0 if child >= 0 and nodes[child].terminal else gamma
        v = reward + discount * v
        node.n[slot], node.mu[slot], var = welford_step(
            node.n[slot], node.mu[slot], node.var[slot], v)
        node.var[slot] = var
        node.sd[slot] = math.sqrt(var)
        node.visits += 1
        tree.value_bounds.update(v)
    return tree
