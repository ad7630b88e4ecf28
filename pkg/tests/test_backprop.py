import numpy as np
import pytest
from hypothesis import given, strategies as st

from vamcts.backprop import (MinMaxStats, StructuralError, backpropagate, normalize_value,
                             welford_step, welford_update)
from vamcts.core import NodeStats
from vamcts.engine import Node, SearchTree


def test_welford_examples():
    assert welford_update(NodeStats(), 5.0) == NodeStats(1, 5.0, 0.0)
    assert welford_update(NodeStats(2, 1.0, 0.0), 4.0) == NodeStats(3, 2.0, 2.0)
    s = NodeStats()
    for v in [1, 2, 3, 4]:
        s = welford_update(s, v)
    assert (s.n, s.mu, s.var) == (4, 2.5, 1.25)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=300))
def test_welford_matches_two_pass(stream):
    n, mu, var = 0, 0.0, 0.0
    for v in stream:
        n, mu, var = welford_step(n, mu, var, v)
    assert n == len(stream)
    assert mu == pytest.approx(np.mean(stream), rel=1e-9, abs=1e-9)
    assert var == pytest.approx(np.var(stream), rel=1e-8, abs=1e-7)
    assert var >= 0.0


def test_welford_constant_stream_has_zero_variance():
    n, mu, var = 0, 0.0, 0.0
    for _ in range(1000):
        n, mu, var = welford_step(n, mu, var, 0.1)
    assert var == pytest.approx(0.0, abs=1e-15)
    assert var >= 0.0


def test_normalize_value_examples():
    assert normalize_value(5, 0, 10) == 0.5
    assert normalize_value(0, 0, 0) == 0.5
    assert normalize_value(-1, -1, 3) == 0.0
    with pytest.raises(ValueError):
        normalize_value(0, 1, 0)


def test_min_max_stats():
    b = MinMaxStats()
    assert b.empty and b.normalize(3.0) == 0.5
    for v in (2.0, -1.0, 3.0):
        b.update(v)
    assert (b.minimum, b.maximum, b.span) == (-1.0, 3.0, 4.0)
    assert b.normalize(1.0) == 0.5


def chain(depth, terminal_leaf=False):
    """Root plus a single-action chain of ``depth`` edges."""
    tree = SearchTree()
    tree.add(Node(0, [0], [1.0]))
    for d in range(1, depth + 1):
        last = d == depth
        terminal = terminal_leaf and last
        tree.add(Node(d, [] if terminal else [0], None if terminal else [1.0],
                      d - 1, 0, terminal, d))
        tree.nodes[d - 1].children[0] = d
    return tree


def test_single_edge_backup():
    tree = chain(1)
    backpropagate(tree, [(0, 0, 1.0)], 0.0, 0.99)
    assert tree.nodes[0].edge_stats(0) == NodeStats(1, 1.0, 0.0)
    assert tree.nodes[0].visits == 1


def test_two_edge_discounting():
    tree = chain(2)
    backpropagate(tree, [(0, 0, 0.0), (1, 0, 1.0)], 0.0, 0.5)
    assert tree.nodes[1].edge_stats(0).mu == 1.0
    assert tree.nodes[0].edge_stats(0).mu == 0.5


def test_terminal_child_ignores_leaf_value():
    tree = chain(1, terminal_leaf=True)
    backpropagate(tree, [(0, 0, 0.25)], 7.0, 0.99)
    assert tree.nodes[0].mu[0] == 0.25


def test_backup_increments_each_visit_once():
    tree = chain(3)
    path = [(0, 0, 0.0), (1, 0, 0.0), (2, 0, 1.0)]
    for _ in range(5):
        backpropagate(tree, path, 0.3, 0.9)
    assert [nd.visits for nd in tree.nodes[:3]] == [5, 5, 5]
    assert tree.nodes[3].visits == 0


def test_backup_rejects_broken_paths():
    tree = chain(2)
    with pytest.raises(StructuralError):
        backpropagate(tree, [], 0.0, 0.9)
    with pytest.raises(StructuralError):
        backpropagate(tree, [(0, 0, 0.0), (2, 0, 0.0)], 0.0, 0.9)
    with pytest.raises(StructuralError):
        backpropagate(tree, [(9, 0, 0.0)], 0.0, 0.9)
    with pytest.raises(StructuralError):
        backpropagate(tree, [(0, 3, 0.0)], 0.0, 0.9)
    with pytest.raises(ValueError):
        backpropagate(tree, [(0, 0, 0.0)], 0.0, 1.5)
