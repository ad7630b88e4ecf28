"""Closed-form tree-policy scores and argmax selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ChildStatsView, InvalidActionSet, Rule, SelectorParams, guarded_log


@dataclass(frozen=True)
class SelectionScoreBreakdown:
    q_term: float
    exploration_term_1: float
    exploration_term_2: float
    total: float


def exploration_terms(rule: Rule, n, sigma, prior, N, params: SelectorParams):
    """Return the two exploration bonus arrays of ``rule``.

    ``n``, ``sigma`` and ``prior`` are float arrays over the actions, ``N`` the
    parent's total count. Single-bonus rules return a zero second term.
    """
    log_n = guarded_log(N)
    inv = 1.0 / (1.0 + n)
    if rule is Rule.UCT1:
        e1 = params.c * np.sqrt(log_n * inv)
        return e1, np.zeros_like(e1)
    if rule is Rule.PUCT:
        e1 = (params.c * math.sqrt(N)) * prior * inv
        return e1, np.zeros_like(e1)
    if rule is Rule.UCT_P:
        e1 = params.c * np.sqrt(prior * log_n * inv)
        return e1, np.zeros_like(e1)
    if rule is Rule.UCT_V:
        return (params.c1 * sigma * np.sqrt(log_n * inv),
                (params.c2 * log_n) * inv)
    if rule is Rule.UCT_V_H:
        return (params.c1 * sigma * math.sqrt(N) * inv,
                (params.c2 * log_n) * inv)
    if rule is Rule.UCT_V_P:
        return (params.c1 * sigma * np.sqrt(prior * log_n * inv),
                params.c2 * prior * log_n * inv)
    if rule is Rule.PUCT_V:
        return (params.c1 * prior * sigma * math.sqrt(N) * inv,
                params.c2 * prior * log_n * inv)
    raise ValueError(f"unsupported rule {rule!r}")


def exploration_bonus(rule: Rule, n, sigma, prior, N, params: SelectorParams):
    """Summed exploration bonus; same values as ``sum(exploration_terms(...))``
    with fewer temporaries, for the search hot path."""
    log_n = guarded_log(N)
    if rule is Rule.PUCT:
        return (params.c * math.sqrt(N)) * prior / (1.0 + n)
    if rule is Rule.PUCT_V:
        return (params.c1 * math.sqrt(N) * sigma + params.c2 * log_n) * prior / (1.0 + n)
    if rule is Rule.UCT_V_P:
        t = prior * log_n / (1.0 + n)
        return params.c1 * sigma * np.sqrt(t) + params.c2 * t
    if rule is Rule.UCT1:
        return params.c * np.sqrt(log_n / (1.0 + n))
    if rule is Rule.UCT_P:
        return params.c * np.sqrt(prior * log_n / (1.0 + n))
    if rule is Rule.UCT_V:
        t = log_n / (1.0 + n)
        return params.c1 * sigma * np.sqrt(t) + params.c2 * t
    if rule is Rule.UCT_V_H:
        return (params.c1 * math.sqrt(N) * sigma + params.c2 * log_n) / (1.0 + n)
    raise ValueError(f"unsupported rule {rule!r}")


def make_argmax(rule: Rule, params: SelectorParams):
    """Scalar-loop ``argmax_a score_a`` over plain lists, for small action sets.

    The returned function takes ``(q, n, sd, prior, N, sigma_scale)`` where the
    standard deviation fed to the rule is ``sd * sigma_scale``, and returns the
    lowest index attaining the maximal score. Each rule gets one fused loop;
    ``.bonuses`` exposes the per-action bonus list for testing.
    """
    c, c1, c2 = params.c, params.c1, params.c2
    sqrt, log = math.sqrt, math.log

    if rule is Rule.UCT1:
        def bonuses(n, sd, prior, N, scale):
            k = c * sqrt(log(N)) if N > 1 else 0.0
            return [k / sqrt(1.0 + ni) for ni in n]

        def argmax(q, n, sd, prior, N, scale=1.0):
            k = c * sqrt(log(N)) if N > 1 else 0.0
            best_i, best, i = 0, -math.inf, 0
            for qi, ni in zip(q, n):
                s = qi + k / sqrt(1.0 + ni)
                if s > best:
                    best_i, best = i, s
                i += 1
            return best_i
    elif rule is Rule.PUCT:
        def bonuses(n, sd, prior, N, scale):
            k = c * sqrt(N)
            return [k * pi / (1.0 + ni) for ni, pi in zip(n, prior)]

        def argmax(q, n, sd, prior, N, scale=1.0):
            k = c * sqrt(N)
            best_i, best, i = 0, -math.inf, 0
            for qi, ni, pi in zip(q, n, prior):
                s = qi + k * pi / (1.0 + ni)
                if s > best:
                    best_i, best = i, s
                i += 1
            return best_i
    elif rule is Rule.UCT_P:
        def bonuses(n, sd, prior, N, scale):
            lg = log(N) if N > 1 else 0.0
            return [c * sqrt(pi * lg / (1.0 + ni)) for ni, pi in zip(n, prior)]

        def argmax(q, n, sd, prior, N, scale=1.0):
            lg = log(N) if N > 1 else 0.0
            best_i, best, i = 0, -math.inf, 0
            for qi, ni, pi in zip(q, n, prior):
                s = qi + c * sqrt(pi * lg / (1.0 + ni))
                if s > best:
                    best_i, best = i, s
                i += 1
            return best_i
    elif rule is Rule.UCT_V:
        def bonuses(n, sd, prior, N, scale):
            lg = log(N) if N > 1 else 0.0
            k1 = c1 * scale
            out = []
            for ni, si in zip(n, sd):
                t = lg / (1.0 + ni)
                out.append(k1 * si * sqrt(t) + c2 * t)
            return out

        def argmax(q, n, sd, prior, N, scale=1.0):
            lg = log(N) if N > 1 else 0.0
            k1 = c1 * scale
            best_i, best, i = 0, -math.inf, 0
            for qi, ni, si in zip(q, n, sd):
                t = lg / (1.0 + ni)
                s = qi + k1 * si * sqrt(t) + c2 * t
                if s > best:
                    best_i, best = i, s
                i += 1
            return best_i
    elif rule is Rule.UCT_V_H:
        def bonuses(n, sd, prior, N, scale):
            k1, k2 = c1 * sqrt(N) * scale, c2 * log(N) if N > 1 else 0.0
            return [(k1 * si + k2) / (1.0 + ni) for ni, si in zip(n, sd)]

        def argmax(q, n, sd, prior, N, scale=1.0):
            k1, k2 = c1 * sqrt(N) * scale, c2 * log(N) if N > 1 else 0.0
            best_i, best, i = 0, -math.inf, 0
            for qi, ni, si in zip(q, n, sd):
                s = qi + (k1 * si + k2) / (1.0 + ni)
                if s > best:
                    best_i, best = i, s
                i += 1
            return best_i
    elif rule is Rule.UCT_V_P:
        def bonuses(n, sd, prior, N, scale):
            lg = log(N) if N > 1 else 0.0
            k1 = c1 * scale
            out = []
            for ni, si, pi in zip(n, sd, prior):
                t = pi * lg / (1.0 + ni)
                out.append(k1 * si * sqrt(t) + c2 * t)
            return out

        def argmax(q, n, sd, prior, N, scale=1.0):
            lg = log(N) if N > 1 else 0.0
            k1 = c1 * scale
            best_i, best, i = 0, -math.inf, 0
            for qi, ni, si, pi in zip(q, n, sd, prior):
                t = pi * lg / (1.0 + ni)
                s = qi + k1 * si * sqrt(t) + c2 * t
                if s > best:
                    best_i, best = i, s
                i += 1
            return best_i
    elif rule is Rule.PUCT_V:
        def bonuses(n, sd, prior, N, scale):
            k1, k2 = c1 * sqrt(N) * scale, c2 * log(N) if N > 1 else 0.0
            return [(k1 * si + k2) * pi / (1.0 + ni) for ni, si, pi in zip(n, sd, prior)]

        def argmax(q, n, sd, prior, N, scale=1.0):
            k1, k2 = c1 * sqrt(N) * scale, c2 * log(N) if N > 1 else 0.0
            best_i, best, i = 0, -math.inf, 0
            for qi, ni, si, pi in zip(q, n, sd, prior):
                s = qi + (k1 * si + k2) * pi / (1.0 + ni)
                if s > best:
                    best_i, best = i, s
                i += 1
            return best_i
    else:
        raise ValueError(f"unsupported rule {rule!r}")

    argmax.bonuses = bonuses
    return argmax


def scores(view: ChildStatsView, params: SelectorParams, rule: Rule | None = None) -> np.ndarray:
    rule = params.rule if rule is None else rule
    e1, e2 = exploration_terms(rule, view.n, view.sigma, view.prior.probs, view.N, params)
    return view.q + e1 + e2


def score_breakdown(view: ChildStatsView, params: SelectorParams, a: int,
                    rule: Rule | None = None) -> SelectionScoreBreakdown:
    rule = params.rule if rule is None else rule
    e1, e2 = exploration_terms(rule, view.n, view.sigma, view.prior.probs, view.N, params)
    q = float(view.q[a])
    return SelectionScoreBreakdown(q, float(e1[a]), float(e2[a]), q + float(e1[a]) + float(e2[a]))


def _scorer(rule: Rule):
    def score(view: ChildStatsView, params: SelectorParams, a: int) -> float:
        return score_breakdown(view, params, a, rule).total

    score.__name__ = f"score_{rule.value.lower()}"
    score.__doc__ = f"Score of action ``a`` under {rule.value}."
    return score


score_uct1 = _scorer(Rule.UCT1)
score_puct = _scorer(Rule.PUCT)
score_uct_p = _scorer(Rule.UCT_P)
score_uct_v = _scorer(Rule.UCT_V)
score_uct_v_h = _scorer(Rule.UCT_V_H)
score_uct_v_p = _scorer(Rule.UCT_V_P)
score_puct_v = _scorer(Rule.PUCT_V)

SCORERS = {
    Rule.UCT1: score_uct1,
    Rule.PUCT: score_puct,
    Rule.UCT_P: score_uct_p,
    Rule.UCT_V: score_uct_v,
    Rule.UCT_V_H: score_uct_v_h,
    Rule.UCT_V_P: score_uct_v_p,
    Rule.PUCT_V: score_puct_v,
}


def argmax_lowest(values) -> int:
    values = np.asarray(values)
    if values.size == 0:
        raise InvalidActionSet("cannot select from an empty action set")
    # np.argmax returns the first maximal index
    return int(np.argmax(values))


def select_action(view: ChildStatsView, params: SelectorParams) -> int:
    return argmax_lowest(scores(view, params))
