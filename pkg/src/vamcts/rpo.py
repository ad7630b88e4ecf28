"""Regularized policy optimization view of the tree policies.

Every selector score decomposes as ``q_a`` plus weighted shape functions of the
smoothed visit share. Each shape function ``h`` is the negative derivative of a
convex generator ``f``, and lifting ``f`` with a prior gives a Csiszar
divergence ``D_f(prior, y) = sum_a prior_a * f(y_a / prior_a)``. This module
holds those pieces, a simplex solver for the resulting objectives, and numeric
checks that tie the objectives back to the closed-form scores.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    PROB_FLOOR,
    ChildStatsView,
    PriorDistribution,
    Rule,
    SelectorParams,
    empirical_pi,
    floor_probs,
    guarded_log,
)
from .selectors import exploration_terms, scores


class Divergence(str, enum.Enum):
    HELLINGER = "HELLINGER"
    KL = "KL"
    VARIANCE_WEIGHTED_HELLINGER = "VARIANCE_WEIGHTED_HELLINGER"
    VARIANCE_WEIGHTED_KL = "VARIANCE_WEIGHTED_KL"

    @property
    def weighted(self) -> bool:
        return self in (Divergence.VARIANCE_WEIGHTED_HELLINGER, Divergence.VARIANCE_WEIGHTED_KL)

    @property
    def hellinger(self) -> bool:
        return self in (Divergence.HELLINGER, Divergence.VARIANCE_WEIGHTED_HELLINGER)


def generator(kind: Divergence, r, sigma=1.0):
    """Convex generator: ``2 sigma (1 - sqrt r)`` or ``-sigma log r``."""
    r = np.asarray(r, dtype=np.float64)
    if kind.hellinger:
        return 2.0 * sigma * (1.0 - np.sqrt(r))
    return -sigma * np.log(r)


def shape(kind: Divergence, r, sigma=1.0):
    """Shape function ``h = -f'``: ``sigma / sqrt r`` or ``sigma / r``."""
    r = np.asarray(r, dtype=np.float64)
    if kind.hellinger:
        return sigma / np.sqrt(r)
    return sigma / r


def _weights(prior, size: int) -> np.ndarray:
    if prior is None:
        # separable, prior-free regularizer sum_a f(y_a)
        return np.ones(size)
    if isinstance(prior, PriorDistribution):
        return prior.probs
    return np.asarray(prior, dtype=np.float64)


def divergence(kind: Divergence, prior, y, sigma=None) -> float:
    """Csiszar divergence of ``y`` from ``prior``.

    ``prior=None`` gives the separable regularizer ``sum_a f(y_a)`` used by the
    prior-free rules. Variance-weighted kinds require ``sigma``.
    """
    y = np.asarray(y, dtype=np.float64)
    w = _weights(prior, y.size)
    if w.shape != y.shape:
        raise ValueError(f"length mismatch: prior {w.shape} vs y {y.shape}")
    if kind.weighted:
        if sigma is None:
            raise ValueError(f"{kind.value} needs sigma")
        s = np.asarray(sigma, dtype=np.float64)
        if s.shape != y.shape:
            raise ValueError(f"length mismatch: sigma {s.shape} vs y {y.shape}")
    else:
        s = 1.0
    return float(np.sum(w * generator(kind, y / w, s)))


def divergence_grad(kind: Divergence, prior, y, sigma=None) -> np.ndarray:
    """Partial derivatives ``dD/dy_a = f'(y_a / prior_a)``."""
    y = np.asarray(y, dtype=np.float64)
    w = _weights(prior, y.size)
    s = np.asarray(sigma, dtype=np.float64) if kind.weighted else 1.0
    return -shape(kind, y / w, s)


@dataclass(frozen=True)
class Regularizer:
    weight: float
    kind: Divergence
    prior: PriorDistribution | None = None
    sigma: np.ndarray | None = None

    def value(self, y) -> float:
        return self.weight * divergence(self.kind, self.prior, y, self.sigma)

    def grad(self, y) -> np.ndarray:
        return self.weight * divergence_grad(self.kind, self.prior, y, self.sigma)


@dataclass(frozen=True, eq=False)
class RpoObjective:
    q: np.ndarray
    regularizers: Sequence[Regularizer] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=np.float64))
        regs = tuple(self.regularizers)
        if len(regs) > 2:
            raise ValueError("at most two regularizers")
        for reg in regs:
            if reg.weight < 0:
                raise ValueError("regularizer weights must be nonnegative")
        object.__setattr__(self, "regularizers", regs)

    def gradient(self, y) -> np.ndarray:
        g = self.q.copy()
        for reg in self.regularizers:
            g -= reg.grad(y)
        return g


@dataclass(frozen=True, eq=False)
class SimplexPoint:
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", floor_probs(self.y))


def objective_value(obj: RpoObjective, y) -> float:
    y = y.y if isinstance(y, SimplexPoint) else np.asarray(y, dtype=np.float64)
    return float(obj.q @ y) - sum(reg.value(y) for reg in obj.regularizers)


class RpoSolverError(RuntimeError):
    def __init__(self, message: str, best: SimplexPoint):
        super().__init__(message)
        self.best = best


def frank_wolfe_gap(obj: RpoObjective, y: np.ndarray) -> float:
    """``max_a g_a - <g, y>``; bounds the suboptimality of a concave objective."""
    g = obj.gradient(y)
    return float(np.max(g) - g @ y)


def solve_rpo(obj: RpoObjective, tol: float = 1e-9, max_iter: int = 100_000,
              step: float = 1.0, start=None) -> SimplexPoint:
    """Maximize ``q.y - sum lambda_i D_i(prior, y)`` over the simplex.

    Exponentiated-gradient ascent from ``start`` (uniform by default). A step
    is accepted only if the objective is still nondecreasing at the new point
    along the segment just travelled, which by concavity means the objective
    did not go down; otherwise it is halved. Accepted steps grow by 1.5.
    Stops once the Frank-Wolfe gap is at most ``tol``.
    """
    k = obj.q.size
    y = floor_probs(np.full(k, 1.0 / k) if start is None else start)
    g = obj.gradient(y)
    eta = step
    for _ in range(max_iter):
        gap = float(np.max(g) - g @ y)
        if gap <= tol:
            return SimplexPoint(y)
        while True:
            z = np.log(y) + eta * (g - g.max())
            cand = np.exp(z - z.max())
            cand = floor_probs(cand / cand.sum())
            g_cand = obj.gradient(cand)
            # centering removes rounding from the constant mode of g
            if (g_cand - g_cand @ cand) @ (cand - y) >= 0.0:
                break
            eta *= 0.5
            if eta < 1e-300:
                raise RpoSolverError("step size underflow", SimplexPoint(y))
        y, g = cand, g_cand
        eta *= 1.5
    raise RpoSolverError(f"no convergence to tol={tol}", SimplexPoint(y))


# --- rule <-> objective correspondence ------------------------------------

def lambda_weights(rule: Rule, N: int, A: int, params: SelectorParams) -> tuple[float, float | None]:
    """Regularizer weights of ``rule`` at a node with ``N`` visits and ``A`` actions."""
    if A < 1:
        raise ValueError("action set must be nonempty")
    rule = Rule(rule)
    log_n = guarded_log(N)
    denom = A + N
    if rule in (Rule.UCT1, Rule.UCT_P):
        return params.c * math.sqrt(log_n / denom), None
    if rule is Rule.PUCT:
        return params.c * math.sqrt(N) / denom, None
    bias = params.c2 * log_n / denom
    if rule in (Rule.UCT_V, Rule.UCT_V_P):
        return params.c1 * math.sqrt(log_n) / math.sqrt(denom), bias
    return params.c1 * math.sqrt(N) / denom, bias


# divergence kinds per regularizer slot
RULE_DIVERGENCES = {
    Rule.UCT1: (Divergence.HELLINGER,),
    Rule.UCT_P: (Divergence.HELLINGER,),
    Rule.PUCT: (Divergence.KL,),
    Rule.UCT_V: (Divergence.VARIANCE_WEIGHTED_HELLINGER, Divergence.KL),
    Rule.UCT_V_P: (Divergence.VARIANCE_WEIGHTED_HELLINGER, Divergence.KL),
    Rule.UCT_V_H: (Divergence.VARIANCE_WEIGHTED_KL, Divergence.KL),
    Rule.PUCT_V: (Divergence.VARIANCE_WEIGHTED_KL, Divergence.KL),
}


@dataclass(frozen=True)
class FactorizedBonus:
    """One ``phi(N) * h(ratio, sigma)`` term of an exploration bonus."""

    phi: Callable[[int], float]
    h: Callable[..., float]
    label: str
    kind: Divergence


def factorize(rule: Rule, A: int, params: SelectorParams) -> list[FactorizedBonus]:
    rule = Rule(rule)
    terms = []
    for slot, kind in enumerate(RULE_DIVERGENCES[rule]):
        def phi(N, slot=slot):
            return lambda_weights(rule, N, A, params)[slot]

        def h(r, sigma=1.0, kind=kind):
            return float(shape(kind, r, sigma if kind.weighted else 1.0))

        terms.append(FactorizedBonus(phi, h, f"{rule.value}[{slot}]", kind))
    return terms


def factorize_check(rule: Rule, N: int, n_a: int, A: int, sigma_a: float,
                    params: SelectorParams, prior_a: float | None = None) -> tuple[float, float]:
    """Bonus from the selector formula and from its factorized form.

    Prior-based rules evaluate ``h`` at ``pi_hat / prior_a`` (``prior_a``
    defaults to ``1/A``); prior-free rules at ``pi_hat``.
    """
    rule = Rule(rule)
    prior_a = 1.0 / A if prior_a is None else prior_a
    e1, e2 = exploration_terms(rule, np.array([float(n_a)]), np.array([float(sigma_a)]),
                               np.array([prior_a]), N, params)
    direct = float(e1[0] + e2[0])
    pi_hat = empirical_pi(n_a, N, A)
    ratio = pi_hat / prior_a if rule.uses_prior else pi_hat
    factored = sum(t.phi(N) * t.h(ratio, sigma_a) for t in factorize(rule, A, params))
    return direct, float(factored)


def rpo_objective(rule: Rule, view: ChildStatsView, params: SelectorParams) -> RpoObjective:
    """The regularized objective whose marginal gain reproduces ``rule``."""
    rule = Rule(rule)
    weights = lambda_weights(rule, view.N, view.num_actions, params)
    prior = view.prior if rule.uses_prior else None
    regs = []
    for weight, kind in zip(weights, RULE_DIVERGENCES[rule]):
        regs.append(Regularizer(weight, kind, prior, view.sigma if kind.weighted else None))
    return RpoObjective(view.q, regs)


def regularizer_penalty(obj: RpoObjective, y) -> float:
    return sum(reg.value(y) for reg in obj.regularizers)


def marginal_gain_check(rule: Rule, view: ChildStatsView, params: SelectorParams, a: int,
                        eps: float = 1e-6) -> tuple[float, float]:
    """Closed-form score of ``a`` and ``q_a - d(penalty)/dy_a`` at ``y = pi_hat``.

    The partial is a central finite difference that moves ``y_a`` alone.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rule = Rule(rule)
    obj = rpo_objective(rule, view, params)
    y = view.pi_hat
    if eps >= y[a]:
        raise ValueError("eps must be smaller than pi_hat[a]")
    up = y.copy()
    up[a] += eps
    down = y.copy()
    down[a] -= eps
    partial = (regularizer_penalty(obj, up) - regularizer_penalty(obj, down)) / (2.0 * eps)
    return float(scores(view, params, rule)[a]), float(view.q[a] - partial)


# --- invariant suite --------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_view(rng: np.random.Generator, max_actions: int = 8, max_visits: int = 50,
                sigma_max: float = 0.5) -> ChildStatsView:
    A = int(rng.integers(1, max_actions + 1))
    n = rng.integers(0, max_visits + 1, size=A)
    q = rng.uniform(-1.0, 1.0, size=A)
    sigma = rng.uniform(0.0, sigma_max, size=A)
    prior = rng.dirichlet(np.ones(A))
    return ChildStatsView(q, n, sigma, PriorDistribution(prior))


def check_factorization(rng: np.random.Generator, trials: int = 1000, rtol: float = 1e-12) -> CheckResult:
    worst = 0.0
    for rule in Rule:
        for _ in range(trials):
            N = int(rng.integers(0, 10**6 + 1))
            n_a = int(rng.integers(0, N + 1))
            A = int(rng.integers(1, 65))
            sigma = float(rng.uniform(0.0, 5.0))
            params = SelectorParams(rule, c=float(rng.uniform(0.1, 3.0)),
                                    c1=float(rng.uniform(0.1, 3.0)), c2=float(rng.uniform(0.1, 5.0)))
            prior_a = float(rng.uniform(1e-3, 1.0))
            direct, factored = factorize_check(rule, N, n_a, A, sigma, params, prior_a)
            err = abs(direct - factored) / max(1.0, abs(direct))
            worst = max(worst, err)
    return CheckResult("factorization", worst <= rtol, f"worst relative error {worst:.3e}")


def check_generator_derivatives(rng: np.random.Generator, trials: int = 1000,
                                rtol: float = 1e-6) -> CheckResult:
    worst = 0.0
    for kind in Divergence:
        r = np.exp(rng.uniform(math.log(0.01), math.log(100.0), size=trials))
        sigma = rng.uniform(0.1, 5.0, size=trials) if kind.weighted else 1.0
        step = 1e-6 * r
        fd = (generator(kind, r + step, sigma) - generator(kind, r - step, sigma)) / (2 * step)
        expected = -shape(kind, r, sigma)
        worst = max(worst, float(np.max(np.abs(fd - expected) / np.abs(expected))))
    return CheckResult("generator derivatives", worst <= rtol, f"worst relative error {worst:.3e}")


def check_divergence_nonnegative(rng: np.random.Generator, trials: int = 1000) -> CheckResult:
    worst = 0.0
    at_prior = 0.0
    for _ in range(trials):
        A = int(rng.integers(1, 9))
        prior = PriorDistribution(rng.dirichlet(np.ones(A)))
        y = floor_probs(rng.dirichlet(np.ones(A)))
        for kind in (Divergence.HELLINGER, Divergence.KL):
            worst = min(worst, divergence(kind, prior, y))
            at_prior = max(at_prior, abs(divergence(kind, prior, prior.probs)))
    ok = worst >= -1e-12 and at_prior <= 1e-12
    return CheckResult("divergence nonnegativity", ok, f"min {worst:.3e}, |D(p,p)| max {at_prior:.3e}")


def check_marginal_gain(rng: np.random.Generator, views: int = 200, eps: float = 1e-6,
                        atol: float = 1e-6) -> CheckResult:
    worst = 0.0
    for rule in Rule:
        params = SelectorParams(rule, c=1.25)
        for _ in range(views):
            view = random_view(rng)
            for a in range(view.num_actions):
                score, marginal = marginal_gain_check(rule, view, params, a, eps)
                worst = max(worst, abs(score - marginal))
    return CheckResult("marginal gain", worst <= atol, f"worst absolute error {worst:.3e}")


def check_concavity(rng: np.random.Generator, trials: int = 300) -> CheckResult:
    worst = 0.0
    for _ in range(trials):
        rule = Rule(rng.choice([r.value for r in Rule]))
        view = random_view(rng)
        obj = rpo_objective(rule, view, SelectorParams(rule))
        y0 = floor_probs(rng.dirichlet(np.ones(view.num_actions)))
        y1 = floor_probs(rng.dirichlet(np.ones(view.num_actions)))
        mid = objective_value(obj, 0.5 * (y0 + y1))
        avg = 0.5 * (objective_value(obj, y0) + objective_value(obj, y1))
        worst = min(worst, mid - avg)
    return CheckResult("objective concavity", worst >= -1e-9, f"min midpoint excess {worst:.3e}")


def check_solver(rng: np.random.Generator, trials: int = 50, tol: float = 1e-8) -> CheckResult:
    worst = 0.0
    for _ in range(trials):
        rule = Rule(rng.choice([r.value for r in Rule]))
        view = random_view(rng)
        obj = rpo_objective(rule, view, SelectorParams(rule))
        y = solve_rpo(obj, tol=tol).y
        worst = max(worst, frank_wolfe_gap(obj, y))
    return CheckResult("solver optimality", worst <= tol, f"worst gap {worst:.3e}")


def run_invariant_suite(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        check_factorization(rng),
        check_generator_derivatives(rng),
        check_divergence_nonnegative(rng),
        check_marginal_gain(rng),
        check_concavity(rng),
        check_solver(rng),
    ]


__all__ = [
    "PROB_FLOOR",
    "CheckResult",
    "Divergence",
    "FactorizedBonus",
    "Regularizer",
    "RpoObjective",
    "RpoSolverError",
    "SimplexPoint",
    "divergence",
    "divergence_grad",
    "factorize",
    "factorize_check",
    "frank_wolfe_gap",
    "generator",
    "lambda_weights",
    "marginal_gain_check",
    "objective_value",
    "rpo_objective",
    "run_invariant_suite",
    "shape",
    "solve_rpo",
]
