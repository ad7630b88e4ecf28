"""
Selection as regularized policy optimization
============================================

Each selector's score equals the marginal gain of a regularized objective
q.y - sum_i lambda_i D_i(prior, y) at the empirical visit distribution. Here we
check that numerically for PUCT-V, then solve the objective to see the policy
the search is implicitly tracking.
"""

import numpy as np

from vamcts import ChildStatsView, SelectorParams
from vamcts.rpo import frank_wolfe_gap, marginal_gain_check, rpo_objective, solve_rpo

view = ChildStatsView(q=[0.6, 0.4, 0.1], n=[12, 5, 1], sigma=[0.05, 0.3, 0.2],
                      prior=[0.5, 0.3, 0.2])
params = SelectorParams("PUCT_V")

for a in range(view.num_actions):
    score, gain = marginal_gain_check(params.rule, view, params, a)
    print(f"action {a}: score {score:.9f}  marginal gain {gain:.9f}  diff {abs(score - gain):.1e}")

obj = rpo_objective(params.rule, view, params)
y = solve_rpo(obj, tol=1e-10)
print("regularizer weights:", [round(r.weight, 4) for r in obj.regularizers])
print("empirical visits   :", np.round(view.pi_hat, 4))
print("regularized policy :", np.round(y.y, 4), " gap", f"{frank_wolfe_gap(obj, y.y):.1e}")
