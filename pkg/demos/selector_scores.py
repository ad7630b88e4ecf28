"""
Scoring one node under every tree policy
========================================

Two children: a well-visited one with a good mean and some spread, and an
untried one. Each rule trades the two off differently.
"""

from vamcts import ALL_RULES, ChildStatsView, SelectorParams, score_breakdown, select_action

view = ChildStatsView(q=[0.5, 0.2], n=[3, 0], sigma=[0.1, 0.0], prior=[0.7, 0.3])

print(f"{'rule':8s} {'action':>6s} {'q':>7s} {'bonus 1':>8s} {'bonus 2':>8s} {'total':>7s}")
for rule in ALL_RULES:
    params = SelectorParams(rule, c=1.0)
    for a in range(view.num_actions):
        b = score_breakdown(view, params, a)
        print(f"{rule.value:8s} {a:6d} {b.q_term:7.3f} {b.exploration_term_1:8.3f} "
              f"{b.exploration_term_2:8.3f} {b.total:7.3f}")
    print(f"{'':8s} -> picks action {select_action(view, params)}")

# with a uniform prior the principled prior rule collapses onto its prior-free parent
uniform = ChildStatsView(q=[0.5, 0.2], n=[3, 0], sigma=[0.1, 0.0])
a = select_action(uniform, SelectorParams("UCT_V_P"))
# two actions: c1 / sqrt(2) = 1 and c2 / 2 = 1.5
b = select_action(uniform, SelectorParams("UCT_V", c1=1.0, c2=1.5))
print("UCT-V-P vs rescaled UCT-V under a uniform prior:", a, b)
