"""
Regret on a bandit with low-variance arms
=========================================

Arms near the edges of [0, 1] have small reward variance. A variance-aware
bonus shrinks faster on them than the Hoeffding bonus, so it stops paying
for needless exploration sooner.
"""

import math

import numpy as np

from vamcts.core import Rule, SelectorParams
from vamcts.envs import BanditSpec, regret_curves

spec = BanditSpec.bernoulli([0.9, 0.85, 0.1, 0.05])
checkpoints = [100, 300, 1000, 3000, 10_000]
seeds = range(100)

rules = {
    "UCT1": SelectorParams(Rule.UCT1, c=math.sqrt(2)),
    "UCT-V": SelectorParams(Rule.UCT_V),
}
print("T        " + "".join(f"{t:>9d}" for t in checkpoints))
for name, params in rules.items():
    curves = regret_curves(spec, params, checkpoints[-1], seeds, checkpoints)
    mean, lo, hi = curves.mean(0), curves.min(0), curves.max(0)
    print(f"{name:8s} " + "".join(f"{m:9.1f}" for m in mean))
    print(f"{'  min':8s} " + "".join(f"{m:9.1f}" for m in lo))
    print(f"{'  max':8s} " + "".join(f"{m:9.1f}" for m in hi))
    print(f"{'  R/T':8s} " + "".join(f"{m:9.4f}" for m in mean / np.array(checkpoints)))
