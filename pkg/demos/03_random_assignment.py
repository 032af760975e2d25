"""Random trees and biased random trees.

A fair random tree satisfies a third of all triplets.  Payoffs that want
a lopsided tree (every split peels off a single item to the right) are
almost never satisfied by fair splits, but a biased caterpillar skeleton
gets close to 1.

Run: python3 demos/03_random_assignment.py
"""

import numpy as np

from phylocsp.random_assignment import BiasedMeasure, alpha_exact, alpha_mc, alpha_opt_search, mixture_threshold
from phylocsp.registry import builtin_payoff

rng = np.random.default_rng(0)
uniform = BiasedMeasure.uniform()
trip = builtin_payoff("triplet")
print("triplet, fair splits: exact", alpha_exact(uniform, trip), " MC", alpha_mc(uniform, trip, 100_000, rng))

f = builtin_payoff("split-right-6")
print("split-right-6, fair splits:", alpha_exact(uniform, f))
for delta in (0.2, 0.05, 0.01, 0.003):
    m = BiasedMeasure.caterpillar(delta)
    print(f"  caterpillar delta={delta:<5}  alpha={alpha_exact(m, f):.4f}  ({m.n_leaves} skeleton leaves)")

rep = alpha_opt_search(f, skeleton_depth_cap=2)
print("search:", rep.alpha, rep.grid)

# No single measure serves both the payoff and its mirror image.
left, right = builtin_payoff("split-left-4"), builtin_payoff("split-right-4")
print("mixture of split-left-4 and split-right-4:",
      round(mixture_threshold([left, right], [0.5, 0.5], skeleton_depth_cap=2).alpha, 4),
      "vs each alone", round(alpha_opt_search(right, skeleton_depth_cap=2).alpha, 4))
