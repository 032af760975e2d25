"""Gap instances: satisfiable, but hard once the leaf order is random.

Run: python3 demos/04_gap_instances.py
"""

import numpy as np

from phylocsp.csp import is_regular, value_exact
from phylocsp.gap import GapSpec, build_gap, lkm_weight, order_experiment, satisfying_solution

spec = GapSpec("triplet", 2)
inst = build_gap(spec)
print(f"{len(inst.constraints)} constraints on {len(inst.variables)} leaves, total weight {inst.total_weight()},"
      f" regular: {is_regular(inst)}")
print("weight of cousins (1, 4, 7):", lkm_weight((1, 4, 7), spec), " of (1, 2, 3):", lkm_weight((1, 2, 3), spec))

sol = satisfying_solution(spec)
print("satisfying tree:", sol.variable_tree(), "value", value_exact(sol, inst))

exact = order_experiment(GapSpec("triplet", 1), 0, all_orders=True)
print("d=1, all 6 orders: mean best value", exact.mean)
res = order_experiment(spec, 100, np.random.default_rng(1))
print(f"d=2, 100 random orders: mean best value {res.mean:.3f} +- {res.stderr:.3f}")
