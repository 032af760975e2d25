"""Instances, exact optima and the best tree for a fixed leaf order.

Run: python3 demos/02_instances_and_solvers.py
"""

import numpy as np

from phylocsp.csp import Instance, brute_force_opt, gaifman, opt_given_order, read_instance, write_instance

text = """\
vars a b c d e
1/4 triplet a b c
1/4 triplet c d e
1/4 triplet a e b
1/4 triplet b d c
"""
inst = read_instance(text)
print(write_instance(inst), end="")

val, sol = brute_force_opt(inst)
print(f"optimum {val} with tree {sol.variable_tree()}")

# Fixing the left-to-right order of the leaves can only hurt.
rng = np.random.default_rng(0)
for _ in range(3):
    pi = list(rng.permutation(inst.variables))
    v, s = opt_given_order(inst, pi)
    print(f"order {''.join(pi)}: best {v:.2f}  {s.variable_tree()}")

H = gaifman(inst)
print("Gaifman graph total weight:", H.total_weight())
