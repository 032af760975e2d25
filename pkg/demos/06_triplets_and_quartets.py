"""Triplets, quartets, BUILD and the reduction between them.

Run: python3 demos/06_triplets_and_quartets.py
"""

from phylocsp.csp import Instance, Solution, value
from phylocsp.errors import Inconsistent
from phylocsp.problems import (
    aho_build,
    attach_gamma,
    induced_triplets,
    quartet_satisfied,
    root_at,
    triplets_to_quartets,
)
from phylocsp.tree import Tree

t = Tree.from_newick("(((whale,dolphin),tuna),(lion,tiger));")
trips = induced_triplets(t)
print(len(trips), "triplets displayed, e.g.", trips[:3])
rebuilt = aho_build(trips, t.leaf_order())
print("BUILD recovers", rebuilt)
try:
    aho_build([("a", "b", "c"), ("a", "c", "b")], "abc")
except Inconsistent as exc:
    print("conflict:", exc)

print("lion tiger | tuna whale:", quartet_satisfied(t, ("lion", "tiger", "tuna", "whale")))

inst = Instance(t.leaf_order(), [("triplet", x, 1) for x in trips[:6]])
quarts, gamma = triplets_to_quartets(inst)
surrogate = attach_gamma(t, gamma)
print("value as triplets", value(Solution(t), inst), "as quartets", value(Solution(surrogate), quarts))
print("rooting at", gamma, "gives back", root_at(surrogate, gamma))
