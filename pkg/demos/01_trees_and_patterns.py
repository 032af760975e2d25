"""Trees, patterns and bracket predicates.

Run: python3 demos/01_trees_and_patterns.py
"""

from phylocsp.patterns import Pattern, compile_to_brackets, enumerate_patterns, match_pattern
from phylocsp.problems import triplet_payoff
from phylocsp.tree import Tree, build_caterpillar, build_perfect

# A small tree of animals.  lion and tiger meet below the root, tuna joins at the root.
animals = Tree.from_newick("(((whale,dolphin),tuna),(lion,tiger));")
print("tree:", animals)
print("lca(lion, tiger) has leaves", animals.leaves_below(animals.lca(["lion", "tiger"])))

# Restricting a tree to a few leaves gives the pattern those leaves see.
p = match_pattern(animals, ["whale", "dolphin", "lion"])
print("whale, dolphin, lion match", p.to_text())

# A payoff function is a table over such patterns.
f = triplet_payoff()
print("triplet(whale, dolphin | tuna) =", f(animals, ["whale", "dolphin", "tuna"]))
print("triplet(whale, tuna | dolphin) =", f(animals, ["whale", "tuna", "dolphin"]))
print("patterns with payoff 1:", [q.to_text() for q, v in f.entries() if v == 1])

# Every pattern is a conjunction of bracket predicates.
for text in ("((x1,x2),x3)", "(x3,(x1,x2))"):
    print(text, "<=>", " & ".join(map(str, compile_to_brackets(Pattern.from_text(text)))))

print("ordered binary patterns on 3 and 4 slots:", len(enumerate_patterns(3)), len(enumerate_patterns(4)))
print("left caterpillar on 5 leaves:", build_caterpillar(5))
print("perfect ternary tree of depth 2:", build_perfect(3, 2))
