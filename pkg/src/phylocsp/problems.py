"""Concrete phylogenetic problems: triplets, quartets, f*, split-one payoffs.

Also Aho's BUILD, the caterpillar embedding of an ordering and the
reduction from rooted triplets to unrooted quartets via a fresh leaf.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from typing import Iterable, Sequence

from .csp import Instance, Solution
from .errors import ArgumentError, Inconsistent
from .patterns import Pattern, PayoffFunction, enumerate_patterns
from .registry import Registry
from .tree import Tree, build_caterpillar, restrict

__all__ = [
    "triplet_payoff",
    "quartet_payoff",
    "fstar_payoff",
    "split_one_right_payoff",
    "split_one_left_payoff",
    "triplet_satisfied",
    "quartet_satisfied",
    "aho_build",
    "induced_triplets",
    "caterpillar_embed",
    "triplets_to_quartets",
    "attach_gamma",
    "root_at",
    "count_satisfied",
]


def triplet_payoff() -> PayoffFunction:
    """``triplet(u, v, w) = 1`` iff ``w`` splits off before ``u`` and ``v`` separate."""
    table = {((1, 2), 3): 1.0, ((2, 1), 3): 1.0, (3, (1, 2)): 1.0, (3, (2, 1)): 1.0}
    return PayoffFunction(3, table, name="triplet", ordered=False)


def fstar_payoff(delta: float, name: str | None = None) -> PayoffFunction:
    """Triplet payoff that is 1 only in leaf order ``u, v, w``, else ``1 - delta``."""
    if not 0.0 < delta < 1.0:
        raise ArgumentError(f"delta must lie in (0, 1), got {delta}")
    table = {((1, 2), 3): 1.0, ((2, 1), 3): 1.0 - delta, (3, (1, 2)): 1.0 - delta, (3, (2, 1)): 1.0 - delta}
    return PayoffFunction(3, table, name=name or f"fstar:{delta!r}")


def _caterpillar_nested(labels, side):
    return build_caterpillar(len(labels), side, list(labels)).nested


def split_one_right_payoff(k: int) -> PayoffFunction:
    """Payoff 1 when every split of three or more arguments sends exactly one right.

    These are the ``k!`` labellings of the left caterpillar shape.
    """
    if k < 1:
        raise ArgumentError("k must be positive")
    table = {_caterpillar_nested(p, "left"): 1.0 for p in itertools.permutations(range(1, k + 1))}
    return PayoffFunction(k, table, name=f"split-right-{k}")


def split_one_left_payoff(k: int) -> PayoffFunction:
    """Mirror of :func:`split_one_right_payoff`."""
    if k < 1:
        raise ArgumentError("k must be positive")
    table = {_caterpillar_nested(p, "right"): 1.0 for p in itertools.permutations(range(1, k + 1))}
    return PayoffFunction(k, table, name=f"split-left-{k}")


# ----------------------------------------------------------------------
# direct predicates on trees


def triplet_satisfied(tree: Tree, a, b, c) -> bool:
    """``ab|c``: lca(a, b) is a proper descendant of lca(a, b, c)."""
    ab = tree.lca([a, b])
    abc = tree.lca([a, b, c])
    return ab != abc


def _leafset_nodes(tree: Tree) -> set:
    return {frozenset(tree.leaves_below(n)) for n in tree.internal_nodes()}


def quartet_satisfied(tree: Tree, q: Sequence) -> bool:
    """``ab|cd`` on the unrooted tree represented by the rooted surrogate ``tree``.

    Holds iff some internal node of the restriction to ``{a, b, c, d}`` has
    leaf set exactly ``{a, b}`` or exactly ``{c, d}``.
    """
    a, b, c, d = q
    if len({a, b, c, d}) != 4:
        raise ArgumentError("quartet leaves must be distinct")
    for x in (a, b, c, d):
        if x not in tree:
            raise ArgumentError(f"leaf {x!r} not in tree")
    sets = _leafset_nodes(restrict(tree, (a, b, c, d)))
    return frozenset((a, b)) in sets or frozenset((c, d)) in sets


def quartet_payoff() -> PayoffFunction:
    """Arity-4 table: payoff 1 on binary patterns where ``x1 x2 | x3 x4`` holds."""
    table = {}
    for p in enumerate_patterns(4, 2):
        if quartet_satisfied(p.tree, (1, 2, 3, 4)):
            table[p.canonical()] = 1.0
    return PayoffFunction(4, table, name="quartet", ordered=False)


def count_satisfied(tree: Tree, constraints: Iterable, kind: str = "triplet") -> int:
    """Number of ``triplet``/``quartet`` tuples satisfied by ``tree`` (leaves = variables)."""
    if kind == "triplet":
        return sum(triplet_satisfied(tree, *t) for t in constraints)
    if kind == "quartet":
        return sum(quartet_satisfied(tree, q) for q in constraints)
    raise ArgumentError(f"unknown constraint kind {kind!r}")


def induced_triplets(tree: Tree) -> list[tuple]:
    """Every triplet ``ab|c`` (with a before b) displayed by ``tree``."""
    out = []
    for x, y, z in itertools.combinations(tree.leaf_order(), 3):
        for a, b, c in ((x, y, z), (x, z, y), (y, z, x)):
            if triplet_satisfied(tree, a, b, c):
                out.append((a, b, c))
                break
    return out


# ----------------------------------------------------------------------
# BUILD


def aho_build(triplets: Iterable[Sequence], labels: Sequence) -> Tree:
    """Tree consistent with every triplet ``ab|c``, or raise :class:`Inconsistent`.

    Components of each partition graph are ordered by the position of their
    first label in ``labels``; more than two components are joined as a left
    caterpillar of subtrees.
    """
    labels = list(labels)
    if not labels:
        raise ArgumentError("labels must be nonempty")
    rank = {x: i for i, x in enumerate(labels)}
    if len(rank) != len(labels):
        raise ArgumentError("duplicate label")
    trips = [tuple(t) for t in triplets]
    for t in trips:
        if len(t) != 3 or len(set(t)) != 3:
            raise ArgumentError(f"bad triplet {t!r}")
        for x in t:
            if x not in rank:
                raise ArgumentError(f"triplet uses unknown label {x!r}")

    def build(current: list, cons: list):
        if len(current) == 1:
            return current[0]
        parent = {x: x for x in current}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b, _ in cons:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
        groups = defaultdict(list)
        for x in current:
            groups[find(x)].append(x)
        comps = sorted(groups.values(), key=lambda g: rank[g[0]])
        if len(comps) == 1:
            raise Inconsistent(current)
        subtrees = []
        for comp in comps:
            members = set(comp)
            sub = [t for t in cons if t[0] in members and t[1] in members and t[2] in members]
            subtrees.append(build(comp, sub))
        acc = subtrees[0]
        for s in subtrees[1:]:
            acc = (acc, s)
        return acc

    return Tree(build(labels, trips), 2)


# ----------------------------------------------------------------------
# orderings and the quartet reduction


def caterpillar_embed(pi) -> Solution:
    """Map the variables of ordering ``pi`` onto leaves ``1..n`` of a left caterpillar.

    ``pi`` is either a sequence (variables left to right) or a mapping
    from variables to 1-based ranks.
    """
    if isinstance(pi, dict):
        order = sorted(pi, key=pi.__getitem__)
    else:
        order = list(pi)
    if not order:
        raise ArgumentError("empty ordering")
    tree = build_caterpillar(len(order), "left")
    return Solution(tree, {v: i + 1 for i, v in enumerate(order)})


def fresh_name(taken: Iterable, base: str = "gamma") -> str:
    taken = {str(x) for x in taken}
    if base not in taken:
        return base
    i = 1
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"


def triplets_to_quartets(inst: Instance, gamma: str | None = None):
    """Replace each ``ab|c`` by ``ab|c gamma`` over ``V + {gamma}``.

    Returns ``(quartet_instance, gamma)``; weights are unchanged.
    """
    gamma = gamma if gamma is not None else fresh_name(inst.variables)
    if gamma in inst.variables:
        raise ArgumentError(f"{gamma!r} is already a variable")
    reg = inst.registry if isinstance(inst.registry, Registry) else Registry()
    cons = []
    for c in inst.constraints:
        if c.payoff != "triplet":
            raise ArgumentError(f"only triplet constraints can be reduced, got {c.payoff}")
        a, b, cc = c.args
        cons.append(("quartet", (a, b, cc, gamma), c.weight))
    return Instance(list(inst.variables) + [gamma], cons, reg, normalize=False), gamma


def attach_gamma(tree: Tree, gamma) -> Tree:
    """Rooted surrogate of the unrooted tree made by joining ``gamma`` to the root."""
    if gamma in tree:
        raise ArgumentError(f"{gamma!r} already labels a leaf")
    return Tree((tree.nested, gamma), max(tree.arity, 2))


def _unrooted_adjacency(tree: Tree) -> dict:
    adj = defaultdict(list)
    for n, kids in enumerate(tree.children):
        for c in kids:
            adj[n].append(c)
            adj[c].append(n)
    root = tree.root
    if len(tree.children[root]) == 2:
        x, y = tree.children[root]
        adj[x] = [y if v == root else v for v in adj[x]]
        adj[y] = [x if v == root else v for v in adj[y]]
        del adj[root]
    return adj


def root_at(surrogate: Tree, gamma) -> Tree:
    """Root the unrooted tree behind ``surrogate`` at leaf ``gamma`` and drop it.

    The result is the rooted tree on the remaining leaves whose root is the
    neighbour of ``gamma``.  Child order follows the surrogate's adjacency
    order.
    """
    g = surrogate.node_of(gamma)
    adj = _unrooted_adjacency(surrogate)
    (start,) = adj[g]

    def build(n, came):
        kids = [c for c in adj[n] if c != came]
        if not kids:
            return surrogate.label[n]
        if len(kids) == 1:
            return build(kids[0], n)
        return tuple(build(c, n) for c in kids)

    return Tree(build(start, g))
