import itertools
from collections import defaultdict, deque

import pytest

from phylocsp.csp import Instance, Solution, value, value_exact
from phylocsp.errors import ArgumentError, Inconsistent
from phylocsp.patterns import enumerate_patterns
from phylocsp.problems import (
    aho_build,
    attach_gamma,
    caterpillar_embed,
    count_satisfied,
    fstar_payoff,
    induced_triplets,
    quartet_payoff,
    quartet_satisfied,
    root_at,
    split_one_right_payoff,
    triplet_payoff,
    triplet_satisfied,
    triplets_to_quartets,
)
from phylocsp.tree import Tree, binary_shapes, build_caterpillar, build_perfect

from conftest import ANIMALS


def labelled_trees(labels):
    for sh in binary_shapes(len(labels)):
        for perm in itertools.permutations(labels):
            yield Tree(sh, 2).relabel(lambda x: perm[x])


# ---- path-disjointness oracle ----------------------------------------------

def unrooted_edges(tree):
    adj = defaultdict(set)
    for v, kids in enumerate(tree.children):
        for c in kids:
            adj[v].add(c)
            adj[c].add(v)
    r = tree.root
    if len(tree.children[r]) == 2:  # the root of a surrogate is only a subdivision point
        x, y = tree.children[r]
        adj[x].discard(r)
        adj[y].discard(r)
        adj[x].add(y)
        adj[y].add(x)
        del adj[r]
    return adj


def path(adj, s, t):
    prev = {s: None}
    dq = deque([s])
    while dq:
        v = dq.popleft()
        for w in adj[v]:
            if w not in prev:
                prev[w] = v
                dq.append(w)
    out = []
    while t is not None:
        out.append(t)
        t = prev[t]
    return set(out)


def disjoint_oracle(tree, a, b, c, d):
    adj = unrooted_edges(tree)
    n = tree.node_of
    return not (path(adj, n(a), n(b)) & path(adj, n(c), n(d)))


# ---------------------------------------------------------------------------

def test_caterpillar_triplet():
    t = build_caterpillar(5)
    assert triplet_payoff()(t, [1, 3, 4]) == 1.0
    assert triplet_satisfied(t, 1, 3, 4)


def test_triplet_basics():
    assert triplet_payoff()(Tree((("a", "c"), "b")), ["a", "b", "c"]) == 0.0
    assert sum(triplet_payoff().payoff(p) for p in enumerate_patterns(3)) == 4


def test_triplet_mutual_exclusion():
    for t in labelled_trees(list("abcd")):
        for x, y, z in itertools.combinations("abcd", 3):
            assert triplet_satisfied(t, x, y, z) + triplet_satisfied(t, x, z, y) + triplet_satisfied(t, y, z, x) == 1


def test_fstar():
    f = fstar_payoff(0.1)
    t = build_perfect(2, 2)
    assert f(t, [1, 2, 3]) == 1.0
    assert f(t, [2, 1, 3]) == pytest.approx(0.9)
    for p in enumerate_patterns(3):
        tv = triplet_payoff().payoff(p)
        assert f.payoff(p) <= tv  # the definition gives f* below triplet
        if tv == 0:
            assert f.payoff(p) == 0
    assert f.is_satisfiable()
    for bad in (0, 1, -0.5):
        with pytest.raises(ArgumentError):
            fstar_payoff(bad)


def test_fstar_on_caterpillar_iff_increasing():
    f = fstar_payoff(0.3)
    for pi in itertools.permutations("uvw"):
        sol = caterpillar_embed(list(pi))
        inst = Instance(list("uvw"), [(f, ("u", "v", "w"), 1)])
        assert (value(sol, inst) == 1.0) == (list(pi) == ["u", "v", "w"])


def test_caterpillar_embed():
    sol = caterpillar_embed(["a", "b", "c"])
    assert sol.order() == ["a", "b", "c"]
    assert triplet_satisfied(sol.variable_tree(), "a", "b", "c")
    assert caterpillar_embed({"x": 2, "y": 1}).order() == ["y", "x"]


def test_split_one_right_is_left_caterpillar():
    f = split_one_right_payoff(6)
    assert len(f.table) == 720
    assert f(build_caterpillar(6, "left"), [3, 1, 2, 6, 5, 4]) == 1.0
    assert f(build_caterpillar(6, "right"), list(range(1, 7))) == 0.0


def test_quartet_figure():
    t = Tree.from_newick("((lion,tiger),(tuna,whale));")
    assert quartet_satisfied(t, ("lion", "tiger", "tuna", "whale"))
    assert not quartet_satisfied(t, ("lion", "tuna", "tiger", "whale"))
    assert quartet_satisfied(ANIMALS, ("lion", "tiger", "tuna", "whale"))
    with pytest.raises(ArgumentError):
        quartet_satisfied(t, ("lion", "tiger", "tuna", "shark"))


def test_quartet_exclusive_and_oracle():
    for n in range(4, 7):
        labels = list("abcdef"[:n])
        for t in labelled_trees(labels):
            for a, b, c, d in itertools.combinations(labels, 4):
                got = [quartet_satisfied(t, q) for q in ((a, b, c, d), (a, c, b, d), (a, d, b, c))]
                assert sum(got) == 1
                assert got[0] == disjoint_oracle(t, a, b, c, d)
            if n == 6:
                break  # one labelling per shape is enough at 6 leaves


def test_quartet_payoff_table():
    f = quartet_payoff()
    assert f(Tree(((1, 2), (3, 4))), [1, 2, 3, 4]) == 1.0
    assert f(Tree((((1, 3), 2), 4)), [1, 2, 3, 4]) == 0.0
    assert sum(f.vector()) == 40  # a third of the 120 ordered binary patterns


def test_aho_build_examples():
    t = aho_build([("a", "b", "c")], "abc")
    assert triplet_satisfied(t, "a", "b", "c")
    with pytest.raises(Inconsistent):
        aho_build([("a", "b", "c"), ("a", "c", "b")], "abc")
    assert aho_build([], ["x"]).nested == "x"
    with pytest.raises(ArgumentError):
        aho_build([("a", "b", "q")], "abc")


def test_aho_build_induced(rng):
    shapes = binary_shapes(8)
    for _ in range(30):
        t = Tree(shapes[int(rng.integers(len(shapes)))], 2)
        trips = induced_triplets(t)
        assert len(trips) == 56
        labels = [int(x) for x in rng.permutation(t.leaf_order())]
        b = aho_build(trips, labels)
        assert count_satisfied(b, trips) == len(trips)


def test_reduction_example():
    inst = Instance(list("abc"), [("triplet", ("a", "b", "c"), 1)])
    q, gamma = triplets_to_quartets(inst)
    assert gamma == "gamma" and q.constraints[0].args == ("a", "b", "c", "gamma")
    taken = Instance(["gamma", "b", "c"], [("triplet", ("gamma", "b", "c"), 1)])
    assert triplets_to_quartets(taken)[1] == "gamma1"
    with pytest.raises(ArgumentError):
        triplets_to_quartets(Instance(list("abcd"), [("quartet", tuple("abcd"), 1)]))


def test_reduction_preserves_counts(rng):
    labels = list("abcde")
    trip_sets = []
    for _ in range(10):
        trip_sets.append([tuple(rng.choice(labels, 3, replace=False)) for _ in range(6)])
    for n in range(3, 6):
        for t in labelled_trees(labels[:n]):
            surrogate = attach_gamma(t, "g")
            assert root_at(surrogate, "g") == t
            for trips in trip_sets:
                trips = [x for x in trips if set(x) <= set(labels[:n])]
                quart = [(a, b, c, "g") for a, b, c in trips]
                assert count_satisfied(t, trips) == count_satisfied(surrogate, quart, "quartet")


def test_reverse_direction_any_surrogate():
    # any rooted surrogate on V + {g}: rooting at g gives a tree with the same count
    labels = list("abcd")
    trips = [("a", "b", "c"), ("b", "d", "a"), ("c", "d", "b")]
    quart = [(a, b, c, "g") for a, b, c in trips]
    for s in labelled_trees(labels + ["g"]):
        r = root_at(s, "g")
        assert count_satisfied(r, trips) == count_satisfied(s, quart, "quartet")


def test_reduction_values():
    inst = Instance(list("abcd"), [("triplet", ("a", "b", "c"), 2), ("triplet", ("c", "d", "a"), 1)])
    q, g = triplets_to_quartets(inst)
    for t in labelled_trees(list("abcd")):
        s = attach_gamma(t, g)
        assert value_exact(Solution(t), inst) == value_exact(Solution(s), q)
