import itertools

import pytest

from phylocsp.errors import ArgumentError, NotFoundError
from phylocsp.tree import (
    Tree,
    binary_shapes,
    build_caterpillar,
    build_perfect,
    from_consecutive_depths,
    lca,
    restrict,
)

from conftest import ANIMALS, TREE_I, TREE_III


def leafset(t, node):
    return set(t.leaves_below(node))


def test_lca_singleton_is_leaf():
    assert ANIMALS.lca(["tuna"]) == ANIMALS.node_of("tuna")


def test_lca_animals_proper_descendant():
    pair = ANIMALS.lca(["lion", "tiger"])
    triple = ANIMALS.lca(["lion", "tiger", "tuna"])
    assert pair != triple and ANIMALS.is_ancestor(triple, pair)
    assert triple == ANIMALS.root


def test_lca_caterpillar():
    t = build_caterpillar(5, "left")
    assert leafset(t, lca(t, {1, 3})) == {1, 2, 3}


def test_lca_unknown_leaf():
    with pytest.raises(NotFoundError):
        ANIMALS.lca(["shark"])


def test_restrict_identity_and_empty():
    assert restrict(ANIMALS, ANIMALS.leaf_order()) == ANIMALS
    with pytest.raises(ArgumentError):
        restrict(ANIMALS, [])


def test_restrict_figure_trees():
    assert restrict(TREE_I, {"a", "b", "c"}).nested == (("a", "b"), "c")
    # in tree III 'a' splits off first, so it is not ((a,b),c)
    assert restrict(TREE_III, {"a", "b", "c"}).nested == ("a", ("b", "c"))


def test_caterpillars():
    assert build_caterpillar(1).nested == 1
    t = build_caterpillar(3)
    assert t.leaf_order() == [1, 2, 3] and t.nested == ((1, 2), 3)
    t5 = build_caterpillar(5, "left")
    for v in t5.internal_nodes():
        assert t5.is_leaf(t5.children[v][1])
    assert build_caterpillar(4, "right").nested == (1, (2, (3, 4)))
    with pytest.raises(ArgumentError):
        build_caterpillar(0)


@pytest.mark.parametrize("k,d", [(3, 0), (3, 2), (2, 3), (4, 2)])
def test_perfect_counts(k, d):
    t = build_perfect(k, d)
    assert t.n_leaves == k**d
    assert len(t.internal_nodes()) == (k**d - 1) // (k - 1)
    assert all(t.depth[t.node_of(x)] == d for x in t.leaf_order())
    for a, b in itertools.combinations(t.leaf_order()[:12], 2):
        assert 0 <= t.depth[t.lca([a, b])] <= d - 1


def test_shape_counts_catalan():
    assert [len(binary_shapes(n)) for n in range(1, 9)] == [1, 1, 2, 5, 14, 42, 132, 429]


def test_lca_monotone_and_restrict_properties(rng):
    for _ in range(60):
        n = int(rng.integers(2, 9))
        shapes = binary_shapes(n)
        t = Tree(shapes[int(rng.integers(len(shapes)))], 2)
        leaves = t.leaf_order()
        s = [x for x in leaves if rng.random() < 0.5] or leaves[:1]
        x = leaves[int(rng.integers(n))]
        assert t.is_ancestor(t.lca(s + [x]), t.lca(s))
        r = restrict(t, s)
        assert restrict(r, s) == r
        assert r.leaf_order() == [y for y in leaves if y in set(s)]
        assert r.is_full_binary()


def test_newick_round_trip():
    text = "((lion,tiger),tuna);"
    assert Tree.from_newick(text).to_newick() == text
    assert ANIMALS.to_newick() == "(((whale,dolphin),tuna),(lion,tiger));"
    t = Tree.from_newick("(a,b,(c,d,e));")
    assert t.arity == 3 and Tree.from_newick(t.to_newick()) == t


@pytest.mark.parametrize("bad", ["(a,b)", "((a,b),a);", "(a:1,b);", "(a,(b));", "(a,b)x;", ""])
def test_newick_rejects(bad):
    with pytest.raises(ArgumentError):
        Tree.from_newick(bad)


def test_consecutive_depths_inverse(rng):
    for n in range(1, 8):
        for sh in binary_shapes(n):
            t = Tree(sh, 2)
            assert from_consecutive_depths(t.leaf_order(), t.consecutive_depths()) == t


def test_mirror_relabel_subtree():
    t = Tree.from_newick("((a,b),c);")
    assert t.mirror().nested == ("c", ("b", "a"))
    assert t.relabel({"a": 1, "b": 2, "c": 3}).nested == ((1, 2), 3)
    assert t.subtree(t.lca(["a", "b"])).nested == ("a", "b")


def test_invalid_trees():
    with pytest.raises(ArgumentError):
        Tree(("a", "a"))
    with pytest.raises(ArgumentError):
        Tree(("a", ("b",)))
    with pytest.raises(ArgumentError):
        Tree(("a", "b", "c"), 2)
