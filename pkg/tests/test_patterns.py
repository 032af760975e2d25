import itertools

import pytest

from phylocsp.errors import ArgumentError, ResourceError
from phylocsp.patterns import (
    PairOrder,
    Pattern,
    PayoffFunction,
    TripleSplit,
    compile_to_brackets,
    enumerate_patterns,
    eval_brackets,
    evaluate_payoff,
    format_tables,
    match_pattern,
    parse_tables,
)
from phylocsp.problems import triplet_payoff
from phylocsp.tree import Tree, binary_shapes

from conftest import ANIMALS, TREE_I, TREE_II

P = Pattern.from_text("((x1,x2),x3)")


def test_match_figure_trees():
    assert match_pattern(TREE_I, ["a", "b", "c"]) == P
    m2 = match_pattern(TREE_II, ["a", "b", "c"])
    assert m2 != P and m2.to_text() == "((x2,x1),x3)"
    assert match_pattern(Tree((("x", "y"), "z")), {1: "x", 2: "y", 3: "z"}) == P


def test_match_rejects_repeats():
    with pytest.raises(ArgumentError):
        match_pattern(TREE_I, ["a", "a", "c"])


def test_evaluate_payoff():
    f = triplet_payoff()
    assert evaluate_payoff(f, ANIMALS, ["whale", "dolphin", "tuna"]) == 1.0
    t = Tree((("a", "b"), "c"))
    assert f(t, ["a", "c", "b"]) == 0.0
    assert PayoffFunction(3, {})(t, ["a", "b", "c"]) == 0.0


def test_triplet_table_shape():
    f = triplet_payoff()
    pats = enumerate_patterns(3)
    ones = [p for p in pats if f.payoff(p) == 1.0]
    assert len(ones) == 4
    for p in pats:  # symmetric in the first two slots
        swapped = Pattern(p.tree.relabel({1: 2, 2: 1, 3: 3}))
        assert f.payoff(p) == f.payoff(swapped)


def test_compiler_examples():
    assert {str(b) for b in compile_to_brackets(P)} == {"[x1,x2<x3]", "[x1<x2]"}
    third = Pattern.from_text("(x3,(x1,x2))")
    assert {str(b) for b in compile_to_brackets(third)} == {"[x3<x1,x2]", "[x1<x2]"}
    assert compile_to_brackets(Pattern(1)) == []
    assert eval_brackets([], Tree(("q", "r")), ["q"])


def test_eval_brackets_examples():
    t = Tree((("a", "b"), "c"))
    assert eval_brackets([PairOrder(1, 2)], t, ["a", "b"])
    split = TripleSplit((1, 2, 3), (1, 1, 2))
    assert eval_brackets([split], TREE_I, ["a", "b", "c"])
    assert not eval_brackets([split], Tree((("a", "c"), "b")), ["a", "b", "c"])


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_compiler_exhaustive(k):
    pats = enumerate_patterns(k)
    compiled = {p: compile_to_brackets(p) for p in pats}
    for n in range(max(k, 1), 7 if k <= 3 else 6):
        for sh in binary_shapes(n):
            t = Tree(sh, 2)
            for leaves in itertools.permutations(range(n), k):
                m = match_pattern(t, leaves)
                hits = [p for p in pats if eval_brackets(compiled[p], t, leaves)]
                assert hits == [m]


def test_compiler_ternary():
    pats = enumerate_patterns(3, 3)
    for p in pats:
        c = compile_to_brackets(p)
        for q in pats:
            assert eval_brackets(c, q.tree, [1, 2, 3]) == (p == q)


def test_enumerate_counts():
    assert [len(enumerate_patterns(k)) for k in (1, 2, 3, 4)] == [1, 2, 12, 120]
    assert len(enumerate_patterns(3, 3)) == 12 + 6
    assert len(set(enumerate_patterns(5))) == 14 * 120
    with pytest.raises(ResourceError):
        enumerate_patterns(7)


def test_pattern_partition(rng):
    pats = enumerate_patterns(4)
    for _ in range(20):
        sh = binary_shapes(6)[int(rng.integers(42))]
        t = Tree(sh, 2)
        leaves = [int(x) for x in rng.choice(6, 4, replace=False)]
        assert sum(match_pattern(t, leaves) == p for p in pats) == 1


def test_payoff_validation():
    with pytest.raises(ArgumentError):
        PayoffFunction(3, {"((x1,x2),x3)": 1.5})
    with pytest.raises(ArgumentError):
        PayoffFunction(2, {"((x1,x2),x3)": 1.0})
    with pytest.raises(ArgumentError):
        Pattern.from_text("((x1,x1),x3)")


def test_unordered_closure_and_scale():
    f = PayoffFunction(3, {"((x1,x2),x3)": 1.0}).unordered()
    assert len(f.table) == 4 and f.table == triplet_payoff().table
    g = f.scaled(0.5)
    assert g.max_payoff() == 0.5 and not g.is_satisfiable() and f.is_satisfiable()


def test_table_text_round_trip():
    text = """
    # custom tables
    payoff mine 3
    ((x1,x2),x3) 1
    (x3,(x1,x2)) 0.25
    payoff anything 2
    default 1
    """
    tabs = parse_tables(text)
    assert tabs["mine"].payoff(P) == 1.0 and tabs["anything"].default == 1.0
    again = parse_tables(format_tables(tabs.values()))
    assert again["mine"].table == tabs["mine"].table
    with pytest.raises(ArgumentError):
        parse_tables("((x1,x2),x3) 1")
