"""Property tests on randomly drawn trees."""

from hypothesis import given, settings, strategies as st

from phylocsp.patterns import compile_to_brackets, eval_brackets, match_pattern
from phylocsp.problems import aho_build, count_satisfied, induced_triplets
from phylocsp.tree import Tree, from_consecutive_depths


def nested_trees(max_leaves=9):
    # distinct integer labels, random binary or ternary splits
    def build(labels, draw):
        if len(labels) == 1:
            return labels[0]
        parts = draw(st.integers(2, min(3, len(labels))))
        cuts = sorted(draw(st.lists(st.integers(1, len(labels) - 1), min_size=parts - 1,
                                    max_size=parts - 1, unique=True)))
        bounds = [0, *cuts, len(labels)]
        return tuple(build(labels[a:b], draw) for a, b in zip(bounds, bounds[1:]))

    @st.composite
    def strat(draw):
        n = draw(st.integers(1, max_leaves))
        labels = draw(st.permutations(list(range(n))))
        return Tree(build(labels, draw))

    return strat()


@settings(max_examples=80, deadline=None)
@given(nested_trees())
def test_newick_round_trip(t):
    s = t.relabel(lambda x: f"t{x}")
    assert Tree.from_newick(s.to_newick()) == s


@settings(max_examples=80, deadline=None)
@given(nested_trees())
def test_depth_codec_binary(t):
    if not t.is_full_binary():
        return
    back = from_consecutive_depths(t.leaf_order(), t.consecutive_depths())
    assert back == t


@settings(max_examples=60, deadline=None)
@given(nested_trees(), st.data())
def test_match_satisfies_own_brackets(t, data):
    if t.n_leaves < 2:
        return
    k = data.draw(st.integers(2, min(4, t.n_leaves)))
    leaves = data.draw(st.permutations(t.leaf_order()))[:k]
    p = match_pattern(t, leaves)
    assert eval_brackets(compile_to_brackets(p), t, leaves)


@settings(max_examples=60, deadline=None)
@given(nested_trees())
def test_build_recovers_displayed_triplets(t):
    trips = induced_triplets(t)
    b = aho_build(trips, t.leaf_order())
    assert count_satisfied(b, trips) == len(trips)
