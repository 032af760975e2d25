import itertools
from fractions import Fraction

import numpy as np
import pytest

from phylocsp.csp import gaifman, is_regular, value_exact
from phylocsp.errors import ArgumentError, ResourceError
from phylocsp.gap import (
    CoupledMap,
    GapSpec,
    adversarial_labelings,
    build_gap,
    child_label_divergence,
    coupling_experiment,
    cousins,
    divergence_bound,
    lkm_weight,
    lmn_pmf,
    optimal_coupling,
    order_experiment,
    sample_coupled_L,
    satisfying_solution,
    total_variation,
)
from phylocsp.patterns import PayoffFunction
from phylocsp.tree import build_perfect


def simulate_L(k, d, trials, rng):
    """Direct simulation of the level-sampling map: returns tuples of 1-based leaves."""
    i = rng.integers(0, d, trials)
    out = np.empty((trials, k), dtype=np.int64)
    for t in range(trials):
        u = rng.integers(0, k ** i[t])
        sub = k ** (d - i[t] - 1)
        base = u * k ** (d - i[t])
        for j in range(k):
            out[t, j] = base + j * sub + rng.integers(0, sub) + 1
    return out


def test_lkm_weight_examples():
    assert lkm_weight((1, 2, 3), GapSpec("triplet", 1)) == 1
    s = GapSpec("triplet", 2)
    assert lkm_weight((1, 4, 7), s) == Fraction(1, 54)
    assert lkm_weight((1, 2, 3), s) == Fraction(1, 6)
    assert lkm_weight((2, 1, 3), s) == 0
    assert lkm_weight((1, 2, 4), s) == 0


def test_lkm_weight_matches_simulation(rng):
    s = GapSpec("triplet", 2)
    draws = simulate_L(3, 2, 60_000, rng)
    tup, counts = np.unique(draws, axis=0, return_counts=True)
    for t, c in zip(tup[:40], counts[:40]):
        w = float(lkm_weight(tuple(int(x) for x in t), s))
        assert abs(c / 60_000 - w) < 5 * np.sqrt(w / 60_000) + 1e-4


def test_lkm_sums_to_one():
    for k, d in [(2, 2), (3, 2), (2, 3)]:
        s = GapSpec("constant-%d" % k, d)
        total = sum(lkm_weight(t, s) for t in itertools.permutations(range(1, k**d + 1), k))
        assert total == 1


@pytest.mark.parametrize("name,d,count", [("triplet", 2, 30), ("split-right-2", 2, 6), ("triplet", 3, 819), ("triplet", 1, 1)])
def test_build_gap_counts(name, d, count):
    inst = build_gap(GapSpec(name, d))
    assert len(inst.constraints) == count
    assert inst.total_weight() == 1 and inst.exact
    assert is_regular(inst)
    base = build_perfect(GapSpec(name, d).k, d)
    assert all(cousins(base, c.args) for c in inst.constraints)


def test_build_gap_caps():
    with pytest.raises(ResourceError):
        build_gap(GapSpec("triplet", 9))
    with pytest.raises(ArgumentError):
        GapSpec("triplet", 0)
    with pytest.raises(ArgumentError):
        GapSpec("constant-1", 2)


def test_gap_gaifman_regular():
    g = gaifman(build_gap(GapSpec("triplet", 2)))
    degs = {g.degree(v) for v in g.vertices}
    assert len(degs) == 1 and g.total_weight() == 3


def test_cousins():
    assert cousins(build_perfect(3, 1), (1, 2, 3))
    assert not cousins(build_perfect(3, 1), (2, 1, 3))
    assert cousins(build_perfect(3, 2), (1, 4, 9))
    assert not cousins(build_perfect(3, 2), (1, 4, 5))


@pytest.mark.parametrize("name", ["triplet", "fstar", "split-right-4", "split-right-2", "split-left-3",
                                  "quartet", "split-right-3", "constant-2"])
@pytest.mark.parametrize("d", [1, 2])
def test_satisfying_solution(name, d):
    spec = GapSpec(name, d)
    assert value_exact(satisfying_solution(spec), build_gap(spec)) == 1


def test_satisfying_solution_permuted_pattern():
    # only payoff-1 pattern is (x3,(x2,x1)); arguments must be pre-permuted
    f = PayoffFunction(3, {"(x3,(x2,x1))": 1.0}, name="odd")
    spec = GapSpec(f, 2)
    inst = build_gap(spec)
    assert inst.constraints[0].args == (7, 4, 1)
    assert value_exact(satisfying_solution(spec), inst) == 1


def test_satisfying_solution_unsatisfiable():
    f = PayoffFunction(3, {}, default=0.5, name="half")
    with pytest.raises(ArgumentError):
        satisfying_solution(GapSpec(f, 1))


def test_order_experiment_exact_d1():
    res = order_experiment(GapSpec("triplet", 1), 0, all_orders=True)
    assert res.mean == pytest.approx(2 / 3, abs=1e-15) and res.stderr == 0 and len(res.values) == 6


def test_order_experiment_sampled(rng):
    res = order_experiment(GapSpec("triplet", 2), 30, rng)
    assert 1 / 3 < res.mean < 2 / 3 and len(res.values) == 30
    with pytest.raises(ResourceError):
        order_experiment(GapSpec("triplet", 3), 1, rng)


def test_divergence(rng):
    assert child_label_divergence(3, 4, np.zeros(81, dtype=int), 1) == 0
    for q in (2, 3):
        bound = divergence_bound(q, 4)
        for name, lab in adversarial_labelings(3, 4, q).items():
            v = child_label_divergence(3, 4, lab, q)
            assert 0 < v <= bound, name
        for _ in range(10):
            assert child_label_divergence(3, 4, rng.integers(0, q, 81), q) <= bound
    lab = np.arange(81) % 3
    assert child_label_divergence(3, 4, lab, 3) <= divergence_bound(3, 4)


def test_divergence_against_loop(rng):
    k, d, q = 2, 3, 3
    lab = rng.integers(0, q, k**d)
    total = 0.0
    for t in range(d):
        size = k ** (d - t)
        vals = []
        for u in range(k**t):
            mu = np.bincount(lab[u * size:(u + 1) * size], minlength=q) / size
            s = 0.0
            for j in range(k):
                lo = u * size + j * size // k
                muy = np.bincount(lab[lo:lo + size // k], minlength=q) / (size // k)
                s += np.abs(muy - mu).sum() / k
            vals.append(s)
        total += np.mean(vals) / d
    assert child_label_divergence(k, d, lab, q) == pytest.approx(total, abs=1e-12)


def test_lmn_pmf():
    assert np.array_equal(lmn_pmf(4, 1, 2), np.eye(4)[2])
    for M, dp in [(2, 3), (4, 2), (4, 3), (3, 2)]:
        for j in range(M):
            assert lmn_pmf(M, dp, j).sum() == pytest.approx(1, abs=1e-12)
    with pytest.raises(ResourceError):
        lmn_pmf(4, 7, 0)
    with pytest.raises(ArgumentError):
        lmn_pmf(4, 2, 4)


def test_optimal_coupling():
    J = optimal_coupling([0.2, 0.8], [0.2, 0.8])
    assert np.allclose(J, np.diag([0.2, 0.8]))
    J = optimal_coupling([1, 0], [0.5, 0.5])
    assert 1 - np.trace(J) == pytest.approx(0.5)
    p = lmn_pmf(4, 2, 1)
    q = np.full(16, 1 / 16)
    J = optimal_coupling(p, q)
    assert 1 - np.trace(J) == pytest.approx(total_variation(p, q), abs=1e-12)
    assert np.allclose(J.sum(1), p, atol=1e-15) and np.allclose(J.sum(0), q, atol=1e-15)
    with pytest.raises(ArgumentError):
        optimal_coupling([0.5, 0.6], [0.5, 0.5])


def test_coupled_map_uniform_and_cousins(rng):
    cm = CoupledMap(4, 3)
    for j in range(4):
        assert np.abs(cm.marginal(j) - 1 / 64).max() < 1e-12
    rep = coupling_experiment(4, 3, 100_000, rng)
    assert rep["chi2_pvalue"] > 0.001
    assert rep["min_cousin_rate"] >= rep["cousin_bound"]
    assert rep["shortcut_preserves_cousins"]


def test_sample_coupled_L_range(rng):
    L = sample_coupled_L(4, 2, rng)
    assert L.shape == (4,) and ((0 <= L) & (L < 16)).all()
    L2 = sample_coupled_L(4, 2, np.random.default_rng(1), eta=0.5)
    assert L2.shape == (4,)
