"""Quick invariant suite, grouped by module, used by ``phylocsp verify``.

Every check is small enough to finish in seconds and returns
``(passed, detail)``.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Callable

import numpy as np

from . import coarse, csp, gap, patterns, problems, random_assignment as ra, tree
from .registry import Registry

CHECKS: dict[str, list[tuple[str, Callable]]] = {}


def check(module: str):
    def deco(fn):
        CHECKS.setdefault(module, []).append((fn.__name__, fn))
        return fn
    return deco


@check("tree")
def newick_round_trip(rng):
    for n in range(1, 7):
        for sh in tree.binary_shapes(n):
            t = tree.Tree(sh, 2).relabel(lambda x: f"L{x}")
            if tree.Tree.from_newick(t.to_newick()) != t:
                return False, t.to_newick()
    return True, "all shapes up to 6 leaves"


@check("tree")
def restriction_keeps_lca_order(rng):
    for _ in range(50):
        n = int(rng.integers(3, 9))
        shapes = tree.binary_shapes(n)
        t = tree.Tree(shapes[int(rng.integers(len(shapes)))], 2)
        keep = [x for x in t.leaf_order() if rng.random() < 0.6] or [t.leaf_order()[0]]
        r = t.restrict(keep)
        if r.leaf_order() != [x for x in t.leaf_order() if x in set(keep)]:
            return False, "leaf order changed"
    return True, "50 random restrictions"


@check("patterns")
def pattern_counts(rng):
    counts = [len(patterns.enumerate_patterns(k, 2)) for k in (2, 3, 4)]
    return counts == [2, 12, 120], str(counts)


@check("patterns")
def bracket_compiler(rng):
    for k in (2, 3, 4):
        pats = patterns.enumerate_patterns(k, 2)
        for n in range(k, 6):
            for sh in tree.binary_shapes(n):
                t = tree.Tree(sh, 2)
                for leaves in itertools.permutations(t.leaf_order(), k):
                    m = patterns.match_pattern(t, leaves)
                    for p in pats:
                        if patterns.eval_brackets(patterns.compile_to_brackets(p), t, leaves) != (m == p):
                            return False, f"{p.to_text()} on {t.to_newick()}"
    return True, "k <= 4, trees <= 5 leaves"


@check("csp")
def brute_force_small(rng):
    inst = csp.Instance(["a", "b", "c"], [("triplet", ("a", "b", "c"), 1), ("triplet", ("a", "c", "b"), 1)])
    v, _ = csp.brute_force_opt(inst)
    return v == 0.5, f"opt = {v}"


@check("csp")
def order_opt_below_brute(rng):
    for _ in range(10):
        n = 5
        vs = list(range(n))
        cons = [("triplet", tuple(int(x) for x in rng.choice(n, 3, replace=False)), 1) for _ in range(6)]
        inst = csp.Instance(vs, cons)
        best, _ = csp.brute_force_opt(inst)
        orders = max(csp.opt_given_order(inst, list(p))[0] for p in itertools.permutations(vs))
        if abs(best - orders) > 1e-12:
            return False, f"{best} vs {orders}"
    return True, "max over orders equals brute force"


@check("random")
def uniform_triplet_third(rng):
    a = ra.alpha_exact(ra.BiasedMeasure.uniform(), problems.triplet_payoff())
    return abs(a - 1 / 3) < 1e-12, f"alpha = {a}"


@check("random")
def exact_matches_mc(rng):
    m = ra.BiasedMeasure.caterpillar(0.2)
    f = problems.split_one_right_payoff(4)
    a = ra.alpha_exact(m, f)
    mc, hw = ra.alpha_mc(m, f, 100_000, rng)
    return abs(a - mc) <= 1.5 * hw + 1e-9, f"exact {a:.5f}, mc {mc:.5f} +- {hw:.5f}"


@check("gap")
def gap_weights_and_satisfiable(rng):
    for name, d in (("triplet", 1), ("triplet", 2), ("split-right-4", 1), ("fstar", 2), ("split-right-2", 2)):
        spec = gap.GapSpec(name, d)
        inst = gap.build_gap(spec)
        if inst.total_weight() != 1 or not csp.is_regular(inst):
            return False, f"{name} d={d}: weights"
        if csp.value_exact(gap.satisfying_solution(spec), inst) != 1:
            return False, f"{name} d={d}: not satisfied"
    return True, "weights sum to 1, regular, satisfied"


@check("gap")
def coupling_uniform(rng):
    cm = gap.CoupledMap(4, 3)
    dev = max(float(np.abs(cm.marginal(j) - 1 / cm.N).max()) for j in range(4))
    off = [1 - np.trace(J) for J in cm.joints]
    ok = dev < 1e-12 and all(abs(o - t) < 1e-12 for o, t in zip(off, cm.tv))
    return ok, f"max deviation {dev:.2e}"


@check("gap")
def divergence_bound(rng):
    worst = 0.0
    for q in (2, 3):
        labs = list(gap.adversarial_labelings(3, 4, q).values())
        labs += [rng.integers(0, q, 81) for _ in range(10)]
        for lab in labs:
            v = gap.child_label_divergence(3, 4, lab, q)
            worst = max(worst, v / gap.divergence_bound(q, 4))
    return worst <= 1.0, f"max value / bound = {worst:.3f}"


@check("coarse")
def coarsen_properties(rng):
    for _ in range(30):
        n = int(rng.integers(3, 10))
        vs = list(range(n))
        cons = [("triplet", tuple(int(x) for x in rng.choice(n, 3, replace=False)), 1) for _ in range(8)]
        inst = csp.Instance(vs, cons)
        shapes = tree.binary_shapes(n)
        phi = csp.Solution.from_shape(shapes[int(rng.integers(len(shapes)))], [int(x) for x in rng.permutation(n)])
        eps = 0.5
        xi = coarse.coarsen(phi, eps)
        lo, hi = coarse.val_pm(xi, inst)
        if not coarse.is_in_class(xi, eps, 16 / eps, phi.order()):
            return False, "not in class"
        if hi < csp.value_exact(phi, inst) or not coarse.brackets_preserved(phi, xi, inst):
            return False, "value or brackets"
        if float(hi - lo) > coarse.mc_weight(xi, csp.gaifman(inst)) + 1e-12:
            return False, "val+ - val- exceeds mc"
    return True, "30 random solutions"


@check("problems")
def aho_build_consistent(rng):
    for _ in range(20):
        shapes = tree.binary_shapes(7)
        t = tree.Tree(shapes[int(rng.integers(len(shapes)))], 2)
        trips = problems.induced_triplets(t)
        b = problems.aho_build(trips, t.leaf_order())
        if problems.count_satisfied(b, trips) != len(trips):
            return False, t.to_newick()
    try:
        problems.aho_build([("a", "b", "c"), ("a", "c", "b")], "abc")
    except problems.Inconsistent:
        return True, "20 induced sets; conflict detected"
    return False, "conflict not detected"


@check("problems")
def quartet_reduction(rng):
    labels = ["a", "b", "c", "d"]
    trips = [(a, b, c) for a, b, c in itertools.permutations(labels, 3) if a < b]
    for sh in tree.binary_shapes(4):
        for perm in itertools.permutations(labels):
            t = tree.Tree(sh, 2).relabel(lambda x: perm[x])
            s = problems.attach_gamma(t, "g")
            for a, b, c in trips:
                if problems.triplet_satisfied(t, a, b, c) != problems.quartet_satisfied(s, (a, b, c, "g")):
                    return False, t.to_newick()
    return True, "all 4-leaf trees"


def run(filters=None, seed: int = 0):
    """Run checks whose module (or name) contains one of ``filters``.

    Returns a list of ``(module, name, passed, detail)``.
    """
    out = []
    for module, checks in CHECKS.items():
        for name, fn in checks:
            if filters and not any(f in module or f in name for f in filters):
                continue
            rng = np.random.default_rng(seed)
            try:
                ok, detail = fn(rng)
            except Exception as exc:  # noqa: BLE001 - report, don't crash the suite
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            out.append((module, name, bool(ok), detail))
    return out
