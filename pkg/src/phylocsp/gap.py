"""Gap instances on perfect k-ary trees, the order experiment, and related checks.

The gap instance for a payoff ``f`` of arity ``k`` lives on the ``k**d``
leaves of an ordered perfect ``k``-ary tree.  Its constraint weights are
the law of a random map: pick a level ``i`` uniformly from ``0..d-1``, a
node ``u`` uniformly among the ``k**i`` nodes of that level, and for each
``j`` a uniform leaf below the ``j``-th child of ``u``.

This module also holds the child-label divergence check and the coupled
random map between trees of different sizes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .csp import Instance, Solution, opt_given_order, value_exact
from .errors import ArgumentError, ResourceError
from .patterns import PayoffFunction, enumerate_patterns
from .registry import Registry
from .tree import Tree, build_perfect

__all__ = [
    "GapSpec",
    "lkm_weight",
    "build_gap",
    "cousins",
    "cousin_tuples",
    "satisfying_solution",
    "order_experiment",
    "child_label_divergence",
    "divergence_bound",
    "adversarial_labelings",
    "lmn_pmf",
    "total_variation",
    "optimal_coupling",
    "CoupledMap",
    "sample_coupled_L",
    "coupling_experiment",
    "cousins_indices",
    "GAP_LEAF_CAP",
    "GAP_CONSTRAINT_CAP",
]

GAP_LEAF_CAP = 81
GAP_CONSTRAINT_CAP = 10**6
LMN_CAP = 4096


@dataclass
class GapSpec:
    """Payoff plus depth; ``k`` is the payoff's arity."""

    payoff: object
    d: int
    registry: Registry = field(default_factory=Registry)

    def __post_init__(self):
        if isinstance(self.payoff, PayoffFunction):
            self.f = self.payoff
            self.name = self.registry.register(self.payoff)
        else:
            self.name = str(self.payoff)
            self.f = self.registry[self.name]
        if self.f.k < 2:
            raise ArgumentError("gap instances need arity k >= 2")
        if self.d < 1:
            raise ArgumentError("gap instances need depth d >= 1")

    @property
    def k(self) -> int:
        return self.f.k

    @property
    def m(self) -> int:
        return self.k**self.d

    def base(self) -> Tree:
        return build_perfect(self.k, self.d)


def _digits(x: int, k: int, d: int) -> list[int]:
    """Child index at each level on the root-to-leaf path of 0-based leaf ``x``."""
    out = []
    for _ in range(d):
        out.append(x % k)
        x //= k
    return out[::-1]


def _cousin_level(leaves0: Sequence[int], k: int, d: int):
    """Level of the LCA if 0-based leaves are cousins in ``build_perfect(k, d)``, else None."""
    if len(leaves0) != k or len(set(leaves0)) != k:
        return None
    digs = [_digits(x, k, d) for x in leaves0]
    i = 0
    while i < d and len({dg[i] for dg in digs}) == 1:
        i += 1
    if i == d:
        return None
    if [dg[i] for dg in digs] != list(range(k)):
        return None
    return i


def cousins(tree: Tree, leaves: Sequence) -> bool:
    """True iff ``leaves[j]`` lies below the ``j``-th child of their LCA for every ``j``.

    The LCA must have exactly ``len(leaves)`` children for the condition to be
    satisfiable with every child used.
    """
    leaves = list(leaves)
    if len(set(leaves)) != len(leaves) or len(leaves) < 2:
        return False
    nodes = [tree.node_of(x) for x in leaves]
    top = tree.lca_nodes(nodes)
    if len(tree.children[top]) < len(leaves):
        return False
    return all(tree.child_index(top, n) == j for j, n in enumerate(nodes))


def lkm_weight(leaves: Sequence[int], spec: GapSpec) -> Fraction:
    """Probability that the random map sends slot ``j`` to ``leaves[j]`` for all ``j``.

    Leaves are the labels ``1..k**d`` of ``build_perfect(k, d)``.
    """
    k, d = spec.k, spec.d
    for x in leaves:
        if not 1 <= x <= k**d:
            raise ArgumentError(f"leaf {x} not in the base tree")
    i = _cousin_level([x - 1 for x in leaves], k, d)
    if i is None:
        return Fraction(0)
    return Fraction(1, d) * Fraction(1, k**i) * Fraction(1, k ** ((d - i - 1) * k))


def cousin_tuples(k: int, d: int):
    """Yield ``(level, tuple)`` for every cousin tuple of ``build_perfect(k, d)`` (labels from 1)."""
    for i in range(d):
        sub = k ** (d - i - 1)
        for u in range(k**i):
            base = u * k ** (d - i)
            ranges = [range(base + j * sub + 1, base + (j + 1) * sub + 1) for j in range(k)]
            for tup in itertools.product(*ranges):
                yield i, tup


def _slot_permutation(f: PayoffFunction):
    """Slot order of the first binary pattern with payoff 1, or None."""
    for p in enumerate_patterns(f.k, 2):
        if f.payoff(p) == 1.0:
            return p
    return None


def build_gap(spec: GapSpec, leaf_cap: int = GAP_LEAF_CAP, constraint_cap: int = GAP_CONSTRAINT_CAP) -> Instance:
    """The gap instance: one constraint per positive-weight cousin tuple.

    Arguments are reordered so that the slots of the payoff's first
    satisfying pattern appear left to right (for the built-in payoffs this
    is the identity).
    """
    k, d = spec.k, spec.d
    m = k**d
    if m > leaf_cap:
        raise ResourceError(f"gap instance has {m} leaves, cap is {leaf_cap}", leaf_cap)
    count = sum(k**i * (k ** (d - i - 1)) ** k for i in range(d))
    if count > constraint_cap:
        raise ResourceError(f"gap instance has {count} constraints, cap is {constraint_cap}", constraint_cap)
    pat = _slot_permutation(spec.f)
    order = pat.slot_order() if pat is not None else list(range(1, k + 1))
    cons = []
    for i, tup in cousin_tuples(k, d):
        w = Fraction(1, d) * Fraction(1, k**i) * Fraction(1, k ** ((d - i - 1) * k))
        args = [None] * k
        for pos, slot in enumerate(order):
            args[slot - 1] = tup[pos]
        cons.append((spec.name, tuple(args), w))
    inst = Instance(list(range(1, m + 1)), cons, spec.registry, normalize=False)
    if inst.total_weight() != 1:
        raise AssertionError("gap weights do not sum to 1")
    return inst


def satisfying_solution(spec: GapSpec) -> Solution:
    """Replace every internal node of the base tree and its children by a copy of ``P``.

    ``P`` is the payoff's first binary pattern with payoff 1; the ``j``-th
    child is placed at ``P``'s ``j``-th leaf position.
    """
    pat = _slot_permutation(spec.f)
    if pat is None:
        raise ArgumentError(f"payoff {spec.name} has no binary pattern with payoff 1")
    shape = pat.shape()
    k, d = spec.k, spec.d

    def fill(sh, kids):
        if isinstance(sh, tuple):
            return tuple(fill(c, kids) for c in sh)
        return kids[sh]

    def build(level, first):
        if level == d:
            return first + 1
        size = k ** (d - level - 1)
        kids = [build(level + 1, first + j * size) for j in range(k)]
        return fill(shape, kids)

    return Solution(Tree(build(0, 0), 2))


@dataclass
class OrderResult:
    mean: float
    stderr: float
    values: list
    orders: list
    exact: bool = False


def order_experiment(spec: GapSpec, num_orders: int, rng=None, all_orders: bool = False,
                     cap: int = 13) -> OrderResult:
    """Statistics of ``opt_given_order`` over uniformly random leaf orders.

    With ``all_orders`` every permutation is evaluated once and the mean
    is the exact expectation.
    """
    inst = build_gap(spec)
    m = len(inst.variables)
    if m > cap:
        raise ResourceError(f"order experiment is capped at {cap} variables", cap)
    if all_orders:
        if math.factorial(m) > 10**6:
            raise ResourceError("too many orders to enumerate", 10**6)
        orders = [list(p) for p in itertools.permutations(inst.variables)]
    else:
        if rng is None:
            raise ArgumentError("rng required for sampled orders")
        orders = [list(rng.permutation(inst.variables)) for _ in range(num_orders)]
        orders = [[int(x) for x in o] for o in orders]
    exact_vals = []
    for pi in orders:
        _, sol = opt_given_order(inst, pi, cap)
        exact_vals.append(value_exact(sol, inst))
    vals = [float(v) for v in exact_vals]
    if all_orders:
        mean = float(sum(exact_vals, Fraction(0)) / len(exact_vals))
        stderr = 0.0
    else:
        arr = np.array(vals)
        mean = float(arr.mean())
        stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else math.inf
    return OrderResult(mean, stderr, vals, orders, exact=all_orders)


# ----------------------------------------------------------------------
# label divergence


def divergence_bound(q: int, d: int) -> float:
    return math.sqrt(2 * math.log2(q) / d) if q > 1 else 0.0


def child_label_divergence(k: int, d: int, labeling: Sequence[int], q: int | None = None) -> float:
    """Average L1 gap between a node's label histogram and its children's.

    ``labeling[x]`` is the label (``0..q-1``) of the ``x``-th leaf of the
    perfect ``k``-ary tree of depth ``d``.  Levels are weighted ``1/d`` and
    nodes within a level uniformly.
    """
    lab = np.asarray(labeling, dtype=np.int64)
    if lab.shape != (k**d,):
        raise ArgumentError(f"labeling must have {k**d} entries")
    q = int(lab.max()) + 1 if q is None else q
    if lab.min() < 0 or lab.max() >= q:
        raise ArgumentError("labels must lie in 0..q-1")
    onehot = np.zeros((k**d, q))
    onehot[np.arange(k**d), lab] = 1.0
    total = 0.0
    for t in range(d):
        mu_u = onehot.reshape(k**t, k ** (d - t), q).mean(axis=1)
        mu_y = onehot.reshape(k**t, k, k ** (d - t - 1), q).mean(axis=2)
        diff = np.abs(mu_y - mu_u[:, None, :]).sum(axis=-1)  # (nodes, children)
        total += diff.mean()
    return float(total / d)


def adversarial_labelings(k: int, d: int, q: int) -> dict:
    """Structured labelings that concentrate differences at chosen levels."""
    m = k**d
    idx = np.arange(m)
    top = idx // k ** (d - 1)
    return {
        "subtree": top % q,            # split by first-level subtree
        "block": (idx * q) // m,       # contiguous blocks of leaves
        "interleave": idx % q,         # alternate along the leaf order
    }


# ----------------------------------------------------------------------
# coupled random map


def _check_pmf(p, name):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or (p < 0).any() or abs(p.sum() - 1.0) > 1e-12:
        raise ArgumentError(f"{name} must be a probability vector")
    return p


def lmn_pmf(M: int, dprime: int, j: int) -> np.ndarray:
    """Law of the image of source ``j`` under the shortcut-tree map, over ``[M**dprime]``.

    ``Pr{v} = (M / N) * B(v, j) / dprime`` where ``B(v, j)`` counts base-``M``
    digits of ``v`` equal to ``j``.
    """
    if M < 2 or dprime < 1:
        raise ArgumentError("need M >= 2 and dprime >= 1")
    if not 0 <= j < M:
        raise ArgumentError(f"source index must be in 0..{M - 1}")
    N = M**dprime
    if N > LMN_CAP:
        raise ResourceError(f"N = {N} exceeds cap {LMN_CAP}", LMN_CAP)
    v = np.arange(N)
    count = np.zeros(N, dtype=np.int64)
    for _ in range(dprime):
        count += (v % M) == j
        v //= M
    return count * (M / N) / dprime


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def optimal_coupling(p, q) -> np.ndarray:
    """Joint law with marginals ``p``, ``q`` and ``Pr{X != Y} = TV(p, q)``.

    The diagonal carries ``min(p_i, q_i)``; the leftover mass is matched
    greedily in ascending index order.
    """
    p = _check_pmf(p, "p")
    q = _check_pmf(q, "q")
    if p.shape != q.shape:
        raise ArgumentError("p and q must share a domain")
    n = len(p)
    J = np.zeros((n, n))
    common = np.minimum(p, q)
    J[np.arange(n), np.arange(n)] = common
    rp = p - common
    rq = q - common
    i = j = 0
    while True:
        while i < n and rp[i] <= 0:
            i += 1
        while j < n and rq[j] <= 0:
            j += 1
        if i >= n or j >= n:
            break
        amt = min(rp[i], rq[j])
        J[i, j] += amt
        rp[i] -= amt
        rq[j] -= amt
        if rp[i] <= 1e-18:
            rp[i] = 0.0
        if rq[j] <= 1e-18:
            rq[j] = 0.0
    return J


class CoupledMap:
    """Coupling of the shortcut-tree map with an exactly uniform map ``[M] -> [N]``."""

    def __init__(self, M: int, dprime: int, eta: float = 0.0):
        if not 0.0 <= eta <= 1.0:
            raise ArgumentError("eta must lie in [0, 1]")
        self.M, self.dprime, self.eta = M, dprime, eta
        self.N = M**dprime
        uniform = np.full(self.N, 1.0 / self.N)
        self.pmfs = [lmn_pmf(M, dprime, j) for j in range(M)]
        self.tv = [total_variation(p, uniform) for p in self.pmfs]
        self.joints = [optimal_coupling(p, uniform) for p in self.pmfs]
        # conditional law of the uniform coordinate given the shortcut image
        self.cond_cdf = []
        for p, J in zip(self.pmfs, self.joints):
            with np.errstate(invalid="ignore", divide="ignore"):
                rows = np.where(p[:, None] > 0, J / p[:, None], 0.0)
            cdf = np.cumsum(rows, axis=1)
            cdf[:, -1] = 1.0
            self.cond_cdf.append(cdf)

    def marginal(self, j: int) -> np.ndarray:
        """Exact law of ``L(j)``: uniform by construction (mixed with uniform at rate eta)."""
        col = self.joints[j].sum(axis=0)
        return (1 - self.eta) * col + self.eta / self.N

    def sample(self, trials: int, rng, chunk: int = 50_000):
        """Return ``(L, X)`` arrays of shape ``(trials, M)``: coupled and shortcut images."""
        M, dp, N = self.M, self.dprime, self.N
        L = np.empty((trials, M), dtype=np.int64)
        X = np.empty((trials, M), dtype=np.int64)
        done = 0
        while done < trials:
            n = min(chunk, trials - done)
            t = rng.integers(0, dp, size=n)
            prefix = rng.integers(0, N, size=n) // (M ** (dp - t))  # uniform node at depth t
            for j in range(M):
                below = M ** (dp - t - 1)
                tail = rng.integers(0, N, size=n) % below
                x = prefix * (M ** (dp - t)) + j * below + tail
                u = rng.random(n)
                cdf = self.cond_cdf[j][x]
                y = (cdf <= u[:, None]).sum(axis=1)
                y = np.minimum(y, N - 1)
                if self.eta > 0:
                    swap = rng.random(n) < self.eta
                    y = np.where(swap, rng.integers(0, N, size=n), y)
                X[done:done + n, j] = x
                L[done:done + n, j] = y
            done += n
        return L, X


def sample_coupled_L(M: int, dprime: int, rng, eta: float = 0.0) -> np.ndarray:
    """One draw of the coupled map ``[M] -> [N]``."""
    L, _ = CoupledMap(M, dprime, eta).sample(1, rng)
    return L[0]


def cousins_indices(leaves0: np.ndarray, k: int, depth: int) -> np.ndarray:
    """Vectorised cousin test for 0-based leaf indices of shape (..., k)."""
    digs = np.stack([(leaves0 // k ** (depth - 1 - lvl)) % k for lvl in range(depth)], axis=-1)  # (..., k, depth)
    same = (digs == digs[..., :1, :]).all(axis=-2)  # (..., depth)
    # first level where they differ
    diff_level = np.argmin(same, axis=-1)
    all_same = same.all(axis=-1)
    at = np.take_along_axis(digs, np.broadcast_to(diff_level[..., None, None], digs.shape[:-1] + (1,)), -1)[..., 0]
    ok = (at == np.arange(k)).all(axis=-1)
    return ok & ~all_same


def coupling_experiment(M: int, dprime: int, trials: int, rng, k: int = 2, eta: float = 0.0) -> dict:
    """Uniformity of ``L(0)`` and cousin preservation for every cousin tuple of ``T_M``."""
    from scipy.stats import chisquare

    dM = round(math.log(M, k))
    if k**dM != M:
        raise ArgumentError(f"M = {M} must be a power of k = {k}")
    cm = CoupledMap(M, dprime, eta)
    L, X = cm.sample(trials, rng)
    counts = np.bincount(L[:, 0], minlength=cm.N)
    chi = chisquare(counts)
    exact_uniform = max(float(np.abs(cm.marginal(j) - 1.0 / cm.N).max()) for j in range(M))
    tuples = np.array([tup for _, tup in cousin_tuples(k, dM)], dtype=np.int64) - 1
    depth_N = dM * dprime
    rates = []
    for tup in tuples:
        rates.append(float(cousins_indices(L[:, tup], k, depth_N).mean()))
    shortcut_ok = all(bool(cousins_indices(X[:, tup], k, depth_N).all()) for tup in tuples)
    tv = max(cm.tv)
    return {
        "M": M, "dprime": dprime, "N": cm.N, "k": k, "trials": trials, "eta": eta,
        "tv_per_coordinate": tv,
        "max_marginal_deviation": exact_uniform,
        "chi2_statistic": float(chi.statistic), "chi2_pvalue": float(chi.pvalue),
        "cousin_rates": rates, "min_cousin_rate": min(rates),
        "cousin_bound": 1 - k * tv,
        "shortcut_preserves_cousins": shortcut_ok,
    }
