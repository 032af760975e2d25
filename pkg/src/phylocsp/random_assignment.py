"""Biased random assignment: sampling, exact and Monte Carlo payoffs, threshold search.

A measure is a finite full binary *skeleton* with a probability on each
skeleton leaf.  Every variable independently picks a skeleton leaf; inside
a leaf the variables are split recursively by fair coin flips until each
is alone.  Equivalently each internal skeleton node ``v`` sends a variable
left with probability ``p_v = mass(left) / mass(v)``.

Because variables are treated symmetrically, the law of the pattern
matched by ``k`` fresh variables is exchangeable: its shape has some
distribution ``D`` and the labelling is uniform.  So
``E[f] = sum_s D(s) * mean over labellings of f(s)``, and ``D`` obeys a
short binomial recursion over the skeleton.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .codes import codec
from .csp import Instance, Solution
from .errors import ArgumentError, ResourceError
from .patterns import MAX_ENUM_ARITY, Pattern, PayoffFunction, enumerate_patterns
from .tree import Tree, binary_shapes

__all__ = [
    "BiasedMeasure",
    "ThresholdReport",
    "sample_solution",
    "uniform_split_pattern_dist",
    "uniform_shape_dist",
    "alpha_exact",
    "alpha_mc",
    "instance_mc",
    "alpha_opt_search",
    "mixture_threshold",
    "MAX_SKELETON_LEAVES",
]

MAX_SKELETON_LEAVES = 20000
_TRIE_BITS = 52  # random bits per word; two words per item


class BiasedMeasure:
    """Skeleton tree plus a distribution over its leaves.

    Stored as node arrays (preorder, root 0) so very deep caterpillars do
    not hit recursion limits.  Use the constructors rather than ``__init__``.
    """

    def __init__(self, left: Sequence[int], right: Sequence[int], leaf_probs: dict, names: dict | None = None):
        n = len(left)
        if n == 0 or len(right) != n:
            raise ArgumentError("malformed skeleton")
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.depth = np.zeros(n, dtype=np.int64)
        for v in range(n):
            for c in (self.left[v], self.right[v]):
                if c >= 0:
                    if c <= v:
                        raise ArgumentError("skeleton nodes must be in preorder")
                    self.depth[c] = self.depth[v] + 1
        self.leaf_nodes = self._leaves_in_order()
        if len(self.leaf_nodes) > MAX_SKELETON_LEAVES:
            raise ResourceError(f"skeleton exceeds {MAX_SKELETON_LEAVES} leaves", MAX_SKELETON_LEAVES)
        probs = np.array([float(leaf_probs.get(int(v), 0.0)) for v in self.leaf_nodes])
        if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-12:
            raise ArgumentError(f"leaf probabilities must be nonnegative and sum to 1 (sum={probs.sum()!r})")
        self.probs = probs
        self.names = names or {}
        mass = np.zeros(n)
        mass[self.leaf_nodes] = probs
        for v in range(n - 1, -1, -1):
            if self.left[v] >= 0:
                mass[v] = mass[self.left[v]] + mass[self.right[v]]
        self.mass = mass
        with np.errstate(invalid="ignore", divide="ignore"):
            p = np.where(mass > 0, mass[np.maximum(self.left, 0)] / mass, 0.5)
        self.p_left = np.where(self.left >= 0, p, np.nan)

    def _leaves_in_order(self) -> np.ndarray:
        out, stack = [], [0]
        while stack:
            v = stack.pop()
            if self.left[v] < 0:
                out.append(v)
            else:
                stack.append(int(self.right[v]))
                stack.append(int(self.left[v]))
        return np.array(out, dtype=np.int64)

    # constructors ------------------------------------------------------
    @classmethod
    def uniform(cls) -> "BiasedMeasure":
        """Single-leaf skeleton: plain uniform recursive splitting."""
        return cls([-1], [-1], {0: 1.0})

    @classmethod
    def from_tree(cls, skeleton: Tree, probs) -> "BiasedMeasure":
        """``probs`` is a sequence in leaf order or a dict keyed by leaf label."""
        if not skeleton.is_full_binary():
            raise ArgumentError("skeleton must be full binary")
        labels = skeleton.leaf_order()
        if isinstance(probs, dict):
            probs = [probs.get(x, 0.0) for x in labels]
        if len(probs) != len(labels):
            raise ArgumentError("one probability per skeleton leaf required")
        left = [c[0] if c else -1 for c in skeleton.children]
        right = [c[1] if c else -1 for c in skeleton.children]
        lp = {n: float(p) for n, p in zip(skeleton.leaf_nodes, probs)}
        names = {n: skeleton.label[n] for n in skeleton.leaf_nodes}
        return cls(left, right, lp, names)

    @classmethod
    def from_split_probs(cls, depth: int, p_left: Sequence[float]) -> "BiasedMeasure":
        """Perfect depth-``depth`` skeleton with the given left-probability per internal node.

        Internal nodes are listed in preorder.
        """
        n_int = 2**depth - 1
        if len(p_left) != n_int:
            raise ArgumentError(f"need {n_int} split probabilities")
        left, right, probs = [], [], {}
        it = iter(p_left)

        def build(level, mass):
            v = len(left)
            left.append(-1)
            right.append(-1)
            if level == depth:
                probs[v] = mass
                return v
            p = float(next(it))
            if not 0.0 <= p <= 1.0:
                raise ArgumentError("split probabilities must lie in [0, 1]")
            left[v] = build(level + 1, mass * p)
            right[v] = build(level + 1, mass * (1.0 - p))
            return v

        build(0, 1.0)
        total = sum(probs.values())
        probs = {v: m / total for v, m in probs.items()}
        return cls(left, right, probs)

    @classmethod
    def caterpillar(cls, delta: float, depth: int | None = None, side: str = "left",
                    tail: float = 1e-12) -> "BiasedMeasure":
        """Every spine node sends a variable off the spine with probability ``delta``.

        ``side='left'``: the spine continues to the left and each right child
        is a leaf, so variables peel off one by one to the right.  The last
        spine leaf keeps mass ``(1-delta)**depth``; by default ``depth`` is
        chosen so that this residue is below ``tail``.
        """
        if not 0.0 < delta < 1.0:
            raise ArgumentError("delta must lie in (0, 1)")
        if depth is None:
            depth = max(1, math.ceil(math.log(tail) / math.log1p(-delta)))
        if depth < 1 or depth + 1 > MAX_SKELETON_LEAVES:
            raise ResourceError(f"caterpillar depth must be in [1, {MAX_SKELETON_LEAVES - 1}]", MAX_SKELETON_LEAVES)
        if side not in ("left", "right"):
            raise ArgumentError("side must be 'left' or 'right'")
        n = 2 * depth + 1
        spine_mass = 1.0
        left = [-1] * n
        right = [-1] * n
        probs = {}
        if side == "left":
            # preorder: spine (0..depth) first, then off leaves from deepest to shallowest
            for t in range(depth):
                off = n - 1 - t
                left[t], right[t] = t + 1, off
                probs[off] = spine_mass * delta
                spine_mass *= 1.0 - delta
            probs[depth] = spine_mass
        else:
            # preorder: spine node, its off leaf, next spine node, ...
            for t in range(depth):
                s, off, nxt = 2 * t, 2 * t + 1, 2 * t + 2
                left[s], right[s] = off, nxt
                probs[off] = spine_mass * delta
                spine_mass *= 1.0 - delta
            probs[2 * depth] = spine_mass
        return cls(left, right, probs)

    # queries -----------------------------------------------------------
    @property
    def n_leaves(self) -> int:
        return len(self.leaf_nodes)

    def is_uniform(self) -> bool:
        return self.n_leaves == 1

    def to_newick(self) -> str:
        """Skeleton as Newick; leaves are named ``L0, L1, ...`` in left-to-right order."""
        name = {int(v): self.names.get(int(v), f"L{i}") for i, v in enumerate(self.leaf_nodes)}
        out = []
        stack = [(0, True)]
        while stack:
            v, first = stack.pop()
            if v == -1:
                out.append(")")
                continue
            if not first:
                out.append(",")
            if self.left[v] < 0:
                out.append(str(name[v]))
            else:
                out.append("(")
                stack.append((-1, True))
                stack.append((int(self.right[v]), False))
                stack.append((int(self.left[v]), True))
        return "".join(out) + ";"

    def leaf_lca_depth(self) -> np.ndarray:
        """Matrix of LCA depths between skeleton leaves (in leaf order)."""
        L = self.n_leaves
        parent = np.full(len(self.left), -1)
        for v in range(len(self.left)):
            if self.left[v] >= 0:
                parent[self.left[v]] = v
                parent[self.right[v]] = v
        span_lo = np.zeros(len(self.left), dtype=np.int64)
        span_hi = np.zeros(len(self.left), dtype=np.int64)
        pos = {int(v): i for i, v in enumerate(self.leaf_nodes)}
        for v in range(len(self.left) - 1, -1, -1):
            if self.left[v] < 0:
                span_lo[v] = span_hi[v] = pos[v]
            else:
                span_lo[v] = span_lo[self.left[v]]
                span_hi[v] = span_hi[self.right[v]]
        out = np.zeros((L, L), dtype=np.int64)
        for v in range(len(self.left)):
            lo, hi = span_lo[v], span_hi[v] + 1
            out[lo:hi, lo:hi] = self.depth[v]
        return out

    def to_dict(self) -> dict:
        return {
            "skeleton": self.to_newick(),
            "leaf_probs": [float(p) for p in self.probs],
            "n_leaves": int(self.n_leaves),
        }

    def __repr__(self):
        return f"<BiasedMeasure leaves={self.n_leaves}>"


# ----------------------------------------------------------------------
# exact shape distributions


@lru_cache(maxsize=None)
def _uniform_shape_dist_exact(k: int) -> tuple:
    if k == 1:
        return (Fraction(1),)
    denom = 2**k - 2
    out = []
    for a in range(1, k):
        w = Fraction(math.comb(k, a), denom)
        left = _uniform_shape_dist_exact(a)
        right = _uniform_shape_dist_exact(k - a)
        out.extend(w * x * y for x in left for y in right)
    return tuple(out)


def uniform_shape_dist(k: int) -> np.ndarray:
    """Probability of each ordered binary shape (``binary_shapes(k)`` order) under fair splitting."""
    if k < 1:
        raise ArgumentError("k must be positive")
    return np.array([float(x) for x in _uniform_shape_dist_exact(k)])


def uniform_split_pattern_dist(k: int) -> dict:
    """Exact law of the ordered pattern of ``k`` items under fair recursive splitting.

    Returns ``{Pattern: Fraction}``.  Each shape's mass is spread evenly
    over the ``k!`` labellings.
    """
    if k > MAX_ENUM_ARITY:
        raise ResourceError(f"pattern distributions are capped at k <= {MAX_ENUM_ARITY}", MAX_ENUM_ARITY)
    shapes = _uniform_shape_dist_exact(k)
    pats = enumerate_patterns(k, 2)
    n_s = len(shapes)
    kf = math.factorial(k)
    return {p: shapes[i % n_s] / kf for i, p in enumerate(pats)}


def _shape_mean(f: PayoffFunction) -> np.ndarray:
    """Average payoff of each shape over the ``k!`` labellings."""
    if f.k > MAX_ENUM_ARITY:
        raise ResourceError(f"alpha_exact is capped at arity {MAX_ENUM_ARITY}", MAX_ENUM_ARITY)
    cd = codec(f.k)
    return f.vector(2).reshape(cd.n_perms, cd.n_shapes).mean(axis=0)


def measure_shape_dist(measure: BiasedMeasure, k: int) -> np.ndarray:
    """Law of the shape of ``k`` fresh variables under ``measure``."""
    if k < 1:
        raise ArgumentError("k must be positive")
    uni = [None] + [uniform_shape_dist(j) for j in range(1, k + 1)]
    n = len(measure.left)
    dist = [None] * n
    binom = [[math.comb(j, a) for a in range(j + 1)] for j in range(k + 1)]
    for v in range(n - 1, -1, -1):
        lc, rc = measure.left[v], measure.right[v]
        if lc < 0:
            dist[v] = uni
            continue
        p = measure.p_left[v]
        DL, DR = dist[lc], dist[rc]
        cur = [None, np.ones(1)]
        for j in range(2, k + 1):
            vec = np.concatenate([
                binom[j][a] * p**a * (1 - p) ** (j - a) * np.outer(DL[a], DR[j - a]).ravel()
                for a in range(1, j)
            ])
            vec = vec + (1 - p) ** j * DR[j] + p**j * DL[j]
            cur.append(vec)
        dist[v] = cur
        dist[lc] = dist[rc] = None  # free memory on deep skeletons
    return dist[0][k]


def alpha_exact(measure: BiasedMeasure, f: PayoffFunction) -> float:
    """Exact expected payoff of ``f`` on ``k`` fresh variables under ``measure``."""
    fbar = _shape_mean(f)
    return float(np.clip(measure_shape_dist(measure, f.k) @ fbar, 0.0, 1.0))


# ----------------------------------------------------------------------
# sampling


def _split(items: list, rng) -> object:
    """Fair recursive splitting; splits that leave one side empty are redrawn."""
    if len(items) == 1:
        return items[0]
    while True:
        coins = rng.random(len(items)) < 0.5
        if coins.any() and not coins.all():
            break
    left = [x for x, c in zip(items, coins) if c]
    right = [x for x, c in zip(items, coins) if not c]
    return (_split(left, rng), _split(right, rng))


def sample_solution(measure: BiasedMeasure, variables: Sequence, rng) -> Solution:
    """Draw one solution of the biased random assignment."""
    variables = list(variables)
    if not variables:
        raise ArgumentError("need at least one variable")
    slots = rng.choice(measure.n_leaves, size=len(variables), p=measure.probs)
    buckets: dict = {}
    for x, s in zip(variables, slots):
        buckets.setdefault(int(measure.leaf_nodes[s]), []).append(x)

    nested = _build_iter(measure, buckets, rng)
    return Solution(Tree(nested, 2))


def _build_iter(measure, buckets, rng):
    n = len(measure.left)
    occupied = np.zeros(n, dtype=bool)
    for v in buckets:
        occupied[v] = True
    for v in range(n - 1, -1, -1):
        if measure.left[v] >= 0:
            occupied[v] = occupied[measure.left[v]] or occupied[measure.right[v]]
    result = {}
    for v in range(n - 1, -1, -1):
        if not occupied[v]:
            continue
        if measure.left[v] < 0:
            result[v] = _split(buckets[v], rng)
        else:
            parts = [result.pop(int(c)) for c in (measure.left[v], measure.right[v]) if occupied[c]]
            result[v] = parts[0] if len(parts) == 1 else tuple(parts)
    return result[0]


class _ItemSampler:
    """Vectorised sampler of (skeleton leaf, random bit string) keys."""

    def __init__(self, measure: BiasedMeasure):
        self.measure = measure
        self.leaf_depth = measure.depth[measure.leaf_nodes]
        self.lca = measure.leaf_lca_depth()
        self.cdf = np.cumsum(measure.probs)
        self.cdf[-1] = 1.0

    def draw(self, shape, rng):
        u = rng.random(shape)
        leaf = np.searchsorted(self.cdf, u, side="right")
        leaf = np.minimum(leaf, len(self.cdf) - 1)
        w1 = rng.integers(0, 2**_TRIE_BITS, size=shape, dtype=np.int64)
        w2 = rng.integers(0, 2**_TRIE_BITS, size=shape, dtype=np.int64)
        return leaf, w1, w2

    def pair_depth(self, la, a1, a2, lb, b1, b2):
        """LCA depth of two items given their keys (arrays of equal shape)."""
        same = la == lb
        x1 = np.bitwise_xor(a1, b1).astype(np.float64)
        x2 = np.bitwise_xor(a2, b2).astype(np.float64)
        bl1 = np.frexp(x1)[1]
        bl2 = np.frexp(x2)[1]
        common = np.where(x1 > 0, _TRIE_BITS - bl1, _TRIE_BITS + (_TRIE_BITS - bl2))
        return np.where(same, self.leaf_depth[la] + common, self.lca[la, lb])

    def pattern_index(self, leaf, w1, w2, k):
        """Pattern indices (``enumerate_patterns(k)`` order) for keys of shape (..., k)."""
        cd = codec(k)
        order = np.lexsort((w2, w1, leaf), axis=-1)
        perm = cd.perm_ranks(order)
        if k == 1:
            return perm
        L = np.take_along_axis(leaf, order, -1)
        A = np.take_along_axis(w1, order, -1)
        B = np.take_along_axis(w2, order, -1)
        d = self.pair_depth(L[..., :-1], A[..., :-1], B[..., :-1], L[..., 1:], A[..., 1:], B[..., 1:])
        return perm * cd.n_shapes + cd.shape_ids(d)


def alpha_mc(measure: BiasedMeasure, f: PayoffFunction, trials: int, rng, chunk: int = 200_000):
    """Monte Carlo estimate of ``alpha_exact`` with a 95% normal half-width."""
    if trials < 1:
        raise ArgumentError("trials must be >= 1")
    sampler = _ItemSampler(measure)
    vec = f.vector(2)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        leaf, w1, w2 = sampler.draw((m, f.k), rng)
        vals = vec[sampler.pattern_index(leaf, w1, w2, f.k)]
        total += vals.sum()
        total_sq += (vals * vals).sum()
        done += m
    mean = total / trials
    if trials == 1:
        return float(mean), math.inf
    var = max(total_sq / trials - mean * mean, 0.0) * trials / (trials - 1)
    return float(mean), float(1.96 * math.sqrt(var / trials))


def instance_mc(measure: BiasedMeasure, inst: Instance, trials: int, rng, chunk: int | None = None):
    """Mean value of ``inst`` over random solutions drawn from ``measure``.

    Returns ``(mean, half_width, per_trial_values)``.
    """
    if trials < 1:
        raise ArgumentError("trials must be >= 1")
    n = len(inst.variables)
    sampler = _ItemSampler(measure)
    groups = [(inst.registry[name].k, args, ws, inst.registry[name].vector(2))
              for name, (args, ws) in inst.groups().items()]
    width = max(1, sum(a.size for _, a, _, _ in groups))
    chunk = chunk or max(1, 2_000_000 // width)
    out = np.empty(trials)
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        leaf, w1, w2 = sampler.draw((m, n), rng)
        vals = np.zeros(m)
        for k, args, ws, vec in groups:
            idx = sampler.pattern_index(leaf[:, args], w1[:, args], w2[:, args], k)
            vals += (vec[idx] * ws).sum(axis=-1)
        out[done:done + m] = vals
        done += m
    mean = float(out.mean())
    hw = float(1.96 * out.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    return mean, hw, out


# ----------------------------------------------------------------------
# threshold search


@dataclass
class ThresholdReport:
    payoff: str
    alpha: float
    measure: BiasedMeasure
    grid: dict = field(default_factory=dict)
    half_width: float | None = None

    def to_dict(self) -> dict:
        d = {"payoff": self.payoff, "alpha": self.alpha, "grid": self.grid}
        d.update(self.measure.to_dict())
        if self.half_width is not None:
            d["mc_half_width"] = self.half_width
        return d


def _objective(terms):
    """``terms``: list of (k, fbar, weight); returns measure -> weighted payoff."""
    def obj(measure):
        return sum(w * float(measure_shape_dist(measure, k) @ fbar) for k, fbar, w in terms)
    return obj


def _coordinate_ascent(obj, depth: int, step: float, refine: int):
    n_int = 2**depth - 1
    p = np.full(n_int, 0.5)
    best = obj(BiasedMeasure.from_split_probs(depth, p))
    evals = 1
    grid = np.round(np.arange(0.0, 1.0 + step / 2, step), 12)
    for level in range(refine + 1):
        improved = True
        while improved:
            improved = False
            for i in range(n_int):
                cur = p[i]
                cands = grid if level == 0 else np.clip(cur + step * np.arange(-2, 3), 0.0, 1.0)
                for c in cands:
                    if c == cur:
                        continue
                    p[i] = c
                    val = obj(BiasedMeasure.from_split_probs(depth, p))
                    evals += 1
                    if val > best + 1e-12:
                        best, cur, improved = val, c, True
                p[i] = cur
        step /= 4
    return best, BiasedMeasure.from_split_probs(depth, p), evals


def _caterpillar_scan(obj, step: float):
    cands = sorted({round(step * i, 12) for i in range(1, int(round(0.5 / step)) + 1)}
                   | {step / 2**e for e in range(1, 5)})
    best, best_m, best_d = -1.0, None, None
    for side in ("left", "right"):
        for delta in cands:
            m = BiasedMeasure.caterpillar(delta, side=side, tail=1e-9)
            val = obj(m)
            if val > best + 1e-12:
                best, best_m, best_d = val, m, (side, delta)
    return best, best_m, best_d, 2 * len(cands)


def _search(terms, name: str, skeleton_depth_cap: int, grid_resolution: float, refine: int,
            caterpillars: bool) -> ThresholdReport:
    if skeleton_depth_cap < 0 or not 0 < grid_resolution <= 0.5:
        raise ArgumentError("need skeleton_depth_cap >= 0 and 0 < grid_resolution <= 1/2")
    obj = _objective(terms)
    best = obj(BiasedMeasure.uniform())
    best_m = BiasedMeasure.uniform()
    meta = {"family": "uniform", "skeleton_depth_cap": skeleton_depth_cap,
            "grid_resolution": grid_resolution, "refine_rounds": refine}
    evals = 1
    for depth in range(1, skeleton_depth_cap + 1):
        val, m, e = _coordinate_ascent(obj, depth, grid_resolution, refine)
        evals += e
        if val > best + 1e-12:
            best, best_m = val, m
            meta["family"] = f"perfect-depth-{depth}"
    if caterpillars:
        val, m, (side, delta), e = _caterpillar_scan(obj, grid_resolution)
        evals += e
        if val > best + 1e-12:
            best, best_m = val, m
            meta["family"] = f"caterpillar-{side}"
            meta["delta"] = delta
    meta["evaluations"] = evals
    return ThresholdReport(name, float(min(max(best, 0.0), 1.0)), best_m, meta)


def alpha_opt_search(f: PayoffFunction, skeleton_depth_cap: int = 4, grid_resolution: float = 0.05,
                     refine: int = 2, caterpillars: bool = True) -> ThresholdReport:
    """Grid search for ``sup_rho alpha_rho(f)``.

    Searches split probabilities on perfect skeletons of depth up to
    ``skeleton_depth_cap`` (every full binary skeleton of that depth is a
    special case, since fair splitting equals ``p = 1/2`` below a node) by
    coordinate ascent on a ``grid_resolution`` grid with local refinement,
    plus deep biased caterpillars with ``delta`` on the same grid.
    """
    return _search([(f.k, _shape_mean(f), 1.0)], f.name or "payoff", skeleton_depth_cap,
                   grid_resolution, refine, caterpillars)


def mixture_threshold(payoffs: Sequence[PayoffFunction], mu: Sequence[float], skeleton_depth_cap: int = 4,
                      grid_resolution: float = 0.05, refine: int = 2, caterpillars: bool = True) -> ThresholdReport:
    """Grid-search ``sup_rho sum_i mu_i alpha_rho(f_i)`` with one shared measure."""
    mu = [float(m) for m in mu]
    if len(mu) != len(payoffs) or any(m < 0 for m in mu) or abs(sum(mu) - 1.0) > 1e-12:
        raise ArgumentError("mu must be a probability vector matching the payoffs")
    terms = [(f.k, _shape_mean(f), m) for f, m in zip(payoffs, mu) if m > 0]
    name = "+".join(f"{m:g}*{f.name or 'payoff'}" for f, m in zip(payoffs, mu))
    return _search(terms, name, skeleton_depth_cap, grid_resolution, refine, caterpillars)
