"""Coarse solutions: few leaves, coloured, many variables per leaf.

A coarse solution maps variables onto a small binary tree whose leaves
carry colours.  Constraints whose arguments land on distinct colours are
scored on the small tree; any colour collision scores 0 in ``val-`` and 1
in ``val+``.  :func:`coarsen` turns a full solution into a coarse one
without losing value in ``val+``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .csp import GaifmanGraph, Instance, Solution, gaifman
from .errors import ArgumentError
from .patterns import match_pattern
from .tree import Tree, restrict

__all__ = [
    "CoarseSolution",
    "is_in_class",
    "val_pm",
    "coarsen",
    "mc_weight",
    "m_star",
    "monochrome_experiment",
    "max_mc_given_order",
    "fixed_coloring_experiment",
    "brackets_preserved",
]


@dataclass
class CoarseSolution:
    small_tree: Tree
    assignment: dict  # variable -> small-tree leaf
    color: dict  # small-tree leaf -> colour id
    labels: dict = field(default_factory=dict)  # variable -> label (diagnostics only)

    def __post_init__(self):
        leaves = set(self.small_tree.leaf_order())
        for v, leaf in self.assignment.items():
            if leaf not in leaves:
                raise ArgumentError(f"variable {v!r} mapped to unknown leaf {leaf!r}")
        missing = leaves - set(self.color)
        if missing:
            raise ArgumentError(f"leaves without colour: {sorted(map(str, missing))}")

    def color_of(self, var):
        return self.color[self.assignment[var]]

    def n_colors(self) -> int:
        return len(set(self.color.values()))

    def n_labels(self) -> int:
        return self.small_tree.n_leaves


def _runs(seq) -> int:
    """Number of maximal runs of equal values."""
    return sum(1 for i, x in enumerate(seq) if i == 0 or x != seq[i - 1])


def is_in_class(xi: CoarseSolution, eps: float, q: float, pi: Sequence, r: int | None = None) -> bool:
    """Membership in the class of coarse solutions for ``(eps, q, pi)``.

    Checks: at most ``q`` leaves; every colour used by at most ``eps*|V|``
    variables; variables sharing a leaf are consecutive in ``pi``.  With
    ``r`` given, each colour class must also be a union of at most ``2r``
    consecutive groups.
    """
    pi = list(pi)
    if set(pi) != set(xi.assignment) or len(pi) != len(xi.assignment):
        raise ArgumentError("coarse solution must cover exactly the variables of pi")
    n = len(pi)
    if xi.small_tree.n_leaves > q + 1e-9:
        return False
    sizes: dict = {}
    for v in pi:
        c = xi.color_of(v)
        sizes[c] = sizes.get(c, 0) + 1
    if max(sizes.values()) > eps * n + 1e-9:
        return False
    leaves = [xi.assignment[v] for v in pi]
    if _runs(leaves) != len(set(leaves)):
        return False
    if r is not None:
        colors = [xi.color_of(v) for v in pi]
        groups: dict = {}
        for i, c in enumerate(colors):
            if i == 0 or c != colors[i - 1]:
                groups[c] = groups.get(c, 0) + 1
        if max(groups.values()) > 2 * r:
            return False
    return True


def val_pm(xi: CoarseSolution, inst: Instance):
    """``(val-, val+)`` of ``xi``; exact fractions when the instance weights are."""
    zero = Fraction(0) if inst.exact else 0.0
    lo = hi = zero
    tree = xi.small_tree
    for c in inst.constraints:
        cols = [xi.color_of(v) for v in c.args]
        w = c.weight
        if len(set(cols)) == len(cols):
            pat = match_pattern(tree, [xi.assignment[v] for v in c.args])
            p = inst.payoff(c.payoff).payoff(pat)
            if inst.exact:
                p = Fraction(p)
            lo += w * p
            hi += w * p
        else:
            hi += w
    total = inst.total_weight()
    return lo / total, hi / total


def brackets_preserved(phi: Solution, xi: CoarseSolution, inst: Instance) -> bool:
    """Every constraint with distinct colours matches the same pattern in ``phi`` and ``xi``."""
    for c in inst.constraints:
        cols = [xi.color_of(v) for v in c.args]
        if len(set(cols)) != len(cols):
            continue
        a = match_pattern(phi.tree, [phi.leaf_of(v) for v in c.args])
        b = match_pattern(xi.small_tree, [xi.assignment[v] for v in c.args])
        if a != b:
            return False
    return True


def coarsen(phi: Solution, eps: float) -> CoarseSolution:
    """Coarse solution from a full binary solution ``phi``.

    Nodes are visited in post-order.  A node is processed if it is the root,
    if both of its subtrees contain processed nodes, or if more than
    ``eps*|V|/2`` leaves below it are still unlabelled.  Processing a node
    introduces one colour and up to four labels for the unlabelled leaves
    below it; a processed leaf gets a single label of its own.  Each label
    is then represented by the leftmost leaf carrying it.
    """
    tree = phi.tree
    n = tree.n_leaves
    if not eps > 1.0 / n:
        raise ArgumentError(f"eps must exceed 1/|V| = {1.0 / n:.6g}")
    if not tree.is_full_binary():
        raise ArgumentError("coarsen needs a full binary tree")
    half = eps * n / 2.0
    order = tree.leaf_order()
    label_at = [None] * n  # by leaf position
    label_color: dict = {}
    # top processed node in each subtree (None if no processed node)
    top = [None] * tree.n_nodes
    unlabelled = [0] * tree.n_nodes

    def post(root):
        stack = [(root, False)]
        while stack:
            v, seen = stack.pop()
            if seen or tree.is_leaf(v):
                yield v
            else:
                stack.append((v, True))
                for c in reversed(tree.children[v]):
                    stack.append((c, False))

    color = 0
    for u in post(tree.root):
        kids = tree.children[u]
        if not kids:
            unlabelled[u] = 1
            if u == tree.root or 1 > half:
                lo, _ = tree.leaf_span(u)
                label_at[lo] = (u, "L")
                label_color[(u, "L")] = color
                color += 1
                unlabelled[u] = 0
                top[u] = u
            continue
        left, right = kids
        unlabelled[u] = unlabelled[left] + unlabelled[right]
        process = (
            u == tree.root
            or (top[left] is not None and top[right] is not None)
            or unlabelled[u] > half
        )
        if not process:
            top[u] = top[left] if top[left] is not None else top[right]
            continue
        for side, child in (("L", left), ("R", right)):
            lo, hi = tree.leaf_span(child)
            if top[child] is None:
                cut_lo = cut_hi = hi
            else:
                cut_lo, cut_hi = tree.leaf_span(top[child])
            for pos in range(lo, hi):
                if label_at[pos] is not None:
                    continue
                name = (u, side + ("L" if pos < cut_lo else "R"))
                label_at[pos] = name
                label_color[name] = color
        color += 1
        unlabelled[u] = 0
        top[u] = u
    # leftmost representative per label
    rep: dict = {}
    for pos, name in enumerate(label_at):
        if name is None:
            raise AssertionError("leaf left unlabelled")
        rep.setdefault(name, order[pos])
    small = restrict(tree, set(rep.values()))
    leaf_var = {phi.leaf_of(v): v for v in phi.mapping}
    assignment = {}
    labels = {}
    for pos, name in enumerate(label_at):
        var = leaf_var[order[pos]]
        assignment[var] = rep[name]
        labels[var] = name
    colors = {rep[name]: label_color[name] for name in rep}
    return CoarseSolution(small, assignment, colors, labels)


# ----------------------------------------------------------------------
# monochromatic edges


def mc_weight(xi: CoarseSolution, H: GaifmanGraph) -> float:
    """Total weight of edges of ``H`` whose endpoints share a colour under ``xi``."""
    total = 0.0
    for (x, y), w in H.edges():
        if xi.color_of(x) == xi.color_of(y):
            total += float(w)
    return total


def m_star(q: int, eps: float, C: float = 1.0) -> int:
    return math.ceil(C * q * math.log(q / eps) / eps**2)


def _weight_matrix(H: GaifmanGraph, pi: Sequence) -> np.ndarray:
    idx = {v: i for i, v in enumerate(pi)}
    m = len(pi)
    W = np.zeros((m, m))
    for (x, y), w in H.edges():
        i, j = idx[x], idx[y]
        W[i, j] += w
        W[j, i] += w
    return W


def _set_partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def _exact_max(W: np.ndarray, eps: float, q: int):
    """Max monochromatic weight over colourings of ``0..m-1`` with <= q consecutive groups.

    Returns ``(best, colour per position)`` or ``(None, None)`` if infeasible.
    """
    m = W.shape[0]
    cap = eps * m + 1e-9
    P = np.zeros((m + 1, m + 1))
    P[1:, 1:] = W.cumsum(0).cumsum(1)
    best, best_col = None, None
    for g in range(1, min(q, m) + 1):
        combos = list(itertools.combinations(range(1, m), g - 1))
        cuts = np.array(combos, dtype=np.int64).reshape(len(combos), g - 1)
        bounds = np.concatenate(
            [np.zeros((len(cuts), 1), np.int64), cuts, np.full((len(cuts), 1), m, np.int64)], axis=1
        )
        lo, hi = bounds[:, :-1], bounds[:, 1:]
        sizes = hi - lo
        # block sums between every pair of groups, shape (B, g, g); pairs counted twice off-diagonal
        a0, a1 = lo[:, :, None], hi[:, :, None]
        b0, b1 = lo[:, None, :], hi[:, None, :]
        block = P[a1, b1] - P[a0, b1] - P[a1, b0] + P[a0, b0]
        for part in _set_partitions(list(range(g))):
            size_ok = np.ones(len(cuts), bool)
            val = np.zeros(len(cuts))
            for cls in part:
                size_ok &= sizes[:, cls].sum(axis=1) <= cap
                sub = block[:, cls][:, :, cls]
                val += sub.sum(axis=(1, 2)) / 2.0
            if not size_ok.any():
                continue
            val = np.where(size_ok, val, -np.inf)
            i = int(np.argmax(val))
            if best is None or val[i] > best + 1e-15:
                best = float(val[i])
                col = np.empty(m, np.int64)
                for c, cls in enumerate(part):
                    for grp in cls:
                        col[lo[i, grp]:hi[i, grp]] = c
                best_col = col
    return best, best_col


def _greedy_max(W: np.ndarray, eps: float, q: int):
    """Heuristic for larger q: equal groups, then merge pairs greedily under the size cap."""
    m = W.shape[0]
    cap = eps * m + 1e-9
    g = min(q, m)
    edges = np.linspace(0, m, g + 1).round().astype(int)
    classes = [list(range(edges[i], edges[i + 1])) for i in range(g) if edges[i + 1] > edges[i]]
    if any(len(c) > cap for c in classes):
        return None, None
    while True:
        best_gain, pair = 0.0, None
        for a, b in itertools.combinations(range(len(classes)), 2):
            if len(classes[a]) + len(classes[b]) > cap:
                continue
            gain = W[np.ix_(classes[a], classes[b])].sum()
            if gain > best_gain:
                best_gain, pair = gain, (a, b)
        if pair is None:
            break
        a, b = pair
        classes[a] = classes[a] + classes[b]
        del classes[b]
    col = np.empty(m, np.int64)
    val = 0.0
    for c, cls in enumerate(classes):
        col[cls] = c
        val += W[np.ix_(cls, cls)].sum() / 2.0
    return float(val), col


def max_mc_given_order(H: GaifmanGraph, pi: Sequence, eps: float, q: int, exact_q: int = 5):
    """Largest monochromatic weight over admissible colourings for the order ``pi``."""
    W = _weight_matrix(H, pi)
    if q <= exact_q:
        return _exact_max(W, eps, q)
    return _greedy_max(W, eps, q)


@dataclass
class MonochromeReport:
    eps: float
    q: int
    n_vars: int
    weight_E: float
    values: list
    mean: float
    stderr: float
    bound: float
    m_star: int
    C: float
    bound_applies: bool
    exact: bool

    def to_dict(self) -> dict:
        return {
            "eps": self.eps, "q": self.q, "n_vars": self.n_vars, "weight_E": self.weight_E,
            "mean": self.mean, "stderr": self.stderr, "bound": self.bound,
            "m_star": self.m_star, "C": self.C, "bound_applies": self.bound_applies,
            "bound_holds": (self.mean <= self.bound) if self.mean is not None else None,
            "exact_inner_max": self.exact, "per_order_max_mc": self.values,
        }


def monochrome_experiment(inst: Instance, eps: float, q: int, num_orders: int, rng,
                          C: float = 1.0, exact_q: int = 5) -> MonochromeReport:
    """Mean over random orders of the largest monochromatic weight of an admissible colouring.

    The ``3*eps*weight(E)`` bound is only claimed once ``|V| >= m_star``.
    Orders admitting no admissible colouring (e.g. ``q*eps < 1``) are
    recorded as ``None`` and excluded from the mean.
    """
    H = gaifman(inst)
    vars_ = list(inst.variables)
    vals = []
    for _ in range(num_orders):
        pi = [vars_[i] for i in rng.permutation(len(vars_))]
        best, _ = max_mc_given_order(H, pi, eps, q, exact_q)
        vals.append(best)
    ok = np.array([v for v in vals if v is not None])
    mean = float(ok.mean()) if len(ok) else None
    stderr = float(ok.std(ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else math.inf
    wE = float(H.total_weight())
    ms = m_star(q, eps, C) if q / eps > 1 else 0
    return MonochromeReport(eps, q, len(vars_), wE, vals, mean, stderr, 3 * eps * wE, ms, C,
                            len(vars_) >= ms, q <= exact_q)


def fixed_coloring_experiment(inst: Instance, groups: int, num_orders: int, rng) -> dict:
    """Monochromatic weight of a fixed colouring (``groups`` equal consecutive colour blocks)."""
    H = gaifman(inst)
    vars_ = list(inst.variables)
    m = len(vars_)
    block = (np.arange(m) * groups) // m
    vals = np.empty(num_orders)
    for t in range(num_orders):
        pi = [vars_[i] for i in rng.permutation(m)]
        W = _weight_matrix(H, pi)
        same = block[:, None] == block[None, :]
        vals[t] = W[same].sum() / 2.0
    return {
        "eps": float(np.bincount(block).max() / m),
        "weight_E": float(H.total_weight()),
        "mean": float(vals.mean()),
        "stderr": float(vals.std(ddof=1) / math.sqrt(num_orders)) if num_orders > 1 else math.inf,
        "values": vals.tolist(),
    }
