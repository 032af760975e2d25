"""Rooted, ordered, bounded-arity trees with labelled leaves.

A tree is described by a *nested* form: a leaf is its label (any hashable
value that is not a tuple) and an internal node is a tuple of its children
from left to right.  ``Tree`` wraps that form with preorder node ids, parent
pointers, depths and leaf positions so that LCA and order queries are cheap.

Trees are immutable.  Two trees are equal when their nested forms are equal,
so node ids never leak into comparisons.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Hashable, Iterable, Iterator, Sequence

from .errors import ArgumentError, NotFoundError

__all__ = [
    "Tree",
    "lca",
    "restrict",
    "build_caterpillar",
    "build_perfect",
    "binary_shapes",
    "ordered_shapes",
    "from_consecutive_depths",
]


class Tree:
    """Immutable rooted ordered tree.

    Parameters
    ----------
    nested : nested tuple
        Leaves are labels, internal nodes are tuples of two or more children.
    arity : int, optional
        Maximum number of children allowed at an internal node.  Defaults to
        the largest fan-out present (and at least 2).

    Notes
    -----
    Node ``0`` is the root; ids follow a preorder traversal with children
    visited left to right, so the leaves appear in planar order.
    """

    __slots__ = (
        "_nested", "children", "parent", "label", "depth", "arity",
        "leaf_nodes", "_node_of", "_pos", "_span", "_hash",
    )

    def __init__(self, nested, arity: int | None = None):
        children: list[tuple[int, ...]] = []
        parent: list[int] = []
        label: list[Hashable | None] = []
        depth: list[int] = []
        span: list[tuple[int, int]] = []
        leaf_nodes: list[int] = []
        node_of: dict[Hashable, int] = {}

        def visit(obj, par, dep):
            nid = len(children)
            children.append(())
            parent.append(par)
            depth.append(dep)
            span.append((0, 0))
            if isinstance(obj, tuple):
                if len(obj) < 2:
                    raise ArgumentError("internal nodes need at least two children")
                label.append(None)
                first = len(leaf_nodes)
                kids = tuple(visit(c, nid, dep + 1) for c in obj)
                children[nid] = kids
                span[nid] = (first, len(leaf_nodes))
            else:
                if obj in node_of:
                    raise ArgumentError(f"duplicate leaf label {obj!r}")
                label.append(obj)
                node_of[obj] = nid
                span[nid] = (len(leaf_nodes), len(leaf_nodes) + 1)
                leaf_nodes.append(nid)
            return nid

        visit(nested, -1, 0)
        fan = max((len(c) for c in children), default=0)
        if arity is None:
            arity = max(2, fan)
        elif fan > arity:
            raise ArgumentError(f"node with {fan} children exceeds arity {arity}")
        if arity < 2:
            raise ArgumentError("arity must be at least 2")

        self._nested = nested
        self.children = tuple(children)
        self.parent = tuple(parent)
        self.label = tuple(label)
        self.depth = tuple(depth)
        self.arity = arity
        self.leaf_nodes = tuple(leaf_nodes)
        self._node_of = node_of
        self._pos = {label[n]: i for i, n in enumerate(leaf_nodes)}
        self._span = tuple(span)
        self._hash = None

    # ------------------------------------------------------------------
    # construction helpers
    @classmethod
    def from_nested(cls, nested, arity: int | None = None) -> "Tree":
        return cls(nested, arity)

    @classmethod
    def from_newick(cls, text: str, arity: int | None = None) -> "Tree":
        return cls(parse_newick(text), arity)

    @classmethod
    def leaf(cls, label) -> "Tree":
        return cls(label)

    # ------------------------------------------------------------------
    # identity
    @property
    def nested(self):
        return self._nested

    def canonical(self):
        """Canonical serialisation used for equality and table lookup."""
        return self._nested

    def __eq__(self, other):
        if not isinstance(other, Tree):
            return NotImplemented
        return self._nested == other._nested

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._nested)
        return self._hash

    def __repr__(self):
        return f"Tree({self.to_newick()!r})"

    # ------------------------------------------------------------------
    # basic queries
    @property
    def n_nodes(self) -> int:
        return len(self.children)

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_nodes)

    @property
    def root(self) -> int:
        return 0

    def is_leaf(self, node: int) -> bool:
        return not self.children[node]

    def internal_nodes(self) -> list[int]:
        return [n for n, c in enumerate(self.children) if c]

    def is_full_binary(self) -> bool:
        return all(len(c) in (0, 2) for c in self.children)

    def leaf_order(self) -> list:
        """Leaf labels from left to right."""
        return [self.label[n] for n in self.leaf_nodes]

    def leaves(self) -> list:
        return self.leaf_order()

    def node_of(self, leaf) -> int:
        try:
            return self._node_of[leaf]
        except KeyError:
            raise NotFoundError(f"unknown leaf {leaf!r}") from None

    def position(self, leaf) -> int:
        """0-based left-to-right position of a leaf."""
        try:
            return self._pos[leaf]
        except KeyError:
            raise NotFoundError(f"unknown leaf {leaf!r}") from None

    def __contains__(self, leaf) -> bool:
        return leaf in self._node_of

    def leaf_span(self, node: int) -> tuple[int, int]:
        """Half-open range of leaf positions below ``node``."""
        return self._span[node]

    def leaves_below(self, node: int) -> list:
        lo, hi = self._span[node]
        return [self.label[n] for n in self.leaf_nodes[lo:hi]]

    def is_ancestor(self, anc: int, node: int) -> bool:
        """True if ``anc`` lies above ``node`` or equals it."""
        lo, hi = self._span[anc]
        a, b = self._span[node]
        return lo <= a and b <= hi and self.depth[anc] <= self.depth[node]

    def child_index(self, anc: int, node: int) -> int:
        """0-based index of the child of ``anc`` whose subtree holds ``node``."""
        while self.parent[node] != anc:
            node = self.parent[node]
            if node < 0:
                raise ArgumentError("node is not below the given ancestor")
        return self.children[anc].index(node)

    def lca_nodes(self, nodes: Iterable[int]) -> int:
        it = iter(nodes)
        try:
            a = next(it)
        except StopIteration:
            raise ArgumentError("lca of an empty set") from None
        for b in it:
            while a != b:
                if self.depth[a] >= self.depth[b]:
                    a = self.parent[a]
                else:
                    b = self.parent[b]
        return a

    def lca(self, leaves: Iterable) -> int:
        return lca(self, leaves)

    def height(self) -> int:
        return max(self.depth)

    def consecutive_depths(self) -> list[int]:
        """Depth of lca(leaf_i, leaf_{i+1}) for consecutive leaves."""
        out = []
        for a, b in zip(self.leaf_nodes, self.leaf_nodes[1:]):
            out.append(self.depth[self.lca_nodes((a, b))])
        return out

    # ------------------------------------------------------------------
    # transforms
    def restrict(self, keep: Iterable) -> "Tree":
        return restrict(self, keep)

    def relabel(self, mapping) -> "Tree":
        """Return a copy with each leaf label ``x`` replaced by ``mapping[x]``."""
        get = mapping.__getitem__ if not callable(mapping) else mapping

        def walk(obj):
            if isinstance(obj, tuple):
                return tuple(walk(c) for c in obj)
            return get(obj)

        return Tree(walk(self._nested), self.arity)

    def mirror(self) -> "Tree":
        """Reverse the child order at every node."""

        def walk(obj):
            if isinstance(obj, tuple):
                return tuple(walk(c) for c in reversed(obj))
            return obj

        return Tree(walk(self._nested), self.arity)

    def subtree(self, node: int) -> "Tree":
        def build(n):
            if not self.children[n]:
                return self.label[n]
            return tuple(build(c) for c in self.children[n])

        return Tree(build(node), self.arity)

    def to_newick(self) -> str:
        return to_newick(self._nested)

    def __str__(self):
        return self.to_newick()


# ----------------------------------------------------------------------
# free functions mirroring the methods


def lca(tree: Tree, leaves: Iterable) -> int:
    """Deepest node lying above every leaf in ``leaves``.

    Raises ``NotFoundError`` for unknown labels and ``ArgumentError`` when
    ``leaves`` is empty.
    """
    nodes = [tree.node_of(x) for x in leaves]
    if not nodes:
        raise ArgumentError("lca of an empty set")
    return tree.lca_nodes(nodes)


def _restrict_nested(obj, keep):
    if isinstance(obj, tuple):
        kids = []
        for c in obj:
            r = _restrict_nested(c, keep)
            if r is not None:
                kids.append(r)
        if not kids:
            return None
        if len(kids) == 1:
            return kids[0]
        return tuple(kids)
    return obj if obj in keep else None


def restrict(tree: Tree, keep: Iterable) -> Tree:
    """Homeomorphic reduction of ``tree`` onto the leaves in ``keep``.

    Leaves outside ``keep`` are deleted and unary internal nodes are
    suppressed; child order is preserved.
    """
    keep = set(keep)
    if not keep:
        raise ArgumentError("restrict needs a nonempty leaf set")
    for x in keep:
        tree.node_of(x)
    return Tree(_restrict_nested(tree.nested, keep), tree.arity)


def build_caterpillar(n: int, side: str = "left", labels: Sequence | None = None) -> Tree:
    """Caterpillar with leaves ``1..n`` (or ``labels``) from left to right.

    A *left* caterpillar has a leaf as the right child of every internal
    node; a *right* caterpillar has a leaf as every left child.
    """
    if n < 1:
        raise ArgumentError("a caterpillar needs at least one leaf")
    if labels is None:
        labels = list(range(1, n + 1))
    elif len(labels) != n:
        raise ArgumentError("label count does not match n")
    if side == "left":
        acc = labels[0]
        for x in labels[1:]:
            acc = (acc, x)
    elif side == "right":
        acc = labels[-1]
        for x in reversed(labels[:-1]):
            acc = (x, acc)
    else:
        raise ArgumentError(f"side must be 'left' or 'right', got {side!r}")
    return Tree(acc, 2)


def build_perfect(k: int, d: int, start: int = 1) -> Tree:
    """Ordered perfect ``k``-ary tree of depth ``d``; leaves numbered from ``start``."""
    if k < 2 or d < 0:
        raise ArgumentError("need k >= 2 and d >= 0")
    counter = iter(range(start, start + k**d))

    def build(level):
        if level == d:
            return next(counter)
        return tuple(build(level + 1) for _ in range(k))

    return Tree(build(0), k)


# ----------------------------------------------------------------------
# shape enumeration


def _shift(shape, off):
    if isinstance(shape, tuple):
        return tuple(_shift(c, off) for c in shape)
    return shape + off


@lru_cache(maxsize=None)
def binary_shapes(n: int) -> tuple:
    """All ordered full binary shapes on ``n`` leaves.

    Each shape is a nested tuple whose leaves are the in-order positions
    ``0..n-1``.  The order is canonical: left-subtree size ``1..n-1`` outer,
    then left shape, then right shape.  There are Catalan(n-1) of them.
    """
    if n < 1:
        raise ArgumentError("n must be positive")
    if n == 1:
        return (0,)
    out = []
    for a in range(1, n):
        for left in binary_shapes(a):
            for right in binary_shapes(n - a):
                out.append((left, _shift(right, a)))
    return tuple(out)


def _compositions(n: int, parts_min: int, parts_max: int) -> Iterator[tuple[int, ...]]:
    def rec(rem, parts):
        if rem == 0:
            if len(parts) >= parts_min:
                yield tuple(parts)
            return
        if len(parts) == parts_max:
            return
        for s in range(1, rem + 1):
            parts.append(s)
            yield from rec(rem - s, parts)
            parts.pop()

    yield from rec(n, [])


@lru_cache(maxsize=None)
def ordered_shapes(n: int, r: int = 2) -> tuple:
    """All ordered shapes on ``n`` leaves with between 2 and ``r`` children per node."""
    if n < 1:
        raise ArgumentError("n must be positive")
    if r == 2:
        return binary_shapes(n)
    if n == 1:
        return (0,)
    out = []
    for comp in _compositions(n, 2, r):
        pools = [ordered_shapes(s, r) for s in comp]

        def rec(i, off, acc):
            if i == len(comp):
                out.append(tuple(acc))
                return
            for sh in pools[i]:
                acc.append(_shift(sh, off))
                rec(i + 1, off + comp[i], acc)
                acc.pop()

        rec(0, 0, [])
    return tuple(out)


def from_consecutive_depths(labels: Sequence, depths: Sequence[int], arity: int | None = None) -> Tree:
    """Rebuild a tree from its leaf order and consecutive LCA depths.

    ``depths[i]`` is the depth of the LCA of ``labels[i]`` and
    ``labels[i+1]``.  Only the relative order of the depths matters; equal
    minima inside a block become siblings of one node.
    """
    labels = list(labels)
    if len(depths) != len(labels) - 1:
        raise ArgumentError("need exactly one depth per consecutive leaf pair")
    return Tree(_cartesian(labels, list(depths), 0, len(labels)), arity)


def _cartesian(labels, depths, lo, hi):
    if hi - lo == 1:
        return labels[lo]
    m = min(depths[lo:hi - 1])
    cuts = [i for i in range(lo, hi - 1) if depths[i] == m]
    groups = []
    start = lo
    for c in cuts:
        groups.append(_cartesian(labels, depths, start, c + 1))
        start = c + 1
    groups.append(_cartesian(labels, depths, start, hi))
    return tuple(groups)


# ----------------------------------------------------------------------
# Newick text format (topology only)

_SPECIAL = set("(),;:")


def to_newick(nested) -> str:
    def walk(obj):
        if isinstance(obj, tuple):
            return "(" + ",".join(walk(c) for c in obj) + ")"
        s = str(obj)
        if not s or any(ch in _SPECIAL or ch.isspace() for ch in s):
            raise ArgumentError(f"label {s!r} cannot be written as Newick")
        return s

    return walk(nested) + ";"


def parse_newick(text: str):
    """Parse topology-only Newick into nested form with string labels."""
    s = text.strip()
    if not s.endswith(";"):
        raise ArgumentError("Newick string must end with ';'")
    s = s[:-1]
    pos = 0

    def skip_ws():
        nonlocal pos
        while pos < len(s) and s[pos].isspace():
            pos += 1

    def parse_node():
        nonlocal pos
        skip_ws()
        if pos < len(s) and s[pos] == "(":
            pos += 1
            kids = [parse_node()]
            skip_ws()
            while pos < len(s) and s[pos] == ",":
                pos += 1
                kids.append(parse_node())
                skip_ws()
            if pos >= len(s) or s[pos] != ")":
                raise ArgumentError(f"expected ')' at offset {pos}")
            pos += 1
            skip_ws()
            if pos < len(s) and s[pos] not in "),":
                raise ArgumentError("internal node labels and edge lengths are not supported")
            if len(kids) == 1:
                raise ArgumentError("unary internal node in Newick input")
            return tuple(kids)
        start = pos
        while pos < len(s) and s[pos] not in _SPECIAL and not s[pos].isspace():
            pos += 1
        if pos < len(s) and s[pos] == ":":
            raise ArgumentError("edge lengths are not supported")
        name = s[start:pos]
        if not name:
            raise ArgumentError(f"empty leaf label at offset {start}")
        return name

    node = parse_node()
    skip_ws()
    if pos != len(s):
        raise ArgumentError(f"trailing characters at offset {pos}")
    return node
