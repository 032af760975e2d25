"""Tree patterns, pattern tables and bracket predicates.

A pattern on ``k`` slots is a small tree whose leaves are the integers
``1..k``.  A payoff function is a table from patterns to payoffs in
``[0, 1]``; patterns missing from the table score the default payoff.

Evaluating a payoff on a solution tree restricts the tree to the ``k``
leaves holding the constraint's arguments and relabels leaf ``x_j`` as
slot ``j``.  The resulting pattern is looked up in the table.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .errors import ArgumentError, NotFoundError, ResourceError
from .tree import Tree, _restrict_nested, ordered_shapes

__all__ = [
    "Pattern",
    "PayoffFunction",
    "PairOrder",
    "TripleSplit",
    "match_pattern",
    "evaluate_payoff",
    "compile_to_brackets",
    "eval_brackets",
    "enumerate_patterns",
    "format_tables",
    "parse_tables",
    "MAX_ENUM_ARITY",
]

MAX_ENUM_ARITY = 6


class Pattern:
    """A tree whose leaves are the slots ``1..k``, each exactly once."""

    __slots__ = ("tree",)

    def __init__(self, tree):
        if not isinstance(tree, Tree):
            tree = Tree(tree)
        labels = tree.leaf_order()
        k = len(labels)
        if sorted(labels, key=_slot_key) != list(range(1, k + 1)):
            raise ArgumentError(f"pattern leaves must be exactly 1..{k}, got {labels}")
        self.tree = tree

    @property
    def k(self) -> int:
        return self.tree.n_leaves

    @property
    def nested(self):
        return self.tree.nested

    def canonical(self):
        return self.tree.nested

    def slot_order(self) -> list[int]:
        """Slots in left-to-right order."""
        return self.tree.leaf_order()

    def shape(self):
        """Nested form with slots replaced by their 0-based positions."""
        pos = {s: i for i, s in enumerate(self.slot_order())}
        return self.tree.relabel(pos).nested

    def __eq__(self, other):
        if isinstance(other, Pattern):
            return self.tree == other.tree
        return NotImplemented

    def __hash__(self):
        return hash(self.tree)

    def __repr__(self):
        return f"Pattern({self.to_text()!r})"

    def to_text(self) -> str:
        return self.tree.relabel(lambda s: f"x{s}").to_newick()[:-1]

    @classmethod
    def from_text(cls, text: str) -> "Pattern":
        text = text.strip()
        if not text.endswith(";"):
            text += ";"
        tree = Tree.from_newick(text)

        def slot(name):
            m = re.fullmatch(r"x(\d+)", name)
            if not m:
                raise ArgumentError(f"pattern leaves must be named x1..xk, got {name!r}")
            return int(m.group(1))

        return cls(tree.relabel(slot))


def _slot_key(x):
    return (not isinstance(x, int), x if isinstance(x, int) else str(x))


def _as_pattern(p) -> Pattern:
    if isinstance(p, Pattern):
        return p
    if isinstance(p, str):
        return Pattern.from_text(p)
    return Pattern(p)


def _assignment_items(assignment) -> list:
    """Normalise a slot assignment to the list ``[leaf of slot 1, ..., leaf of slot k]``."""
    if isinstance(assignment, Mapping):
        k = len(assignment)
        try:
            return [assignment[j] for j in range(1, k + 1)]
        except KeyError:
            raise ArgumentError("assignment keys must be slots 1..k") from None
    return list(assignment)


def match_pattern(tree: Tree, assignment, k: int | None = None) -> Pattern:
    """Pattern matched by the leaves ``assignment`` in ``tree``.

    ``assignment`` is either a sequence (slot ``j`` is item ``j-1``) or a
    mapping from slots ``1..k`` to leaf labels.
    """
    leaves = _assignment_items(assignment)
    if k is not None and len(leaves) != k:
        raise ArgumentError(f"expected {k} leaves, got {len(leaves)}")
    if len(set(leaves)) != len(leaves):
        raise ArgumentError("assignment is not injective")
    if not leaves:
        raise ArgumentError("empty assignment")
    slot_of = {}
    for j, leaf in enumerate(leaves, 1):
        tree.node_of(leaf)
        slot_of[leaf] = j
    restricted = _restrict_nested(tree.nested, slot_of)

    def relabel(obj):
        if isinstance(obj, tuple):
            return tuple(relabel(c) for c in obj)
        return slot_of[obj]

    return Pattern(Tree(relabel(restricted), tree.arity))


class PayoffFunction:
    """Pattern table of arity ``k``.

    Parameters
    ----------
    k : int
        Number of arguments.
    table : mapping or iterable of (pattern, payoff)
        Patterns may be ``Pattern`` objects, nested tuples over ``1..k`` or
        text such as ``"((x1,x2),x3)"``.
    default : float
        Payoff for patterns that are not listed.
    name : str, optional
    ordered : bool
        Informational flag; unordered functions are represented by closing
        the table under child swaps (see :meth:`unordered`).
    """

    def __init__(self, k: int, table=(), default: float = 0.0, name: str | None = None,
                 ordered: bool = True):
        if k < 1:
            raise ArgumentError("arity must be positive")
        items = table.items() if isinstance(table, Mapping) else table
        entries: dict = {}
        for p, val in items:
            p = _as_pattern(p)
            if p.k != k:
                raise ArgumentError(f"pattern {p.to_text()} has arity {p.k}, expected {k}")
            val = float(val)
            if not 0.0 <= val <= 1.0:
                raise ArgumentError(f"payoff {val} outside [0, 1]")
            key = p.canonical()
            if key in entries and entries[key] != val:
                raise ArgumentError(f"conflicting payoffs for pattern {p.to_text()}")
            entries[key] = val
        default = float(default)
        if not 0.0 <= default <= 1.0:
            raise ArgumentError(f"default payoff {default} outside [0, 1]")
        self.k = k
        self.table = entries
        self.default = default
        self.name = name
        self.ordered = ordered
        self._vec_cache = {}

    def payoff(self, pattern) -> float:
        key = pattern.canonical() if isinstance(pattern, Pattern) else _as_pattern(pattern).canonical()
        return self.table.get(key, self.default)

    def __call__(self, tree: Tree, assignment) -> float:
        return evaluate_payoff(self, tree, assignment)

    def entries(self) -> list[tuple[Pattern, float]]:
        return [(Pattern(Tree(n)), v) for n, v in self.table.items()]

    def max_payoff(self) -> float:
        vals = list(self.table.values())
        # the default applies to at least one pattern whenever the table is not exhaustive
        if len(self.table) < _pattern_count(self.k, 2) or not vals:
            vals.append(self.default)
        return max(vals)

    def is_satisfiable(self) -> bool:
        return self.max_payoff() == 1.0

    def scaled(self, c: float) -> "PayoffFunction":
        if not 0.0 <= c <= 1.0:
            raise ArgumentError("scale must lie in [0, 1]")
        return PayoffFunction(self.k, {n: v * c for n, v in self.table.items()},
                              self.default * c, self.name, self.ordered)

    def unordered(self) -> "PayoffFunction":
        """Close the table under left/right child swaps at every node."""
        closed: dict = {}
        for key, val in self.table.items():
            for var in _order_variants(key):
                if var in closed and closed[var] != val:
                    raise ArgumentError("table is not consistent under child swaps")
                closed[var] = val
        return PayoffFunction(self.k, closed, self.default, self.name, ordered=False)

    def vector(self, r: int = 2):
        """Payoffs over :func:`enumerate_patterns` ``(k, r)`` as a numpy array."""
        import numpy as np

        if r not in self._vec_cache:
            pats = enumerate_patterns(self.k, r)
            self._vec_cache[r] = np.array([self.payoff(p) for p in pats], dtype=float)
        return self._vec_cache[r]

    @classmethod
    def from_predicate(cls, k: int, pred: Callable[[Pattern], float], r: int = 2,
                       name: str | None = None, default: float = 0.0) -> "PayoffFunction":
        """Tabulate ``pred`` over every pattern of arity ``k`` (nonzero entries only)."""
        table = {}
        for p in enumerate_patterns(k, r):
            v = float(pred(p))
            if v != default:
                table[p.canonical()] = v
        return cls(k, table, default, name)

    def __repr__(self):
        label = self.name or "payoff"
        return f"<PayoffFunction {label} k={self.k} entries={len(self.table)} default={self.default}>"


def _order_variants(nested):
    if not isinstance(nested, tuple):
        yield nested
        return
    child_vars = [list(_order_variants(c)) for c in nested]
    for perm in itertools.permutations(range(len(nested))):
        for combo in itertools.product(*(child_vars[i] for i in perm)):
            yield tuple(combo)


def evaluate_payoff(f: PayoffFunction, tree: Tree, assignment) -> float:
    """Payoff of the pattern matched by ``assignment`` in ``tree``."""
    leaves = _assignment_items(assignment)
    if len(leaves) != f.k:
        raise ArgumentError(f"payoff has arity {f.k}, got {len(leaves)} arguments")
    return f.payoff(match_pattern(tree, leaves))


# ----------------------------------------------------------------------
# bracket predicates


@dataclass(frozen=True)
class PairOrder:
    """``[x_i < x_j]``: slot ``i`` lies to the left of slot ``j``."""

    i: int
    j: int

    def __post_init__(self):
        if self.i == self.j or min(self.i, self.j) < 1:
            raise ArgumentError("PairOrder needs two distinct slots >= 1")

    def __str__(self):
        return f"[x{self.i}<x{self.j}]"


@dataclass(frozen=True)
class TripleSplit:
    """Slots ``i, j, l`` fall into children ``a, b, c`` of their LCA.

    Child indices are dense ranks among the three involved children
    (1 for the leftmost), which keeps the predicate invariant under
    homeomorphic restriction.  The binary predicate ``[x_i,x_j<x_l]`` is
    ``TripleSplit((i, j, l), (1, 1, 2))``.
    """

    slots: tuple[int, int, int]
    children: tuple[int, int, int]

    def __post_init__(self):
        if len(set(self.slots)) != 3 or min(self.slots) < 1:
            raise ArgumentError("TripleSplit needs three distinct slots >= 1")
        if min(self.children) < 1:
            raise ArgumentError("child indices start at 1")
        if len(set(self.children)) == 1:
            raise ArgumentError("TripleSplit child indices must not all be equal")

    def __str__(self):
        ch = self.children
        s = self.slots
        if sorted(ch) == [1, 1, 2]:
            left = [f"x{x}" for x, c in zip(s, ch) if c == 1]
            right = [f"x{x}" for x, c in zip(s, ch) if c == 2]
            return f"[{','.join(left)}<{','.join(right)}]"
        if sorted(ch) == [1, 2, 2]:
            left = [f"x{x}" for x, c in zip(s, ch) if c == 1]
            right = [f"x{x}" for x, c in zip(s, ch) if c == 2]
            return f"[{','.join(left)}<{','.join(right)}]"
        body = ",".join(f"x{x}->{c}" for x, c in zip(s, ch))
        return f"[{body}]"


def _dense(vals):
    ranks = {v: i + 1 for i, v in enumerate(sorted(set(vals)))}
    return tuple(ranks[v] for v in vals)


def _triple_children(tree: Tree, nodes) -> tuple[int, int, int]:
    top = tree.lca_nodes(nodes)
    return _dense([tree.child_index(top, n) for n in nodes])


def compile_to_brackets(p) -> list:
    """Conjunction of bracket predicates that holds exactly when ``p`` matches.

    Emits one :class:`TripleSplit` per 3-subset of slots and a
    :class:`PairOrder` for each pair of slots adjacent in the leaf order
    whose relative order is not already fixed by some triple.
    """
    p = _as_pattern(p)
    tree = p.tree
    k = p.k
    out = []
    fixed = set()
    for trip in itertools.combinations(range(1, k + 1), 3):
        nodes = [tree.node_of(s) for s in trip]
        ch = _triple_children(tree, nodes)
        out.append(TripleSplit(trip, ch))
        for (a, ca), (b, cb) in itertools.combinations(zip(trip, ch), 2):
            if ca != cb:
                fixed.add(frozenset((a, b)))
    order = p.slot_order()
    pairs = [PairOrder(a, b) for a, b in zip(order, order[1:]) if frozenset((a, b)) not in fixed]
    return pairs + out


def eval_brackets(c: Iterable, tree: Tree, assignment) -> bool:
    """True iff every predicate in ``c`` holds for ``assignment`` on ``tree``."""
    leaves = _assignment_items(assignment)

    def leaf(slot):
        if slot < 1 or slot > len(leaves):
            raise ArgumentError(f"slot {slot} not covered by the assignment")
        return leaves[slot - 1]

    for pred in c:
        if isinstance(pred, PairOrder):
            if tree.position(leaf(pred.i)) >= tree.position(leaf(pred.j)):
                return False
        elif isinstance(pred, TripleSplit):
            nodes = [tree.node_of(leaf(s)) for s in pred.slots]
            if _triple_children(tree, nodes) != pred.children:
                return False
        else:
            raise ArgumentError(f"unknown predicate {pred!r}")
    return True


# ----------------------------------------------------------------------
# enumeration


def _pattern_count(k: int, r: int) -> int:
    return len(ordered_shapes(k, r)) * math.factorial(k) if k <= MAX_ENUM_ARITY else -1


def _label_shape(shape, perm):
    if isinstance(shape, tuple):
        return tuple(_label_shape(c, perm) for c in shape)
    return perm[shape] + 1


_ENUM_CACHE: dict = {}


def enumerate_patterns(k: int, r: int = 2) -> list:
    """Every ordered pattern on ``k`` slots with fan-out between 2 and ``r``.

    Order: permutations of the slots (``itertools.permutations`` order,
    giving the slot at each left-to-right position) outer, shapes in
    canonical order inner.  Raises ``ResourceError`` for ``k`` above 6.
    """
    if k < 1 or r < 2:
        raise ArgumentError("need k >= 1 and r >= 2")
    if k > MAX_ENUM_ARITY:
        raise ResourceError(f"pattern enumeration is capped at k <= {MAX_ENUM_ARITY}", MAX_ENUM_ARITY)
    key = (k, r)
    if key not in _ENUM_CACHE:
        shapes = ordered_shapes(k, r)
        out = []
        for perm in itertools.permutations(range(k)):
            for sh in shapes:
                out.append(Pattern(Tree(_label_shape(sh, perm))))
        _ENUM_CACHE[key] = out
    return list(_ENUM_CACHE[key])


# ----------------------------------------------------------------------
# text format


def format_tables(funcs: Iterable[PayoffFunction]) -> str:
    """Serialise payoff functions as ``payoff NAME`` blocks."""
    lines = []
    for f in funcs:
        if not f.name:
            raise ArgumentError("payoff functions need a name to be written")
        lines.append(f"payoff {f.name} {f.k}")
        if f.default:
            lines.append(f"default {f.default!r}")
        for key, val in f.table.items():
            lines.append(f"{Pattern(Tree(key)).to_text()} {val!r}")
        lines.append("")
    return "\n".join(lines)


def parse_tables(text: str) -> dict:
    """Parse ``payoff NAME [K]`` blocks into a dict of :class:`PayoffFunction`.

    Lines starting with ``#`` are comments.  Within a block, ``default X``
    sets the default payoff and every other line is ``PATTERN PAYOFF``.
    An omitted payoff means 1.
    """
    out: dict = {}
    cur = None

    def flush():
        if cur is None:
            return
        name, k, entries, default = cur
        if k is None:
            if not entries:
                raise ArgumentError(f"payoff {name} has no patterns and no arity")
            k = entries[0][0].k
        out[name] = PayoffFunction(k, entries, default, name)

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "payoff":
                flush()
                if len(parts) not in (2, 3):
                    raise ArgumentError("expected 'payoff NAME [K]'")
                cur = (parts[1], int(parts[2]) if len(parts) == 3 else None, [], 0.0)
            elif cur is None:
                raise ArgumentError("pattern line before any 'payoff' header")
            elif parts[0] == "default":
                cur = (cur[0], cur[1], cur[2], float(parts[1]))
            else:
                val = float(parts[1]) if len(parts) > 1 else 1.0
                if len(parts) > 2:
                    raise ArgumentError("expected 'PATTERN PAYOFF'")
                cur[2].append((Pattern.from_text(parts[0]), val))
        except (ArgumentError, ValueError, NotFoundError) as exc:
            raise ArgumentError(f"line {lineno}: {exc}") from None
    flush()
    return out
