"""Phylogenetic CSP instances, solutions, values and exact optima."""

from __future__ import annotations

import io
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

from .codes import codec, shape_gaps
from .errors import ArgumentError, ResourceError
from .patterns import PayoffFunction, evaluate_payoff
from .registry import Registry
from .tree import Tree, binary_shapes

__all__ = [
    "Constraint",
    "Instance",
    "Solution",
    "GaifmanGraph",
    "value",
    "brute_force_opt",
    "opt_given_order",
    "gaifman",
    "is_regular",
    "read_instance",
    "write_instance",
    "parse_weight",
    "BRUTE_FORCE_CAP",
    "ORDER_CAP",
]

BRUTE_FORCE_CAP = 10
ORDER_CAP = 13
TOL = 1e-12


def parse_weight(text: str):
    """Parse ``1/54``, ``3`` or ``0.25`` into a Fraction (decimal strings stay exact)."""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ArgumentError(f"bad weight {text!r}") from None


def _is_exact(w) -> bool:
    return isinstance(w, Rational)


@dataclass(frozen=True)
class Constraint:
    payoff: str
    args: tuple
    weight: object

    def __iter__(self):
        return iter((self.payoff, self.args, self.weight))


class Instance:
    """Variables plus a weighted list of payoff applications.

    Weights are normalised to sum to 1 on construction (unless the
    instance is empty).  Integer and Fraction weights stay exact.
    """

    def __init__(self, variables: Iterable, constraints: Iterable = (), registry: Registry | None = None,
                 normalize: bool = True):
        self.variables = tuple(variables)
        if len(set(self.variables)) != len(self.variables):
            raise ArgumentError("duplicate variable")
        self.registry = registry if registry is not None else Registry()
        varset = set(self.variables)
        raw = []
        for c in constraints:
            name, args, w = c if not isinstance(c, Constraint) else (c.payoff, c.args, c.weight)
            if isinstance(name, PayoffFunction):
                f = name
                name = self.registry.register(f) if f.name else None
                if name is None:
                    raise ArgumentError("anonymous payoff functions must be registered first")
            f = self.registry[name]
            args = tuple(args)
            if len(args) != f.k:
                raise ArgumentError(f"payoff {name} has arity {f.k}, got {len(args)} arguments")
            if len(set(args)) != len(args):
                raise ArgumentError(f"repeated variable in constraint {name}{args}")
            for a in args:
                if a not in varset:
                    raise ArgumentError(f"constraint uses unknown variable {a!r}")
            if w < 0:
                raise ArgumentError("negative weight")
            raw.append((name, args, w))
        exact = all(_is_exact(w) for _, _, w in raw)
        if exact:
            raw = [(n, a, Fraction(w)) for n, a, w in raw]
        else:
            raw = [(n, a, float(w)) for n, a, w in raw]
        total = sum(w for _, _, w in raw)
        if normalize and raw and total > 0:
            raw = [(n, a, w / total) for n, a, w in raw]
        self.exact = exact
        self.constraints = tuple(Constraint(n, a, w) for n, a, w in raw)

    def __len__(self):
        return len(self.constraints)

    def __repr__(self):
        return f"<Instance vars={len(self.variables)} constraints={len(self.constraints)}>"

    def payoff(self, name: str) -> PayoffFunction:
        return self.registry[name]

    def total_weight(self):
        return sum(c.weight for c in self.constraints)

    def groups(self) -> dict:
        """Constraints grouped by payoff name: name -> (arg index array, float weights)."""
        idx = {v: i for i, v in enumerate(self.variables)}
        by = defaultdict(lambda: ([], []))
        for c in self.constraints:
            args, ws = by[c.payoff]
            args.append([idx[a] for a in c.args])
            ws.append(float(c.weight))
        return {name: (np.array(a, dtype=np.int64), np.array(w)) for name, (a, w) in by.items()}

    def to_text(self) -> str:
        return write_instance(self)

    @classmethod
    def from_text(cls, text: str, registry: Registry | None = None, strict: bool = True) -> "Instance":
        return read_instance(text, registry, strict)


class Solution:
    """Assignment of variables to the leaves of a full binary ordered tree.

    ``mapping`` sends each variable to a leaf label; when omitted the leaf
    labels are the variables themselves.
    """

    def __init__(self, tree: Tree, mapping: dict | None = None):
        if not tree.is_full_binary():
            raise ArgumentError("solution trees must be full binary")
        if mapping is None:
            mapping = {x: x for x in tree.leaf_order()}
        mapping = dict(mapping)
        leaves = list(mapping.values())
        if len(set(leaves)) != len(leaves):
            raise ArgumentError("mapping is not injective")
        if len(leaves) != tree.n_leaves:
            raise ArgumentError(f"mapping covers {len(leaves)} leaves, tree has {tree.n_leaves}")
        for leaf in leaves:
            tree.node_of(leaf)
        self.tree = tree
        self.mapping = mapping
        self._var_of = {v: k for k, v in mapping.items()}

    def leaf_of(self, var):
        try:
            return self.mapping[var]
        except KeyError:
            raise ArgumentError(f"variable {var!r} not assigned") from None

    def order(self) -> list:
        """Variables in left-to-right leaf order."""
        return [self._var_of[x] for x in self.tree.leaf_order()]

    def variable_tree(self) -> Tree:
        """The solution tree relabelled by variables."""
        return self.tree.relabel(self._var_of)

    def __eq__(self, other):
        if not isinstance(other, Solution):
            return NotImplemented
        return self.variable_tree() == other.variable_tree()

    def __hash__(self):
        return hash(self.variable_tree())

    def __repr__(self):
        return f"Solution({self.variable_tree().to_newick()!r})"

    @classmethod
    def from_shape(cls, shape, order: Sequence) -> "Solution":
        """Tree with the given position-labelled shape and variables ``order`` left to right."""
        def walk(obj):
            if isinstance(obj, tuple):
                return tuple(walk(c) for c in obj)
            return order[obj]
        return cls(Tree(walk(shape), 2))


def value(sol: Solution, inst: Instance) -> float:
    """Weighted average payoff of ``sol`` on ``inst``; exact when weights are rational."""
    return float(value_exact(sol, inst))


def value_exact(sol: Solution, inst: Instance):
    missing = [v for v in inst.variables if v not in sol.mapping]
    if missing:
        raise ArgumentError(f"solution does not place variables {missing[:5]}")
    total = Fraction(0) if inst.exact else 0.0
    for c in inst.constraints:
        f = inst.registry[c.payoff]
        leaves = [sol.leaf_of(a) for a in c.args]
        p = evaluate_payoff(f, sol.tree, leaves)
        if inst.exact:
            total += c.weight * Fraction(p)
        else:
            total += c.weight * p
    return total


def _group_tables(inst: Instance):
    out = []
    for name, (args, ws) in inst.groups().items():
        f = inst.registry[name]
        out.append((codec(f.k), args, ws, f.vector(2)))
    return out


def _pick_first(values: np.ndarray) -> int:
    best = values.max()
    return int(np.flatnonzero(values >= best - TOL)[0])


def opt_given_order(inst: Instance, pi: Sequence, cap: int = ORDER_CAP):
    """Best solution among trees whose leaf order is ``pi``.

    Returns ``(value, Solution)``; ties go to the first shape in canonical
    order.
    """
    pi = list(pi)
    n = len(pi)
    if len(set(pi)) != n or set(pi) != set(inst.variables) or n != len(inst.variables):
        raise ArgumentError("pi must be a permutation of the instance variables")
    if n > cap:
        raise ResourceError(f"opt_given_order is capped at {cap} variables", cap)
    shapes = binary_shapes(n)
    gaps = shape_gaps(n)
    pos_of = {v: i for i, v in enumerate(pi)}
    pos = np.array([pos_of[v] for v in inst.variables], dtype=np.int64)
    totals = np.zeros(len(shapes))
    cache: dict = {}

    def depth_of(a, b):
        out = np.empty((gaps.shape[0],) + a.shape, dtype=np.int8)
        for idx in np.ndindex(a.shape):
            key = (int(a[idx]), int(b[idx]))
            if key not in cache:
                cache[key] = gaps[:, key[0]:key[1]].min(axis=1)
            out[(slice(None),) + idx] = cache[key]
        return out

    for cd, args, ws, vec in _group_tables(inst):
        codes = cd.encode(pos[args], depth_of)
        totals += np.sum(vec[codes] * ws, axis=-1)
    best = _pick_first(totals)
    sol = Solution.from_shape(shapes[best], pi)
    return value(sol, inst), sol


def brute_force_opt(inst: Instance, cap: int = BRUTE_FORCE_CAP):
    """Exact optimum over all ordered full binary trees on the variables.

    Candidates are visited as (leaf order in ``itertools.permutations``
    order) x (shape in canonical order); the first candidate within 1e-12
    of the maximum is returned.
    """
    n = len(inst.variables)
    if n == 0:
        raise ArgumentError("instance has no variables")
    if n > cap:
        raise ResourceError(f"brute_force_opt is capped at {cap} variables", cap)
    shapes = binary_shapes(n)
    S = len(shapes)
    if n == 1:
        sol = Solution(Tree(inst.variables[0]))
        return value(sol, inst), sol
    from .codes import range_min_table

    rm = range_min_table(shape_gaps(n))
    groups = _group_tables(inst)
    width = max(1, sum(len(a) * a.shape[1] for _, a, _, _ in groups))
    chunk = max(1, 4_000_000 // (S * width))
    best_val, best_key = -1.0, None
    perms = itertools.permutations(range(n))
    done = 0
    while True:
        block = np.array(list(itertools.islice(perms, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        pos = np.argsort(block, axis=1)  # pos[p, var] = position of var
        totals = np.zeros((S, len(block)))
        for cd, args, ws, vec in groups:
            if len(args) == 0:
                continue
            codes = cd.encode(pos[:, args], lambda a, b: rm[:, a, b])
            totals += np.sum(vec[codes] * ws, axis=-1)
        flat = totals.T.ravel()  # perm-major, shape-minor
        i = _pick_first(flat)
        if flat[i] > best_val + TOL:
            best_val, best_key = flat[i], (done + i // S, block[i // S], i % S)
        done += len(block)
    _, order_idx, s = best_key
    order = [inst.variables[j] for j in order_idx]
    sol = Solution.from_shape(shapes[s], order)
    return value(sol, inst), sol


# ----------------------------------------------------------------------
# Gaifman graph


class GaifmanGraph:
    """Weighted co-occurrence graph: one clique per constraint."""

    def __init__(self, vertices, weights: dict):
        self.vertices = tuple(vertices)
        self.weights = dict(weights)

    def weight(self, x, y):
        return self.weights.get(frozenset((x, y)), 0)

    def total_weight(self):
        return sum(self.weights.values())

    def degree(self, x):
        return sum(w for e, w in self.weights.items() if x in e)

    def edges(self):
        return [(tuple(e), w) for e, w in self.weights.items()]

    def components(self) -> list[set]:
        parent = {v: v for v in self.vertices}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for e, w in self.weights.items():
            if w > 0:
                a, b = tuple(e)
                parent[find(a)] = find(b)
        comps = defaultdict(set)
        for v in self.vertices:
            comps[find(v)].add(v)
        return list(comps.values())


def gaifman(inst: Instance) -> GaifmanGraph:
    weights: dict = defaultdict(lambda: Fraction(0) if inst.exact else 0.0)
    for c in inst.constraints:
        for a, b in itertools.combinations(c.args, 2):
            weights[frozenset((a, b))] += c.weight
    return GaifmanGraph(inst.variables, weights)


def incident_weights(inst: Instance) -> dict:
    """Total weight of the constraints containing each variable."""
    out = {v: Fraction(0) if inst.exact else 0.0 for v in inst.variables}
    for c in inst.constraints:
        for a in c.args:
            out[a] += c.weight
    return out


def is_regular(inst: Instance) -> bool:
    vals = list(incident_weights(inst).values())
    if not vals:
        return True
    return float(max(vals) - min(vals)) <= TOL


# ----------------------------------------------------------------------
# text format


def _format_weight(w) -> str:
    if isinstance(w, Fraction):
        return str(w)
    return repr(float(w))


def write_instance(inst: Instance, fh=None) -> str:
    """Render ``inst`` in the line format; also write to ``fh`` if given."""
    lines = ["vars " + " ".join(map(str, inst.variables))]
    for c in inst.constraints:
        lines.append(" ".join([_format_weight(c.weight), c.payoff, *map(str, c.args)]))
    text = "\n".join(lines) + "\n"
    if fh is not None:
        fh.write(text)
    return text


def read_instance(source, registry: Registry | None = None, strict: bool = True) -> Instance:
    """Parse the line format.

    ``source`` is text or a file object.  With ``strict`` the weights must
    already sum to 1 (exactly for rational weights, within 1e-9 otherwise).
    """
    text = source.read() if isinstance(source, io.IOBase) or hasattr(source, "read") else source
    registry = registry if registry is not None else Registry()
    variables = None
    cons = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "vars":
            if variables is not None:
                raise ArgumentError(f"line {lineno}: duplicate 'vars' header")
            variables = parts[1:]
            continue
        if variables is None:
            raise ArgumentError(f"line {lineno}: constraint before 'vars' header")
        if len(parts) < 3:
            raise ArgumentError(f"line {lineno}: expected 'WEIGHT PAYOFF VARS...'")
        w = parse_weight(parts[0])
        try:
            registry[parts[1]]
        except ArgumentError as exc:
            raise ArgumentError(f"line {lineno}: {exc}") from None
        cons.append((parts[1], tuple(parts[2:]), w))
    if variables is None:
        raise ArgumentError("missing 'vars' header")
    if strict and cons:
        total = sum(w for _, _, w in cons)
        if total != 1 and abs(float(total) - 1.0) > 1e-9:
            raise ArgumentError(f"constraint weights sum to {total}, expected 1")
    try:
        return Instance(variables, cons, registry)
    except ArgumentError as exc:
        raise ArgumentError(f"invalid instance: {exc}") from None
