"""Vectorised pattern identification for ordered binary trees.

An ordered tree restricted to leaves at sorted positions ``s_1 < ... < s_k``
is fully described by two things: which slot sits at each position, and
the depths of ``lca(s_i, s_{i+1})`` for consecutive positions.  The depth
of ``lca(s_i, s_{i+1})`` is the minimum of the consecutive-leaf LCA depths
("gaps") over ``[s_i, s_{i+1})``, so a whole family of trees can be
handled as an integer gap matrix.

Pattern indices produced here agree with :func:`patterns.enumerate_patterns`
for ``r = 2``: ``index = perm_rank * n_shapes + shape_id``.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import ResourceError
from .tree import binary_shapes, from_consecutive_depths

__all__ = ["shape_gaps", "range_min_table", "PatternCodec", "codec"]

# Catalan(15) ~ 9.7e6 shapes; beyond that the gap matrix no longer fits comfortably
MAX_SHAPE_LEAVES = 14


@lru_cache(maxsize=None)
def shape_gaps(n: int) -> np.ndarray:
    """Consecutive LCA depths of every ordered binary shape on ``n`` leaves.

    Row ``s`` belongs to ``binary_shapes(n)[s]``.  Shape ``(S, n-1)``, int8.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_SHAPE_LEAVES:
        raise ResourceError(f"shape enumeration capped at {MAX_SHAPE_LEAVES} leaves", MAX_SHAPE_LEAVES)
    if n == 1:
        return np.zeros((1, 0), dtype=np.int8)
    blocks = []
    for a in range(1, n):
        left = shape_gaps(a) + 1
        right = shape_gaps(n - a) + 1
        nl, nr = len(left), len(right)
        block = np.empty((nl * nr, n - 1), dtype=np.int8)
        block[:, : a - 1] = np.repeat(left, nr, axis=0)
        block[:, a - 1] = 0
        block[:, a:] = np.tile(right, (nl, 1))
        blocks.append(block)
    out = np.concatenate(blocks)
    out.setflags(write=False)
    return out


def range_min_table(gaps: np.ndarray) -> np.ndarray:
    """``RM[s, i, j] = min(gaps[s, i:j])`` for ``i < j``; other entries are unused.

    Gives the depth of ``lca(leaf_i, leaf_j)`` for every tree in ``gaps``.
    """
    S, m = gaps.shape
    n = m + 1
    rm = np.zeros((S, n, n), dtype=gaps.dtype)
    for i in range(m):
        cur = gaps[:, i].copy()
        rm[:, i, i + 1] = cur
        for j in range(i + 2, n):
            np.minimum(cur, gaps[:, j - 1], out=cur)
            rm[:, i, j] = cur
    return rm


class PatternCodec:
    """Maps (slot positions, consecutive depths) to pattern indices for arity ``k``."""

    def __init__(self, k: int):
        self.k = k
        self.shapes = binary_shapes(k)
        self.n_shapes = len(self.shapes)
        self.n_perms = math.factorial(k)
        self.n_patterns = self.n_shapes * self.n_perms
        m = k - 1
        self._base = max(m, 1)
        self._weights = self._base ** np.arange(m, dtype=np.int64)
        self.lookup = self._build_lookup()
        self._fact = np.array([math.factorial(k - 1 - p) for p in range(k)], dtype=np.int64)

    def _build_lookup(self) -> np.ndarray:
        k, m = self.k, self.k - 1
        if m == 0:
            return np.zeros(1, dtype=np.int64)
        index = {sh: i for i, sh in enumerate(self.shapes)}
        table = np.full(self._base**m, -1, dtype=np.int64)
        for depths in itertools.product(range(m), repeat=m):
            ranks = tuple(sum(d2 < d for d2 in depths) for d in depths)
            if ranks != depths:
                continue  # only canonical competition rankings are valid codes
            nested = from_consecutive_depths(list(range(k)), depths).nested
            code = sum(r * self._base**i for i, r in enumerate(ranks))
            table[code] = index.get(nested, -1)
        return table

    def shape_ids(self, depths: np.ndarray) -> np.ndarray:
        """Shape id for each row of consecutive depths (``-1`` if not binary)."""
        if self.k == 1:
            return np.zeros(depths.shape[:-1], dtype=np.int64)
        d = depths[..., :, None]
        ranks = (depths[..., None, :] < d).sum(axis=-1)
        return self.lookup[ranks @ self._weights]

    def perm_ranks(self, order: np.ndarray) -> np.ndarray:
        """Lexicographic rank of each row of ``order`` (slot index at each position)."""
        later_smaller = np.triu(order[..., None, :] < order[..., :, None], 1).sum(axis=-1)
        return later_smaller @ self._fact

    def encode(self, positions: np.ndarray, depth_of):
        """Pattern indices for slot ``positions`` (..., k).

        ``depth_of(a, b)`` must return LCA depths for sorted position arrays
        ``a < b`` (broadcasting allowed; may add leading axes).
        """
        order = np.argsort(positions, axis=-1, kind="stable")
        srt = np.take_along_axis(positions, order, axis=-1)
        perm = self.perm_ranks(order)
        if self.k == 1:
            return perm
        depths = depth_of(srt[..., :-1], srt[..., 1:])
        shape = self.shape_ids(depths)
        return perm * self.n_shapes + shape


@lru_cache(maxsize=None)
def codec(k: int) -> PatternCodec:
    return PatternCodec(k)
