"""Ground-truth histograms and the exact query sequences L, S and H.

Bucket indices are 1-based everywhere a user sees them (``Range``, CSV
files); arrays are plain 0-based numpy vectors internally.

Tree nodes are numbered in breadth-first order starting from 0 at the root.
A node's *depth* counts edges from the root (root depth 0); its *height*
counts nodes on the path down to a leaf (leaf height 1, root height
``layout.height``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import ParameterError, RangeError


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Histogram:
    """Non-negative integer counts over an ordered, unit-bucketed domain."""

    counts: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.counts)
        if raw.ndim != 1 or raw.size == 0:
            raise ParameterError("a histogram needs at least one bucket")
        if raw.dtype.kind == "f":
            if not np.all(np.isfinite(raw)) or np.any(raw != np.round(raw)):
                raise ParameterError("histogram counts must be integral")
        elif raw.dtype.kind not in "iub":
            raise ParameterError(f"unsupported count dtype {raw.dtype}")
        counts = raw.astype(np.int64)
        if np.any(counts < 0):
            raise ParameterError("histogram counts must be non-negative")
        object.__setattr__(self, "counts", _frozen(counts))

    @property
    def n(self) -> int:
        return int(self.counts.size)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def __hash__(self) -> int:
        return hash(self.counts.tobytes())


@dataclass(frozen=True)
class Range:
    """Closed interval ``[lo, hi]`` of 1-based bucket indices."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo < 1 or self.hi < self.lo:
            raise RangeError(f"invalid range [{self.lo}, {self.hi}]")

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def check(self, n: int) -> "Range":
        if self.hi > n:
            raise RangeError(f"range [{self.lo}, {self.hi}] exceeds domain of {n} buckets")
        return self


@dataclass(frozen=True)
class TreeLayout:
    """Shape of a complete k-ary tree of height ``height`` (counted in nodes)."""

    k: int
    height: int
    n_leaves: int = field(init=False)
    total_nodes: int = field(init=False)

    def __post_init__(self):
        if self.k < 2:
            raise ParameterError(f"branching factor must be >= 2, got {self.k}")
        if self.height < 1:
            raise ParameterError(f"tree height must be >= 1, got {self.height}")
        object.__setattr__(self, "n_leaves", self.k ** (self.height - 1))
        object.__setattr__(self, "total_nodes", (self.k**self.height - 1) // (self.k - 1))

    @classmethod
    def for_domain(cls, n: int, k: int = 2) -> "TreeLayout":
        """Smallest layout whose leaves cover ``n`` buckets."""
        if k < 2:
            raise ParameterError(f"branching factor must be >= 2, got {k}")
        if n < 1:
            raise ParameterError("domain must contain at least one bucket")
        height, leaves = 1, 1
        while leaves < n:
            leaves *= k
            height += 1
        return cls(k, height)

    def level_start(self, depth: int) -> int:
        return (self.k**depth - 1) // (self.k - 1)

    def level_slice(self, depth: int) -> slice:
        start = self.level_start(depth)
        return slice(start, start + self.k**depth)

    @property
    def leaf_slice(self) -> slice:
        return self.level_slice(self.height - 1)

    def node_id(self, depth: int, offset: int) -> int:
        if not 0 <= depth < self.height or not 0 <= offset < self.k**depth:
            raise ParameterError(f"no node at depth {depth}, offset {offset}")
        return self.level_start(depth) + offset

    def position(self, node: int) -> tuple[int, int]:
        """``(depth, offset)`` of a BFS node id."""
        if not 0 <= node < self.total_nodes:
            raise ParameterError(f"node {node} outside tree of {self.total_nodes} nodes")
        depth = 0
        while self.level_start(depth + 1) <= node:
            depth += 1
        return depth, node - self.level_start(depth)

    def node_height(self, node: int) -> int:
        return self.height - self.position(node)[0]

    def parent(self, node: int) -> int | None:
        return None if node == 0 else (node - 1) // self.k

    def children(self, node: int) -> range:
        first = self.k * node + 1
        if first >= self.total_nodes:
            return range(0)
        return range(first, first + self.k)

    def is_leaf(self, node: int) -> bool:
        return self.k * node + 1 >= self.total_nodes

    def leaf_range(self, node: int) -> Range:
        """Buckets (1-based, inclusive) spanned by the subtree rooted at ``node``."""
        depth, offset = self.position(node)
        width = self.k ** (self.height - 1 - depth)
        return Range(offset * width + 1, (offset + 1) * width)


@dataclass(frozen=True)
class TreeVector:
    """Per-node values of a tree, in BFS order."""

    layout: TreeLayout
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values)
        if values.dtype.kind not in "iuf":
            values = values.astype(float)
        if values.shape != (self.layout.total_nodes,):
            raise ParameterError(
                f"expected {self.layout.total_nodes} node values, got shape {values.shape}"
            )
        object.__setattr__(self, "values", _frozen(values))

    @property
    def leaves(self) -> np.ndarray:
        return self.values[self.layout.leaf_slice]

    def level(self, depth: int) -> np.ndarray:
        return self.values[self.layout.level_slice(depth)]

    def __getitem__(self, node: int):
        return self.values[node]


def range_count(h: Histogram, q: Range) -> int:
    q.check(h.n)
    return int(h.counts[q.lo - 1 : q.hi].sum())


def sorted_sequence(h: Histogram) -> np.ndarray:
    """The S query: counts in rank order."""
    return _frozen(np.sort(h.counts, kind="stable"))


def unit_sequence(h: Histogram) -> np.ndarray:
    """The L query: unit-length counts in domain order."""
    return h.counts


def tree_from_leaves(leaves: np.ndarray, layout: TreeLayout) -> np.ndarray:
    """Fill internal nodes with sums of their children. Works on a trailing axis."""
    leaves = np.asarray(leaves)
    out = np.zeros(leaves.shape[:-1] + (layout.total_nodes,), dtype=leaves.dtype)
    out[..., layout.leaf_slice] = leaves
    for depth in range(layout.height - 2, -1, -1):
        below = out[..., layout.level_slice(depth + 1)]
        out[..., layout.level_slice(depth)] = below.reshape(below.shape[:-1] + (-1, layout.k)).sum(axis=-1)
    return out


def hierarchical_sequence(h: Histogram, k: int = 2) -> TreeVector:
    """The H query, zero-padding the domain on the right up to a power of ``k``."""
    layout = TreeLayout.for_domain(h.n, k)
    leaves = np.zeros(layout.n_leaves, dtype=np.int64)
    leaves[: h.n] = h.counts
    return TreeVector(layout, tree_from_leaves(leaves, layout))


def neighbors(h: Histogram) -> Iterator[Histogram]:
    """Histograms one tuple away: +1 in any bucket, or -1 in any non-empty bucket."""
    for i in range(h.n):
        counts = h.counts.copy()
        counts[i] += 1
        yield Histogram(counts)
    for i in np.flatnonzero(h.counts > 0):
        counts = h.counts.copy()
        counts[i] -= 1
        yield Histogram(counts)


def validate_sorted(v: Sequence[float]) -> bool:
    v = np.asarray(v)
    return bool(np.all(v[:-1] <= v[1:]))


def validate_tree(t: TreeVector, tol: float = 1e-9) -> bool:
    """True iff every internal node equals the sum of its children within ``tol``."""
    layout = t.layout
    for depth in range(layout.height - 1):
        child_sums = t.level(depth + 1).reshape(-1, layout.k).sum(axis=1)
        if np.any(np.abs(t.level(depth) - child_sums) > tol):
            return False
    return True
