"""Constrained inference and range answering for hierarchical histograms.

All passes run level by level over the BFS array and accept a leading batch
axis, so many noisy trees of the same layout can be processed at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, RangeError
from .histogram import Range, TreeLayout, TreeVector, tree_from_leaves
from .isotonic import round_nonnegative


@dataclass(frozen=True)
class ZVector:
    layout: TreeLayout
    values: np.ndarray


@dataclass(frozen=True)
class RangeCover:
    """Disjoint subtree roots, ordered left to right, whose leaves union to a range."""

    roots: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.roots)


def _z_weights(k: int, height: int) -> tuple[float, float]:
    """Weights on (own noisy count, sum of children's estimates) at node height ``height``.

    Inversely proportional to the variances of the two estimates.
    """
    total = k**height - 1
    return (k**height - k ** (height - 1)) / total, (k ** (height - 1) - 1) / total


def _levels(values: np.ndarray, layout: TreeLayout, depth: int) -> np.ndarray:
    return values[..., layout.level_slice(depth)]


def _child_sums(values: np.ndarray, layout: TreeLayout, depth: int) -> np.ndarray:
    below = _levels(values, layout, depth + 1)
    return below.reshape(below.shape[:-1] + (-1, layout.k)).sum(axis=-1)


def z_array(noisy: np.ndarray, layout: TreeLayout) -> np.ndarray:
    noisy = np.asarray(noisy, dtype=float)
    z = noisy.copy()
    for depth in range(layout.height - 2, -1, -1):
        own, from_children = _z_weights(layout.k, layout.height - depth)
        z[..., layout.level_slice(depth)] = (
            own * _levels(noisy, layout, depth) + from_children * _child_sums(z, layout, depth)
        )
    return z


def infer_array(noisy: np.ndarray, layout: TreeLayout) -> np.ndarray:
    """Least-squares consistent tree for one noisy tree or a batch of them."""
    z = z_array(noisy, layout)
    out = z.copy()
    k = layout.k
    for depth in range(layout.height - 1):
        parent = _levels(out, layout, depth)
        gap = (parent - _child_sums(z, layout, depth)) / k
        children = _levels(z, layout, depth + 1)
        adjusted = children.reshape(children.shape[:-1] + (-1, k)) + gap[..., None]
        out[..., layout.level_slice(depth + 1)] = adjusted.reshape(children.shape)
    return out


def compute_z(noisy: TreeVector) -> ZVector:
    return ZVector(noisy.layout, z_array(noisy.values, noisy.layout))


def constrained_inference(noisy: TreeVector) -> TreeVector:
    return TreeVector(noisy.layout, infer_array(noisy.values, noisy.layout))


def zero_mask(values: np.ndarray, layout: TreeLayout) -> np.ndarray:
    """Leaves lying under some node whose value is <= 0 (single top-down pass)."""
    zeroed = _levels(values, layout, 0) <= 0
    for depth in range(1, layout.height):
        inherited = np.repeat(zeroed, layout.k, axis=-1)
        zeroed = inherited | (_levels(values, layout, depth) <= 0)
    return zeroed


def zero_nonpositive_subtrees(inferred: TreeVector) -> TreeVector:
    layout = inferred.layout
    leaves = np.where(zero_mask(inferred.values, layout), 0.0, inferred.leaves)
    return TreeVector(layout, tree_from_leaves(leaves, layout))


def round_consistent_array(inferred: np.ndarray, layout: TreeLayout) -> np.ndarray:
    inferred = np.asarray(inferred, dtype=float)
    leaves = inferred[..., layout.leaf_slice]
    leaves = np.where(zero_mask(inferred, layout), 0.0, leaves)
    return tree_from_leaves(round_nonnegative(leaves), layout)


def round_consistent(inferred: TreeVector) -> TreeVector:
    """Zero non-positive subtrees, round leaves, re-sum every internal node."""
    return TreeVector(inferred.layout, round_consistent_array(inferred.values, inferred.layout))


def _check_range(layout: TreeLayout, q: Range) -> None:
    if q.hi > layout.n_leaves:
        raise RangeError(f"range [{q.lo}, {q.hi}] exceeds the {layout.n_leaves}-leaf tree")


def range_cover(layout: TreeLayout, q: Range) -> RangeCover:
    """Fewest disjoint subtrees exactly covering ``q``.

    Walks up from the leaves; at each level the nodes that cannot be merged
    into a parent lying wholly inside the range are taken.
    """
    _check_range(layout, q)
    k = layout.k
    lo, hi = q.lo - 1, q.hi  # half-open, in units of the current level
    left: list[int] = []
    right: list[int] = []
    for depth in range(layout.height - 1, -1, -1):
        start = layout.level_start(depth)
        up_lo, up_hi = -(-lo // k), hi // k
        if up_lo >= up_hi or depth == 0:
            left.extend(range(start + lo, start + hi))
            break
        left.extend(range(start + lo, start + up_lo * k))
        right[:0] = range(start + up_hi * k, start + hi)
        lo, hi = up_lo, up_hi
    return RangeCover(tuple(left + right))


def _bounds(layout: TreeLayout, lo, hi) -> tuple[np.ndarray, np.ndarray]:
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    if np.any(lo < 1) or np.any(hi < lo) or np.any(hi > layout.n_leaves):
        raise RangeError("range outside the tree domain")
    return lo - 1, hi


def cover_sums(values: np.ndarray, layout: TreeLayout, lo, hi) -> np.ndarray:
    """Vectorised cover-sum answers for ranges ``[lo[i], hi[i]]``."""
    lo, hi = _bounds(layout, lo, hi)
    values = np.asarray(values, dtype=float)
    k = layout.k
    total = np.zeros(lo.shape)
    active = np.ones(lo.shape, dtype=bool)
    for depth in range(layout.height - 1, -1, -1):
        prefix = np.concatenate(([0.0], np.cumsum(values[layout.level_slice(depth)])))
        up_lo, up_hi = -(-lo // k), hi // k
        climb = active & (up_lo < up_hi) & (depth > 0)
        stop = active & ~climb
        total[stop] += prefix[hi[stop]] - prefix[lo[stop]]
        c = climb
        total[c] += prefix[up_lo[c] * k] - prefix[lo[c]] + prefix[hi[c]] - prefix[up_hi[c] * k]
        lo = np.where(c, up_lo, lo)
        hi = np.where(c, up_hi, hi)
        active = c
        if not active.any():
            break
    return total


def leaf_sums(leaves: np.ndarray, lo, hi) -> np.ndarray:
    leaves = np.asarray(leaves, dtype=float)
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    if np.any(lo < 1) or np.any(hi < lo) or np.any(hi > leaves.size):
        raise RangeError("range outside the domain")
    prefix = np.concatenate(([0.0], np.cumsum(leaves)))
    return prefix[hi] - prefix[lo - 1]


def answer_range(tree: TreeVector, q: Range, mode: str = "leaf-sum") -> float:
    """Estimate a range count from a tree.

    ``cover-sum`` adds the subtree roots of :func:`range_cover`; ``leaf-sum``
    adds the unit counts in the range.
    """
    _check_range(tree.layout, q)
    if mode == "cover-sum":
        return float(sum(float(tree.values[r]) for r in range_cover(tree.layout, q).roots))
    if mode == "leaf-sum":
        return float(tree.leaves[q.lo - 1 : q.hi].sum())
    raise ParameterError(f"unknown range mode {mode!r}")
