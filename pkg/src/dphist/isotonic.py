"""Constrained inference for sorted (unattributed) histograms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class IsotonicSolution:
    """Closest non-decreasing vector to the noisy input.

    ``blocks`` lists maximal constant runs as ``(start, end, level)`` with
    1-based inclusive bucket positions.
    """

    values: np.ndarray
    blocks: tuple[tuple[int, int, float], ...]


def _as_input(noisy: Sequence[float]) -> np.ndarray:
    x = np.asarray(noisy, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ParameterError("isotonic regression needs a non-empty 1-D vector")
    return x


def isotonic_pava(noisy: Sequence[float]) -> IsotonicSolution:
    """Pool adjacent violators: merge out-of-order neighbours into their mean."""
    x = _as_input(noisy)
    # Parallel stacks of block sums, lengths and first positions.
    sums: list[float] = []
    lens: list[int] = []
    starts: list[int] = []
    for i, value in enumerate(x.tolist()):
        s, c, st = value, 1, i
        while sums and sums[-1] * c >= s * lens[-1]:
            s += sums.pop()
            c += lens.pop()
            st = starts.pop()
        sums.append(s)
        lens.append(c)
        starts.append(st)
    levels = np.array(sums) / np.array(lens)
    values = np.repeat(levels, lens)
    blocks = tuple(
        (st + 1, st + c, float(level)) for st, c, level in zip(starts, lens, levels)
    )
    return IsotonicSolution(values, blocks)


def _blocks_from_values(x: np.ndarray, values: np.ndarray) -> tuple[tuple[int, int, float], ...]:
    # Mathematically equal levels may differ in the last bits when they come out
    # of different (i, j) means, so runs are grouped with a relative tolerance.
    scale = max(1.0, float(np.max(np.abs(x))))
    breaks = np.flatnonzero(np.diff(values) > 1e-12 * scale) + 1
    bounds = np.concatenate(([0], breaks, [x.size]))
    return tuple(
        (int(a) + 1, int(b), float(x[a:b].mean())) for a, b in zip(bounds[:-1], bounds[1:])
    )


def isotonic_minmax(noisy: Sequence[float]) -> IsotonicSolution:
    """Max-min characterisation ``max_{i<=k} min_{j>=i} mean(noisy[i..j])``.

    Quadratic time and memory; meant as a second witness to :func:`isotonic_pava`.
    """
    x = _as_input(noisy)
    n = x.size
    prefix = np.concatenate(([0.0], np.cumsum(x)))
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        means = (prefix[j + 1] - prefix[i]) / (j - i + 1)
    means = np.where(j >= i, means, np.inf)
    best_from = means.min(axis=1)
    values = np.maximum.accumulate(best_from)
    return IsotonicSolution(values, _blocks_from_values(x, values))


def round_nonnegative(x) -> np.ndarray:
    """Nearest integer (halves away from zero), then clamp at 0."""
    x = np.asarray(x, dtype=float)
    rounded = np.sign(x) * np.floor(np.abs(x) + 0.5)
    return np.maximum(rounded, 0).astype(np.int64)


def sort_round_baseline(noisy: Sequence[float]) -> np.ndarray:
    """Sort the noisy counts, then round each to the nearest non-negative integer."""
    x = _as_input(noisy)
    return round_nonnegative(np.sort(x))


def round_sorted(sol: IsotonicSolution) -> np.ndarray:
    return round_nonnegative(sol.values)
