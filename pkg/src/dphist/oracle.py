"""Brute-force solvers used only to cross-check the fast inference paths.

Nothing in the release pipeline calls into this module; the test-suite and
``dphist verify`` do.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, DPHistError, ParameterError
from .histogram import TreeLayout, TreeVector

MAX_ORACLE_LEAVES = 64
MAX_ORACLE_LENGTH = 256


def aggregation_matrix(layout: TreeLayout) -> np.ndarray:
    """0/1 matrix mapping leaf counts to every node count (rows in BFS order)."""
    a = np.zeros((layout.total_nodes, layout.n_leaves))
    for node in range(layout.total_nodes):
        span = layout.leaf_range(node)
        a[node, span.lo - 1 : span.hi] = 1.0
    return a


def gaussian_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a x = b`` by Gaussian elimination with partial pivoting."""
    m = np.array(a, dtype=float)
    rhs = np.array(b, dtype=float)
    n = m.shape[0]
    if m.shape != (n, n) or rhs.shape[0] != n:
        raise ParameterError("gaussian_solve needs a square system")
    scale = np.abs(m).max() or 1.0
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(m[col:, col])))
        if abs(m[pivot, col]) <= 1e-13 * scale:
            raise DPHistError(f"singular system at column {col}")
        if pivot != col:
            m[[col, pivot]] = m[[pivot, col]]
            rhs[[col, pivot]] = rhs[[pivot, col]]
        factors = m[col + 1 :, col] / m[col, col]
        m[col + 1 :, col:] -= np.outer(factors, m[col, col:])
        rhs[col + 1 :] -= np.multiply.outer(factors, rhs[col])
    x = np.zeros_like(rhs)
    for row in range(n - 1, -1, -1):
        x[row] = (rhs[row] - m[row, row + 1 :] @ x[row + 1 :]) / m[row, row]
    return x


def ls_tree_oracle(noisy: TreeVector) -> TreeVector:
    """Ordinary least squares on leaf unknowns via the normal equations."""
    layout = noisy.layout
    if layout.n_leaves > MAX_ORACLE_LEAVES:
        raise ParameterError(f"dense oracle limited to {MAX_ORACLE_LEAVES} leaves")
    a = aggregation_matrix(layout)
    leaves = gaussian_solve(a.T @ a, a.T @ np.asarray(noisy.values, dtype=float))
    return TreeVector(layout, a @ leaves)


def _project_pairs(y: np.ndarray, first: int) -> np.ndarray:
    """Exact projection onto {y[i] <= y[i+1]} for i = first, first+2, ...

    Those half-spaces touch disjoint coordinate pairs, so projecting onto each
    one independently is the projection onto their intersection.
    """
    out = y.copy()
    m = (y.shape[-1] - first) // 2
    a = y[..., first : first + 2 * m : 2]
    b = y[..., first + 1 : first + 2 * m : 2]
    mean = 0.5 * (a + b)
    bad = a > b
    out[..., first : first + 2 * m : 2] = np.where(bad, mean, a)
    out[..., first + 1 : first + 2 * m : 2] = np.where(bad, mean, b)
    return out


def isotonic_projection_oracle(noisy, max_iters: int = 200_000, tol: float = 1e-10) -> np.ndarray:
    """Dykstra's alternating projections onto the monotone cone.

    The ordering half-spaces are split into the even- and odd-indexed groups
    and Dykstra's correction terms are kept for both. A 2-D input is treated
    as a batch of independent rows.
    """
    x = np.array(noisy, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] == 0:
        raise ParameterError("expected a non-empty vector or a batch of rows")
    if x.shape[-1] > MAX_ORACLE_LENGTH:
        raise ParameterError(f"projection oracle limited to length {MAX_ORACLE_LENGTH}")
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    moved = np.inf
    for _ in range(max_iters):
        y = _project_pairs(x + p, 0)
        p = x + p - y
        nxt = _project_pairs(y + q, 1)
        q = y + q - nxt
        moved = float(np.max(np.abs(nxt - x))) if x.size else 0.0
        x = nxt
        if moved < tol:
            return x
    raise ConvergenceError(f"no convergence after {max_iters} sweeps", moved)


def isotonic_projection_ragged(rows, max_iters: int = 200_000, tol: float = 1e-10) -> list[np.ndarray]:
    """Run :func:`isotonic_projection_oracle` on rows of different lengths in one batch.

    Short rows are padded with strictly increasing values well above their
    maximum; those padding constraints stay inactive, so the projection of the
    original prefix is unchanged.
    """
    rows = [np.asarray(r, dtype=float) for r in rows]
    width = max(r.size for r in rows)
    batch = np.empty((len(rows), width))
    for i, r in enumerate(rows):
        spread = float(np.ptp(r)) + 1.0
        batch[i, : r.size] = r
        batch[i, r.size :] = r.max() + spread * np.arange(1, width - r.size + 1)
    projected = isotonic_projection_oracle(batch, max_iters=max_iters, tol=tol)
    return [projected[i, : r.size] for i, r in enumerate(rows)]
