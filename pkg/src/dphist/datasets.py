"""Deterministic synthetic histograms and dataset-spec strings.

A dataset spec is ``kind:key=value,...``, e.g. ``powerlaw:n=16384,alpha=2``,
``sparse:n=32768,density=0.05``, ``runs:n=1024,d=4`` or ``csv:path/to/file.csv``.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError
from .histogram import Histogram
from .mechanism import trial_rng

_POWERLAW, _SPARSE = 101, 102


def synth_powerlaw(n: int, alpha: float = 2.0, xmax: int | None = None, seed: int = 0) -> Histogram:
    """Counts drawn i.i.d. with P(x) proportional to x^-alpha on 1..xmax."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    if alpha <= 0:
        raise ParameterError("alpha must be positive")
    xmax = n if xmax is None else xmax
    if xmax < 1:
        raise ParameterError("xmax must be >= 1")
    support = np.arange(1, xmax + 1, dtype=float)
    weights = support**-alpha
    rng = trial_rng(seed, _POWERLAW)
    return Histogram(rng.choice(np.arange(1, xmax + 1), size=n, p=weights / weights.sum()))


def synth_sparse(n: int, density: float = 0.05, scale: float = 20.0, seed: int = 0) -> Histogram:
    """``round(density * n)`` non-empty buckets at random positions.

    Non-empty buckets hold ``1 + floor(Exp(scale))`` tuples.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if not 0 < density <= 1:
        raise ParameterError(f"density must lie in (0, 1], got {density}")
    if scale <= 0:
        raise ParameterError("scale must be positive")
    rng = trial_rng(seed, _SPARSE)
    filled = max(1, int(round(density * n)))
    where = rng.choice(n, size=filled, replace=False)
    counts = np.zeros(n, dtype=np.int64)
    counts[where] = 1 + np.floor(rng.exponential(scale, size=filled)).astype(np.int64)
    return Histogram(counts)


def synth_runs(n: int, d: int, gap: int = 1000, base: int = 0) -> Histogram:
    """``d`` equal-length runs of distinct values ``base, base+gap, ...``.

    The sorted form has exactly ``d`` distinct counts; run lengths differ by
    at most one when ``d`` does not divide ``n``.
    """
    if not 1 <= d <= n:
        raise ParameterError(f"need 1 <= d <= n, got d={d}, n={n}")
    if gap < 1 or base < 0:
        raise ParameterError("gap must be >= 1 and base >= 0")
    run = np.arange(n) * d // n
    return Histogram(base + gap * run)


def distinct_counts(values) -> tuple[int, list[int]]:
    """Number of distinct values and their multiplicities in ascending order."""
    _, mult = np.unique(np.asarray(values), return_counts=True)
    return int(mult.size), mult.tolist()


def parse_dataset_spec(spec: str) -> tuple[str, dict[str, str]]:
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "csv":
        if not rest:
            raise ParameterError("csv dataset needs a path: csv:PATH")
        return kind, {"path": rest}
    params = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ParameterError(f"bad dataset parameter {item!r}; expected key=value")
        params[key.strip()] = value.strip()
    return kind, params


def load_dataset(spec: str) -> Histogram:
    kind, params = parse_dataset_spec(spec)
    try:
        if kind == "powerlaw":
            xmax = params.get("xmax")
            return synth_powerlaw(
                int(params.get("n", 16384)),
                float(params.get("alpha", 2.0)),
                None if xmax is None else int(xmax),
                int(params.get("seed", 0)),
            )
        if kind == "sparse":
            return synth_sparse(
                int(params.get("n", 32768)),
                float(params.get("density", 0.05)),
                float(params.get("scale", 20.0)),
                int(params.get("seed", 0)),
            )
        if kind == "runs":
            return synth_runs(
                int(params.get("n", 1024)),
                int(params.get("d", 4)),
                int(params.get("gap", 1000)),
                int(params.get("base", 0)),
            )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"bad dataset spec {spec!r}: {exc}") from exc
    if kind == "csv":
        from .io import read_histogram_csv

        return read_histogram_csv(params["path"])
    raise ParameterError(f"unknown dataset kind {kind!r}")
