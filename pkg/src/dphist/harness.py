"""Monte-Carlo error comparison of the noisy, rounded and inferred estimators.

Each trial draws from its own generator keyed by (seed, experiment, epsilon,
trial), so reports are reproducible bit for bit and do not depend on how
trials are scheduled across workers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .datasets import distinct_counts
from .errors import ParameterError
from .hierarchy import cover_sums, infer_array, leaf_sums, range_cover, round_consistent_array
from .histogram import Histogram, Range, TreeLayout, hierarchical_sequence, sorted_sequence
from .isotonic import isotonic_pava, sort_round_baseline
from .mechanism import PrivacyParams, Strategy, privatize, trial_rng

log = logging.getLogger(__name__)

_UNATTRIBUTED, _RANGES, _WORSTCASE = 1, 2, 3
CSV_COLUMNS = ("epsilon", "estimator", "range_size", "mse", "stderr", "trials")


class EstimatorId(str, Enum):
    S_NOISY = "S_noisy"
    S_ROUND = "S_round"
    S_INFERRED = "S_inferred"
    L_NOISY = "L_noisy"
    H_NOISY = "H_noisy"
    H_INFERRED = "H_inferred"


@dataclass(frozen=True)
class ExperimentConfig:
    epsilons: tuple[float, ...] = (1.0, 0.1, 0.01)
    trials: int = 50
    ranges_per_trial: int = 1000
    seed: int = 0
    k: int = 2
    dataset: str = "powerlaw:n=16384,alpha=2"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        if not self.epsilons or any(not e > 0 for e in self.epsilons):
            raise ParameterError("epsilons must be a non-empty list of positive values")
        if self.trials < 1 or self.ranges_per_trial < 1:
            raise ParameterError("trials and ranges_per_trial must be positive")
        if self.k < 2:
            raise ParameterError("k must be >= 2")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")

    def config_hash(self) -> str:
        # worker count cannot change results, so it is left out of the hash
        payload = {key: value for key, value in asdict(self).items() if key != "workers"}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class ReportCell:
    epsilon: float
    estimator: str
    range_size: int | None
    mse: float
    stderr: float
    trials: int
    trial_mse: list[float] = field(default_factory=list, repr=False)


@dataclass
class ExperimentReport:
    cells: list[ReportCell]
    metadata: dict

    def get(self, epsilon: float, estimator, range_size: int | None = None) -> ReportCell:
        estimator = EstimatorId(estimator).value
        for cell in self.cells:
            if cell.epsilon == epsilon and cell.estimator == estimator and cell.range_size == range_size:
                return cell
        raise KeyError((epsilon, estimator, range_size))

    def series(self, epsilon: float, estimator) -> list[tuple[int, float]]:
        estimator = EstimatorId(estimator).value
        return sorted(
            (c.range_size, c.mse)
            for c in self.cells
            if c.epsilon == epsilon and c.estimator == estimator and c.range_size is not None
        )

    def to_dict(self) -> dict:
        return {"metadata": self.metadata, "cells": [asdict(c) for c in self.cells]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for c in self.cells:
            size = "" if c.range_size is None else c.range_size
            writer.writerow([repr(c.epsilon), c.estimator, size, repr(c.mse), repr(c.stderr), c.trials])
        return buf.getvalue()

    @classmethod
    def combine(cls, reports: Sequence["ExperimentReport"]) -> "ExperimentReport":
        return cls(
            [cell for r in reports for cell in r.cells],
            {"experiments": [r.metadata for r in reports]},
        )


def mse(samples: Iterable[Sequence[float]], truth: Sequence[float]) -> float:
    truth = np.asarray(truth, dtype=float)
    samples = [np.asarray(s, dtype=float) for s in samples]
    if not samples:
        raise ParameterError("mse needs at least one sample")
    if any(s.shape != truth.shape for s in samples):
        raise ParameterError("every sample must have the truth's length")
    return float(np.mean([np.sum((s - truth) ** 2) for s in samples]))


def _eps_key(epsilon: float) -> int:
    return int(np.float64(epsilon).view(np.uint64))


def _summarise(epsilon, estimator, size, values: Sequence[float]) -> ReportCell:
    values = [float(v) for v in values]
    t = len(values)
    stderr = float(np.std(values, ddof=1) / math.sqrt(t)) if t > 1 else 0.0
    return ReportCell(epsilon, EstimatorId(estimator).value, size, float(np.mean(values)), stderr, t, values)


def _map(fn: Callable, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


@contextmanager
def phase_timer(name: str):
    start = time.perf_counter()
    yield
    log.info("%s took %.2fs", name, time.perf_counter() - start)


def _dataset_metadata(h: Histogram, cfg: ExperimentConfig, experiment: str) -> dict:
    d, mult = distinct_counts(h.counts)
    return {
        "experiment": experiment,
        "dataset": cfg.dataset,
        "n": h.n,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "epsilons": list(cfg.epsilons),
        "trials": cfg.trials,
        "distinct_values": d,
        "multiplicities": mult,
    }


def unattributed_trial(task) -> dict[str, float]:
    truth, epsilon, seed, trial = task
    rng = trial_rng(seed, _UNATTRIBUTED, _eps_key(epsilon), trial)
    noisy = privatize(truth, Strategy.S(), PrivacyParams(epsilon, seed), rng=rng).values
    inferred = isotonic_pava(noisy).values
    return {
        EstimatorId.S_NOISY.value: float(np.sum((noisy - truth) ** 2)),
        EstimatorId.S_ROUND.value: float(np.sum((sort_round_baseline(noisy) - truth) ** 2)),
        EstimatorId.S_INFERRED.value: float(np.sum((inferred - truth) ** 2)),
    }


def run_unattributed_experiment(h: Histogram, cfg: ExperimentConfig) -> ExperimentReport:
    """Whole-vector squared error of the sorted-count estimators."""
    truth = sorted_sequence(h).astype(float)
    cells = []
    for epsilon in cfg.epsilons:
        with phase_timer(f"unattributed eps={epsilon}"):
            tasks = [(truth, epsilon, cfg.seed, t) for t in range(cfg.trials)]
            results = _map(unattributed_trial, tasks, cfg.workers)
        for est in (EstimatorId.S_NOISY, EstimatorId.S_ROUND, EstimatorId.S_INFERRED):
            cells.append(_summarise(epsilon, est, None, [r[est.value] for r in results]))
    return ExperimentReport(cells, _dataset_metadata(h, cfg, "unattributed"))


def range_sizes(layout: TreeLayout, n: int) -> list[int]:
    """Sizes 2^i for i = 1 .. height-2 that fit in the domain."""
    return [2**i for i in range(1, layout.height - 1) if 2**i <= n]


def range_trial(task) -> dict[tuple[int, str], float]:
    counts, layout, tree_truth, sizes, epsilon, seed, n_ranges, trial = task
    n = counts.size
    rng = trial_rng(seed, _RANGES, _eps_key(epsilon), trial)
    params = PrivacyParams(epsilon, seed)
    noisy_l = privatize(counts, Strategy.L(), params, rng=rng).values
    noisy_h = privatize(tree_truth, Strategy.H(layout.k), params, layout=layout, rng=rng).values
    inferred = round_consistent_array(infer_array(noisy_h, layout), layout)
    inferred_leaves = inferred[layout.leaf_slice]
    out = {}
    for size in sizes:
        lo = rng.integers(1, n - size + 2, size=n_ranges)
        hi = lo + size - 1
        true = leaf_sums(counts, lo, hi)
        estimates = {
            EstimatorId.L_NOISY.value: leaf_sums(noisy_l, lo, hi),
            EstimatorId.H_NOISY.value: cover_sums(noisy_h, layout, lo, hi),
            EstimatorId.H_INFERRED.value: leaf_sums(inferred_leaves, lo, hi),
        }
        for est, values in estimates.items():
            out[(size, est)] = float(np.mean((values - true) ** 2))
    return out


def run_range_experiment(h: Histogram, cfg: ExperimentConfig) -> ExperimentReport:
    """Range-query error of unit counts, the raw tree and the rounded inferred tree."""
    layout = TreeLayout.for_domain(h.n, cfg.k)
    counts = h.counts.astype(float)
    tree_truth = hierarchical_sequence(h, cfg.k).values.astype(float)
    sizes = range_sizes(layout, h.n)
    cells = []
    for epsilon in cfg.epsilons:
        with phase_timer(f"ranges eps={epsilon}"):
            tasks = [
                (counts, layout, tree_truth, sizes, epsilon, cfg.seed, cfg.ranges_per_trial, t)
                for t in range(cfg.trials)
            ]
            results = _map(range_trial, tasks, cfg.workers)
        for size in sizes:
            for est in (EstimatorId.L_NOISY, EstimatorId.H_NOISY, EstimatorId.H_INFERRED):
                cells.append(_summarise(epsilon, est, size, [r[(size, est.value)] for r in results]))
    meta = _dataset_metadata(h, cfg, "ranges")
    meta.update(k=layout.k, height=layout.height, n_leaves=layout.n_leaves,
                range_sizes=sizes, ranges_per_trial=cfg.ranges_per_trial)
    return ExperimentReport(cells, meta)


@dataclass(frozen=True)
class WorstCaseResult:
    ratio: float
    ratio_stderr: float
    mse_inferred: float
    mse_noisy: float
    stderr_inferred: float
    stderr_noisy: float
    bound: float
    predicted_noisy: float
    trials: int


def worstcase_bound(layout: TreeLayout) -> float:
    return 3.0 / (2 * (layout.height - 1) * (layout.k - 1) - layout.k)


def worstcase_noisy_error(layout: TreeLayout, epsilon: float) -> float:
    """Expected error of the cover-sum answer to the all-but-both-ends query."""
    nodes = 2 * (layout.k - 1) * (layout.height - 1) - layout.k
    return 2.0 * nodes * layout.height**2 / epsilon**2


def worstcase_query_experiment(
    layout: TreeLayout, epsilon: float, trials: int, seed: int = 0, batch: int = 50
) -> WorstCaseResult:
    """Inferred vs raw-tree error on the query covering all leaves but the two ends.

    Runs on the all-zero histogram with the unrounded least-squares tree.
    """
    if layout.n_leaves < 3:
        raise ParameterError("the query needs at least three leaves")
    if trials < 2:
        raise ParameterError("need at least two trials for a standard error")
    n = layout.n_leaves
    roots = np.array(range_cover(layout, Range(2, n - 1)).roots)
    zero = np.zeros(layout.total_nodes)
    params = PrivacyParams(epsilon, seed)
    err_inf, err_noisy = [], []
    for start in range(0, trials, batch):
        block = np.stack([
            privatize(zero, Strategy.H(layout.k), params, layout=layout,
                      rng=trial_rng(seed, _WORSTCASE, _eps_key(epsilon), t)).values
            for t in range(start, min(trials, start + batch))
        ])
        inferred = infer_array(block, layout)
        err_inf.append(inferred[:, layout.leaf_slice][:, 1 : n - 1].sum(axis=1) ** 2)
        err_noisy.append(block[:, roots].sum(axis=1) ** 2)
    a = np.concatenate(err_inf)
    b = np.concatenate(err_noisy)
    ma, mb = a.mean(), b.mean()
    cov = np.cov(a, b, ddof=1) / trials
    ratio = ma / mb
    # delta method for the ratio of two correlated means
    var_ratio = cov[0, 0] / mb**2 + ma**2 * cov[1, 1] / mb**4 - 2 * ma * cov[0, 1] / mb**3
    return WorstCaseResult(
        ratio=float(ratio),
        ratio_stderr=float(math.sqrt(max(var_ratio, 0.0))),
        mse_inferred=float(ma),
        mse_noisy=float(mb),
        stderr_inferred=float(math.sqrt(cov[0, 0])),
        stderr_noisy=float(math.sqrt(cov[1, 1])),
        bound=worstcase_bound(layout),
        predicted_noisy=worstcase_noisy_error(layout, epsilon),
        trials=trials,
    )
