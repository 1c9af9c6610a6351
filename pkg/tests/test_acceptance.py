"""Acceptance criteria, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the lines appear in the log
even without ``-s``.
"""

import time

import numpy as np
import pytest

from dphist import (
    Histogram,
    PrivacyParams,
    Strategy,
    TreeLayout,
    TreeVector,
    constrained_inference,
    hierarchical_sequence,
    isotonic_minmax,
    isotonic_pava,
    neighbors,
    privatize,
    sorted_sequence,
    trial_rng,
)
from dphist.datasets import synth_runs, synth_sparse
from dphist.harness import (
    EstimatorId,
    ExperimentConfig,
    mse,
    run_range_experiment,
    run_unattributed_experiment,
    worstcase_query_experiment,
)
from dphist.hierarchy import infer_array
from dphist.oracle import isotonic_projection_ragged, ls_tree_oracle

from conftest import FIG1_INFERRED_TREE, FIG1_NOISY_TREE

S_TOL = 4  # sampling slack in standard errors


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, start):
        with capsys.disabled():
            print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} {detail} [{time.perf_counter() - start:.1f}s]")
        return ok

    return emit


def test_criterion_01_fig1_round_trip(report):
    start = time.perf_counter()
    tree = constrained_inference(TreeVector(TreeLayout(2, 3), np.array(FIG1_NOISY_TREE, dtype=float)))
    tree_dev = float(np.max(np.abs(tree.values - FIG1_INFERRED_TREE)))
    cases = [
        ([1, 2, 0, 11], [1, 1, 1, 11]),
        ([9, 10, 14], [9, 10, 14]),
        ([9, 14, 10], [9, 12, 12]),
        ([14, 9, 10, 15], [11, 11, 11, 15]),
    ]
    iso_ok = all(
        np.array_equal(solver(np.array(x, dtype=float)).values, y)
        for x, y in cases
        for solver in (isotonic_pava, isotonic_minmax)
    )
    ok = tree_dev < 1e-9 and iso_ok
    assert report(1, ok, f"tree max deviation {tree_dev:.1e}, isotonic examples exact={iso_ok}", start)


def test_criterion_02_oracle_equivalence(report):
    start = time.perf_counter()
    rows = []
    for i in range(1000):
        rng = trial_rng(2, 1, i)
        n = int(rng.integers(1, 65))
        rows.append(rng.normal(0, 10, n) + np.sort(rng.integers(0, 40, n)))
    projected = isotonic_projection_ragged(rows)
    iso_dev = 0.0
    for row, proj in zip(rows, projected):
        pava = isotonic_pava(row).values
        minmax = isotonic_minmax(row).values
        iso_dev = max(iso_dev, float(np.max(np.abs(pava - minmax))), float(np.max(np.abs(pava - proj))),
                      float(np.max(np.abs(minmax - proj))))
    shapes = [(2, h) for h in range(2, 8)] + [(3, h) for h in range(2, 5)] + [(4, h) for h in range(2, 5)]
    tree_dev = 0.0
    for i in range(1000):
        rng = trial_rng(2, 2, i)
        k, height = shapes[i % len(shapes)]
        layout = TreeLayout(k, height)
        noisy = TreeVector(layout, rng.normal(0, 10, layout.total_nodes))
        diff = constrained_inference(noisy).values - ls_tree_oracle(noisy).values
        tree_dev = max(tree_dev, float(np.max(np.abs(diff))))
    elapsed = time.perf_counter() - start
    ok = iso_dev <= 1e-6 and tree_dev <= 1e-8 and elapsed < 30
    assert report(2, ok, f"isotonic dev {iso_dev:.1e} (tol 1e-6), tree dev {tree_dev:.1e} (tol 1e-8)", start)


def test_criterion_03_non_expansive(report):
    start = time.perf_counter()
    violations = 0
    for t in range(1000):
        rng = trial_rng(3, t)
        counts = rng.integers(0, 50, int(rng.integers(1, 65)))
        h = Histogram(counts)
        eps = float(rng.choice([0.1, 1.0, 10.0]))
        params = PrivacyParams(eps, t)
        s = sorted_sequence(h).astype(float)
        s_noisy = privatize(s, Strategy.S(), params, rng=rng).values
        s_bar = isotonic_pava(s_noisy).values
        violations += np.linalg.norm(s_bar - s) > np.linalg.norm(s_noisy - s)
        tree = hierarchical_sequence(h, 2)
        truth = tree.values.astype(float)
        h_noisy = privatize(truth, Strategy.H(2), params, layout=tree.layout, rng=rng).values
        h_bar = infer_array(h_noisy, tree.layout)
        violations += np.linalg.norm(h_bar - truth) > np.linalg.norm(h_noisy - truth)
    assert report(3, violations == 0, f"{violations} violations in 1000 trials x 2 strategies", start)


def _coordinate_variance(truth, strategy, eps, layout, trials, seed):
    samples = np.stack([
        privatize(truth, strategy, PrivacyParams(eps, seed), layout=layout, rng=trial_rng(seed, t)).values
        for t in range(trials)
    ])
    return (samples - truth).var(axis=0, ddof=1)


def test_criterion_04_noise_calibration(report):
    start = time.perf_counter()
    t = 10**5
    s_truth = sorted_sequence(Histogram([4, 0, 9, 2, 2, 7, 1, 3])).astype(float)
    s_var = _coordinate_variance(s_truth, Strategy.S(), 1.0, None, t, 41)
    s_dev = float(np.max(np.abs(s_var / 2.0 - 1)))
    tree = hierarchical_sequence(Histogram([4, 0, 9, 2, 2, 7, 1, 3]), 2)  # height 4
    h_var = _coordinate_variance(tree.values.astype(float), Strategy.H(2), 1.0, tree.layout, t, 42)
    h_dev = float(np.max(np.abs(h_var / (2.0 * 4**2) - 1)))
    big = TreeLayout(2, 16)
    pooled = np.concatenate([
        privatize(np.zeros(big.total_nodes), Strategy.H(2), PrivacyParams(0.1), layout=big,
                  rng=trial_rng(43, r)).values
        for r in range(100)
    ])
    pooled_dev = abs(pooled.var() / (2 * (16 / 0.1) ** 2) - 1)
    truth = np.zeros(1024)
    l_mse = mse(
        [privatize(truth, Strategy.L(), PrivacyParams(1.0), rng=trial_rng(44, r)).values for r in range(200)],
        truth,
    )
    l_dev = abs(l_mse / 2048 - 1)
    ok = s_dev < 0.05 and h_dev < 0.05 and pooled_dev < 0.05 and l_dev < 0.10
    detail = (f"S var dev {s_dev:.3f}, H(l=4) var dev {h_dev:.3f}, pooled H(l=16) dev {pooled_dev:.3f} "
              f"(tol 0.05); error(L) {l_mse:.0f} vs 2048 dev {l_dev:.3f} (tol 0.10)")
    assert report(4, ok, detail, start)


def test_criterion_05_sensitivity_witnesses(report):
    start = time.perf_counter()
    worst = {"L": 0, "S": 0, "H": 0}
    heights_ok = True
    for i in range(50):
        rng = trial_rng(5, i)
        h = Histogram(rng.integers(0, 6, int(rng.integers(1, 33))))
        base_l = h.counts.astype(np.int64)
        base_s = sorted_sequence(h)
        base_tree = hierarchical_sequence(h, 2)
        local_h = 0
        for nb in neighbors(h):
            worst["L"] = max(worst["L"], int(np.abs(nb.counts - base_l).sum()))
            worst["S"] = max(worst["S"], int(np.abs(sorted_sequence(nb) - base_s).sum()))
            local_h = max(local_h, int(np.abs(hierarchical_sequence(nb, 2).values - base_tree.values).sum()))
        heights_ok &= local_h == base_tree.layout.height
    ok = worst["L"] == 1 and worst["S"] == 1 and heights_ok
    assert report(5, ok, f"max L1 L={worst['L']} S={worst['S']}, H equals height on every tree={heights_ok}",
                  start)


def test_criterion_06_worst_case_query(report):
    start = time.perf_counter()
    res = worstcase_query_experiment(TreeLayout(2, 16), 1.0, 2000, seed=6)
    limit = 3 / 28 + S_TOL * res.ratio_stderr
    noisy_dev = abs(res.mse_noisy / res.predicted_noisy - 1)
    elapsed = time.perf_counter() - start
    ok = res.ratio <= limit and noisy_dev < 0.10 and elapsed < 120
    detail = (f"ratio {res.ratio:.4f} +/- {res.ratio_stderr:.4f} vs limit {limit:.4f}; "
              f"error(H noisy) {res.mse_noisy:.0f} vs {res.predicted_noisy:.0f} dev {noisy_dev:.3f} (tol 0.10)")
    assert report(6, ok, detail, start)


def test_criterion_07_unbiased(report):
    start = time.perf_counter()
    rng = trial_rng(7)
    tree = hierarchical_sequence(Histogram(rng.integers(0, 100, 16)), 2)
    truth = tree.values.astype(float)
    t = 10**4
    noisy = np.stack([
        privatize(truth, Strategy.H(2), PrivacyParams(1.0), layout=tree.layout, rng=trial_rng(7, 1, i)).values
        for i in range(t)
    ])
    fit = infer_array(noisy, tree.layout)
    z = (fit.mean(axis=0) - truth) / (fit.std(axis=0, ddof=1) / np.sqrt(t))
    worst = float(np.max(np.abs(z)))
    assert report(7, worst <= S_TOL, f"max |mean - truth| = {worst:.2f} standard errors over 31 nodes", start)


def test_criterion_08_unattributed_trend(report):
    start = time.perf_counter()
    cfg = ExperimentConfig(epsilons=(0.1,), trials=50)
    inferred, noisy = {}, {}
    for d in (1, 4, 16, 64):
        rep = run_unattributed_experiment(synth_runs(1024, d), cfg)
        inferred[d] = rep.get(0.1, EstimatorId.S_INFERRED).mse
        noisy[d] = rep.get(0.1, EstimatorId.S_NOISY).mse
    factor = noisy[4] / inferred[4]
    series = [inferred[d] for d in (1, 4, 16, 64)]
    monotone = all(a < b for a, b in zip(series, series[1:]))
    ok = factor >= 10 and monotone
    detail = (f"d=4 reduction x{factor:.1f} (need >= 10); error(S inferred) over d=1,4,16,64: "
              + ", ".join(f"{v:.0f}" for v in series))
    assert report(8, ok, detail, start)


def _range_checks(h):
    rep = run_range_experiment(h, ExperimentConfig(epsilons=(0.1,), trials=50, ranges_per_trial=1000))
    sizes = rep.metadata["range_sizes"]
    l_err = [rep.get(0.1, EstimatorId.L_NOISY, s).mse for s in sizes]
    h_err = [rep.get(0.1, EstimatorId.H_NOISY, s).mse for s in sizes]
    bar = [rep.get(0.1, EstimatorId.H_INFERRED, s).mse for s in sizes]
    worse = [s for s, a, b in zip(sizes, bar, h_err) if a > b]
    slope = float(np.polyfit(np.log(sizes), np.log(l_err), 1)[0])
    cross = [s for s, a, b in zip(sizes, h_err, l_err) if a < b and s <= 2**12]
    return sizes, worse, slope, cross, bar, h_err


def test_criterion_09_range_trends(report, capsys):
    start = time.perf_counter()
    _, worse, slope, cross, _, _ = _range_checks(synth_sparse(2**15, density=0.05))
    uniform = not worse
    ok = uniform and abs(slope - 1) <= 0.15 and bool(cross) and time.perf_counter() - start < 300
    detail = (f"H inferred <= H noisy in every cell={uniform} (worse at sizes {worse}); "
              f"L slope {slope:.3f} (1 +/- 0.15); first crossover size {cross[0] if cross else None}")
    report(9, ok, detail, start)
    # same protocol on dense counts near 1000, where the clamp at zero is inactive
    dense = Histogram(trial_rng(9).poisson(1000, 2**15))
    _, d_worse, _, _, d_bar, d_h = _range_checks(dense)
    with capsys.disabled():
        ratios = ", ".join(f"{a / b:.2f}" for a, b in zip(d_bar, d_h))
        print(f"CRITERION 9 (info, dense counts): cells with H inferred > H noisy: {d_worse}; "
              f"ratios by size {ratios}")
    assert ok


def test_criterion_10_note(capsys):
    with capsys.disabled():
        print("\nCRITERION 10: NOTE absolute figure values need proprietary datasets; "
              "criteria 8 and 9 use synthetic data")
