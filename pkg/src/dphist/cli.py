"""``dphist`` command line: privatize | infer | query | evaluate | verify.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness, hierarchy, isotonic, oracle
from .datasets import load_dataset
from .errors import ParameterError, ParseError, RangeError
from .histogram import Range, TreeLayout, TreeVector, hierarchical_sequence, sorted_sequence
from .io import (
    Release,
    format_value,
    read_histogram_csv,
    read_ledger,
    read_release,
    write_ledger,
    write_release,
)
from .mechanism import PrivacyParams, Strategy, privatize, trial_rng

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _u64(text: str) -> int:
    try:
        value = int(text, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be a decimal integer, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _branching(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"k must be >= 2, got {text}")
    return value


def _range(text: str) -> Range:
    lo, sep, hi = text.partition(":")
    if not sep:
        lo, sep, hi = text.partition(",")
    try:
        return Range(int(lo), int(hi))
    except ValueError:
        raise argparse.ArgumentTypeError(f"range must look like LO:HI, got {text!r}") from None
    except RangeError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _output(args) -> Path:
    out = args.output or args.out
    if out is None:
        raise UsageError("an output path is required (positional or --out)")
    return Path(out)


def cmd_privatize(args) -> int:
    h = read_histogram_csv(args.input)
    strategy = Strategy.parse(args.strategy, args.k)
    params = PrivacyParams(args.epsilon, args.seed)
    out = _output(args)
    ledger_path = Path(args.ledger) if args.ledger else out.parent / "ledger.json"
    ledger = read_ledger(ledger_path)
    layout = None
    if strategy.name == "H":
        tree = hierarchical_sequence(h, args.k)
        layout, truth = tree.layout, tree.values
    elif strategy.name == "S":
        truth = sorted_sequence(h)
    else:
        truth = h.counts
    noisy = privatize(truth, strategy, params, layout=layout, ledger=ledger)
    meta = {
        "strategy": strategy.name.lower(),
        "stage": "noisy",
        "epsilon": params.epsilon,
        "sensitivity": noisy.sensitivity,
        "seed": params.seed,
        "n": h.n,
        "k": None if layout is None else layout.k,
        "height": None if layout is None else layout.height,
        "n_leaves": None if layout is None else layout.n_leaves,
    }
    write_release(out, Release(noisy.values, meta))
    write_ledger(ledger_path, ledger)
    print(f"released {strategy.label} at epsilon={params.epsilon} to {out}; budget spent {ledger.total}")
    return EXIT_OK


def infer_release(release: Release) -> Release:
    strategy = release.strategy
    if strategy == "l":
        raise UsageError("strategy l releases have no constraints to exploit")
    if strategy == "s":
        values = isotonic.round_sorted(isotonic.isotonic_pava(release.values))
    elif strategy == "h":
        tree = TreeVector(release.layout, release.values)
        values = hierarchy.round_consistent(hierarchy.constrained_inference(tree)).values
    else:
        raise ParseError(f"unknown strategy tag {strategy!r}")
    return Release(np.asarray(values), {**release.meta, "stage": "inferred"})


def cmd_infer(args) -> int:
    release = read_release(args.input)
    if args.strategy and args.strategy != release.strategy:
        raise UsageError(f"file holds a strategy {release.strategy} release, not {args.strategy}")
    out = _output(args)
    write_release(out, infer_release(release))
    print(f"wrote inferred {release.strategy} release to {out}")
    return EXIT_OK


def cmd_query(args) -> int:
    release = read_release(args.input)
    layout = release.layout
    mode = args.mode
    if mode is None:
        mode = "cover-sum" if layout is not None and release.meta["stage"] == "noisy" else "leaf-sum"
    answers = []
    for q in args.ranges:
        if layout is not None:
            value = hierarchy.answer_range(TreeVector(layout, release.values), q, mode)
        else:
            if mode == "cover-sum":
                raise UsageError("cover-sum needs a tree release")
            q.check(release.values.size)
            value = float(release.values[q.lo - 1 : q.hi].sum())
        answers.append((q, value))
    if args.format == "json":
        print(json.dumps([{"lo": q.lo, "hi": q.hi, "estimate": v} for q, v in answers]))
    else:
        print("lo,hi,estimate")
        for q, v in answers:
            print(f"{q.lo},{q.hi},{format_value(v)}")
    return EXIT_OK


def _worstcase_report(args, cfg) -> harness.ExperimentReport:
    layout = TreeLayout(args.k, args.height)
    cells, results = [], {}
    for eps in cfg.epsilons:
        r = harness.worstcase_query_experiment(layout, eps, cfg.trials, cfg.seed)
        size = layout.n_leaves - 2
        cells.append(harness.ReportCell(eps, "H_inferred", size, r.mse_inferred, r.stderr_inferred, r.trials))
        cells.append(harness.ReportCell(eps, "H_noisy", size, r.mse_noisy, r.stderr_noisy, r.trials))
        results[repr(eps)] = {"ratio": r.ratio, "ratio_stderr": r.ratio_stderr, "bound": r.bound,
                              "predicted_noisy": r.predicted_noisy}
    meta = {"experiment": "worstcase", "k": layout.k, "height": layout.height, "seed": cfg.seed,
            "config_hash": cfg.config_hash(), "results": results}
    return harness.ExperimentReport(cells, meta)


def cmd_evaluate(args) -> int:
    cfg = harness.ExperimentConfig(
        epsilons=tuple(args.epsilon or (1.0, 0.1, 0.01)),
        trials=args.trials,
        ranges_per_trial=args.ranges,
        seed=args.seed,
        k=args.k,
        dataset=args.dataset,
        workers=args.workers,
    )
    reports = []
    if args.experiment in ("unattributed", "all", "ranges"):
        h = load_dataset(cfg.dataset)
        if args.experiment in ("unattributed", "all"):
            reports.append(harness.run_unattributed_experiment(h, cfg))
        if args.experiment in ("ranges", "all"):
            reports.append(harness.run_range_experiment(h, cfg))
    if args.experiment == "worstcase":
        reports.append(_worstcase_report(args, cfg))
    report = reports[0] if len(reports) == 1 else harness.ExperimentReport.combine(reports)
    text = report.to_json() if args.format == "json" else report.to_csv()
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(report.cells)} cells to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def verify_instances(instances: int, seed: int) -> dict[str, float]:
    """Largest deviation of each fast solver from its oracle over random inputs."""
    iso_rows = []
    for i in range(instances):
        rng = trial_rng(seed, 7, i)
        n = int(rng.integers(1, 65))
        iso_rows.append(rng.normal(0.0, 10.0, size=n) + np.sort(rng.integers(0, 30, size=n)))
    dev = {"pava_vs_minmax": 0.0, "pava_vs_projection": 0.0, "inference_vs_least_squares": 0.0}
    projected = oracle.isotonic_projection_ragged(iso_rows)
    for row, proj in zip(iso_rows, projected):
        pava = isotonic.isotonic_pava(row).values
        minmax = isotonic.isotonic_minmax(row).values
        dev["pava_vs_minmax"] = max(dev["pava_vs_minmax"], float(np.max(np.abs(pava - minmax))))
        dev["pava_vs_projection"] = max(dev["pava_vs_projection"], float(np.max(np.abs(pava - proj))))
    shapes = [(2, 2), (2, 3), (2, 4), (2, 5), (2, 6), (2, 7), (3, 2), (3, 3), (3, 4), (4, 2), (4, 3), (4, 4)]
    for i in range(instances):
        rng = trial_rng(seed, 8, i)
        k, height = shapes[int(rng.integers(len(shapes)))]
        layout = TreeLayout(k, height)
        noisy = TreeVector(layout, rng.normal(0.0, 5.0, size=layout.total_nodes))
        fast = hierarchy.constrained_inference(noisy).values
        slow = oracle.ls_tree_oracle(noisy).values
        dev["inference_vs_least_squares"] = max(dev["inference_vs_least_squares"],
                                                float(np.max(np.abs(fast - slow))))
    return dev


VERIFY_TOLERANCES = {"pava_vs_minmax": 1e-6, "pava_vs_projection": 1e-6, "inference_vs_least_squares": 1e-8}


def cmd_verify(args) -> int:
    dev = verify_instances(args.instances, args.seed)
    failed = False
    for name, value in dev.items():
        ok = value <= VERIFY_TOLERANCES[name]
        failed |= not ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: max deviation {value:.3e} (tol {VERIFY_TOLERANCES[name]:g})")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    shared = _Parser(add_help=False)
    shared.add_argument("--seed", type=_u64, default=0, help="decimal u64 seed (default 0)")
    shared.add_argument("--k", type=_branching, default=2, help="branching factor for strategy h")
    shared.add_argument("--format", choices=("json", "csv"), default=None)
    shared.add_argument("--out", help="output path")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="dphist", description="Differentially private histograms with constrained inference.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("privatize", parents=[shared], help="release a noisy query answer")
    p.add_argument("input")
    p.add_argument("output", nargs="?")
    p.add_argument("--strategy", choices=("l", "s", "h"), required=True, type=str.lower)
    p.add_argument("--epsilon", type=_positive, required=True)
    p.add_argument("--ledger", help="budget ledger JSON (default: ledger.json beside the output)")
    p.set_defaults(func=cmd_privatize)

    p = sub.add_parser("infer", parents=[shared], help="constrained inference on a release")
    p.add_argument("input")
    p.add_argument("output", nargs="?")
    p.add_argument("--strategy", choices=("l", "s", "h"), type=str.lower)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("query", parents=[shared], help="answer range counts from a release")
    p.add_argument("input")
    p.add_argument("ranges", nargs="+", type=_range, metavar="LO:HI")
    p.add_argument("--mode", choices=("cover-sum", "leaf-sum"))
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("evaluate", parents=[shared], help="run the error-comparison experiments")
    p.add_argument("--dataset", default="powerlaw:n=16384,alpha=2")
    p.add_argument("--experiment", choices=("all", "unattributed", "ranges", "worstcase"), default="all")
    p.add_argument("--epsilon", type=_positive, action="append", help="repeatable (default 1.0 0.1 0.01)")
    p.add_argument("--strategy", choices=("l", "s", "h"), type=str.lower, help="ignored; accepted for symmetry")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--ranges", type=int, default=1000, help="random ranges per size and trial")
    p.add_argument("--height", type=int, default=16, help="tree height for the worstcase experiment")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify", parents=[shared], help="cross-check solvers against oracles")
    p.add_argument("--instances", type=int, default=100)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.format is None:
            args.format = "json" if args.command == "evaluate" else "csv"
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"dphist: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParameterError, RangeError) as exc:
        print(f"dphist: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, OSError) as exc:
        print(f"dphist: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
