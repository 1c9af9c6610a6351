"""Differentially private histograms boosted by constrained inference."""

from .errors import ConvergenceError, DPHistError, ParameterError, ParseError, RangeError
from .harness import (
    EstimatorId,
    ExperimentConfig,
    ExperimentReport,
    mse,
    run_range_experiment,
    run_unattributed_experiment,
    worstcase_query_experiment,
)
from .datasets import synth_powerlaw, synth_runs, synth_sparse
from .hierarchy import (
    answer_range,
    compute_z,
    constrained_inference,
    range_cover,
    round_consistent,
    zero_nonpositive_subtrees,
)
from .histogram import (
    Histogram,
    Range,
    TreeLayout,
    TreeVector,
    hierarchical_sequence,
    neighbors,
    range_count,
    sorted_sequence,
    validate_sorted,
    validate_tree,
)
from .isotonic import IsotonicSolution, isotonic_minmax, isotonic_pava, round_sorted, sort_round_baseline
from .mechanism import (
    BudgetLedger,
    NoisyVector,
    PrivacyParams,
    Strategy,
    laplace_sample,
    privatize,
    sensitivity_of,
    trial_rng,
)
from .oracle import isotonic_projection_oracle, ls_tree_oracle

__version__ = "0.1.0"
