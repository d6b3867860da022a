"""Laboratory for floating-point summation error analysis.

Emulates low- and mixed-precision summation under round-to-nearest and
stochastic rounding, verifies exact error identities against traced
roundoffs, and evaluates deterministic and probabilistic error bounds.
"""

from .batch import (
    BatchCompensatedResult,
    BatchShiftedResult,
    BatchTreeResult,
    LevelSchedule,
    batch_compensated,
    batch_quantize,
    batch_shifted_bounds,
    batch_shifted_sum,
    batch_tree_bounds,
    batch_tree_sum,
    level_schedule,
)
from .bounds import (
    BOUND_IDS,
    Constants,
    ProbBudget,
    compensated_bounds,
    constants,
    det_bounds,
    f_table,
    mixed_bounds,
    prob_bounds_general,
    shifted_bounds,
)
from .harness import (
    CSV_COLUMNS,
    EXPERIMENTS,
    SCHEMA_VERSION,
    CoverageEntry,
    ExperimentConfig,
    ExperimentRow,
    config_from_mapping,
    coverage_report,
    default_grid,
    parse_config_text,
    read_csv,
    run_experiment,
    trial_seed,
    write_csv,
)
from .kernels import (
    CompensatedTrace,
    ShiftedRun,
    TracedRun,
    choose_shift,
    run_compensated,
    run_fabsum,
    run_shifted_sum,
    run_tree_sum,
)
from .oracles import (
    ChildErrorTable,
    check_rho_bound,
    compensated_child_errors,
    compensated_second_order,
    error_via_child_recurrence,
    error_via_local_products,
    first_order_error,
    replay_compensated,
    replay_tree_sum,
)
from .rounding import (
    Precision,
    RoundingMode,
    RoundoffRecord,
    emulated_add,
    emulated_mul,
    emulated_sub,
    round_value,
    round_vector,
)
from .trees import (
    CompTree,
    TreeStats,
    build_fabsum,
    build_pairwise,
    build_random_tree,
    build_sequential,
    dump_tree,
    exact_partial_sums,
    internal_ref,
    is_leaf_ref,
    leaf_ref,
    load_tree,
    tree_stats,
)
from .verify import (
    CheckResult,
    check_alpha,
    check_compensated_recurrences,
    check_constants,
    check_convergence_orders,
    check_coverage,
    check_deterministic_domination,
    check_error_identities,
    check_reduction_consistency,
    core_suites,
    trend_compensated,
    trend_fabsum_fullscale,
    trend_shifted,
    trend_tree,
)

__version__ = "0.1.0"
