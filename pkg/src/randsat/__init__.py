"""Satisfiability transition of random CNF with unrestricted clause length."""

from .analytics import (
    CriticalDensities,
    MomentReport,
    clause_sat_prob,
    critical_densities,
    ksat_reference,
    log2_expected_solutions,
    log2_second_moment,
    mean_field_prob,
    pair_sat_prob,
    relative_variance,
    sample_space_report,
    sat_prob_bounds,
    scaling_prob,
)
from .core import (
    Assignment,
    CapacityError,
    Clause,
    Formula,
    SatResult,
    count_solutions,
    evaluate,
    is_satisfiable,
)
from .estimator import ThresholdLogistic
from .experiments import (
    SweepResult,
    ThresholdFit,
    TrialRecord,
    bounds_audit,
    collapse_check,
    estimate_threshold,
    run_sweep,
    run_trial,
)
from .randgen import (
    DimacsError,
    ModelParams,
    SeedSpec,
    decode_dimacs,
    derive_stream,
    encode_dimacs,
    generate_formula,
    sample_clause,
)

__version__ = "0.1.0"
