"""meanlcb: lower confidence bounds for the mean of a distribution with
known finite support, exact for a chosen sample ordering.

The package enumerates the sample space of a given support and sample
size, evaluates set probabilities as exact-coefficient polynomials over
the probability simplex, solves the constrained minimum-mean problems
that define the bounds, classifies orderings by admissibility, and audits
arbitrary bound functions for validity.  Hot kernels run under numba when
available, with a pure-numpy fallback selected by the ``MEANLCB_NO_NUMBA``
environment variable.
"""

from ._kernels import FALLBACK_ENV, HAS_NUMBA, active_kernel_name, warmup
from .analysis import (
    BoundFunction,
    ComparisonResult,
    CoverageResult,
    PriorConfig,
    ValidityReport,
    compare,
    count_possible_error_sets,
    error_set,
    realizable_error_sets,
    simulate_coverage,
    verify_validity,
)
from .bounds import (
    AdmissibilityReport,
    BoundEntry,
    BoundTable,
    BreakabilityRecord,
    Ordering,
    TieCluster,
    classify_admissibility,
    compute_bound_table,
    detect_ties,
    enumerate_admissible,
    load_order_file,
    report_to_jsonable,
    standard_ordering,
    table_to_jsonable,
    test_breakability,
)
from .lattice import (
    Sample,
    SampleSpace,
    SupportSet,
    counts_to_sample,
    enumerate_sample_space,
    multinomial_coefficient,
    normalize_support,
    sample_to_counts,
    space_from_jsonable,
    space_to_json,
    space_to_jsonable,
)
from .likelihood import (
    Distribution,
    SubsetLikelihood,
    build_subset_likelihood,
    contour_grid,
    evaluate,
    gradient,
    point_mass,
    sample_likelihood,
)
from .solver import (
    CapExceededError,
    CentralProblem,
    NonConvergenceError,
    SolveResult,
    SolverConfig,
    binomial_tail_oracle,
    grid_oracle,
    maximize_constrained,
    solve_central,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "FALLBACK_ENV",
    "HAS_NUMBA",
    "active_kernel_name",
    "warmup",
    "SupportSet",
    "Sample",
    "SampleSpace",
    "normalize_support",
    "enumerate_sample_space",
    "sample_to_counts",
    "counts_to_sample",
    "multinomial_coefficient",
    "space_to_jsonable",
    "space_from_jsonable",
    "space_to_json",
    "Distribution",
    "point_mass",
    "SubsetLikelihood",
    "build_subset_likelihood",
    "sample_likelihood",
    "evaluate",
    "gradient",
    "contour_grid",
    "SolverConfig",
    "CentralProblem",
    "SolveResult",
    "CapExceededError",
    "NonConvergenceError",
    "maximize_constrained",
    "solve_central",
    "grid_oracle",
    "binomial_tail_oracle",
    "Ordering",
    "standard_ordering",
    "load_order_file",
    "BoundEntry",
    "BoundTable",
    "compute_bound_table",
    "TieCluster",
    "detect_ties",
    "BreakabilityRecord",
    "test_breakability",
    "AdmissibilityReport",
    "classify_admissibility",
    "enumerate_admissible",
    "table_to_jsonable",
    "report_to_jsonable",
    "BoundFunction",
    "error_set",
    "count_possible_error_sets",
    "realizable_error_sets",
    "ValidityReport",
    "verify_validity",
    "CoverageResult",
    "simulate_coverage",
    "PriorConfig",
    "ComparisonResult",
    "compare",
]
