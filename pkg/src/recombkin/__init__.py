"""Mean-field kinetics and finite-population simulation of genome
distributions evolving under per-site mutation and similarity-dependent
homologous recombination."""

from .errors import NumericError, PreconditionError, RecombkinError, ValidationError
from .spaces import (
    AlphabetSpec,
    Distribution,
    SubsetMask,
    all_subset_masks,
    decode,
    encode,
    interval_masks,
    l1_distance,
    marginal_values,
    marginalize,
    neg_entropy,
    product_measure,
    relative_entropy,
    splice,
    total_variation,
)
from .mutation import (
    MutationModel,
    SiteRateMatrix,
    ValidationReport,
    mutation_rhs,
    site_stationary,
    stationary_product_law,
    validate_sites,
)
from .recombination import (
    RecombinationModel,
    Similarity,
    max_admissible_dt,
    recombination_rhs,
    split_product_law,
    transition_matrix,
)
from .kinetics import (
    EntropyContractionReport,
    IntegratorConfig,
    MonotonicityReport,
    RecombinationStepReport,
    TrajectoryRecord,
    check_entropy_contraction,
    check_recombination_step,
    integrate,
    lyapunov_monotonicity_audit,
    relative_entropy_rate_mutation,
    total_rhs,
)
from .population import (
    PopulationState,
    RateSummary,
    SimConfig,
    SimulationResult,
    empirical_distribution,
    event_rates,
    run_replicates,
    simulate,
    step,
)
from .diagnostics import (
    hamming_histogram,
    product_law_hamming_prediction,
    structure_score,
)

__version__ = "0.1.0"
