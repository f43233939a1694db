"""Cartesian credible sets for Bayesian variable selection.

Post-processes posterior samples over variable-inclusion vectors into
factorized credible sets: variables are partitioned into blocks, each block
keeps a small set of plausible sub-models, and the full set is the Cartesian
product of the block sets.  Ships with a desk-scale spike-and-slab linear
regression sampler, synthetic benchmark generators, and brute-force oracles
for validating results on small problems.
"""

from .model_space import (
    BlockDistribution,
    Model,
    Partition,
    SampleTrace,
    SubModel,
    empirical_block_distribution,
    log_cardinality,
    restrict,
)
from .summaries import (
    EmptyRetainedSetError,
    InfeasibleLevelError,
    SummaryBundle,
    hpp_credible_set,
    inclusion_correlation,
    map_model_estimate,
    median_model,
    pips,
    screen,
    summarize,
)
from .factorize import (
    MergeRecord,
    PartitionSequence,
    agglomerate,
    block_entropy,
    kl_score,
    kl_score_direct,
    merge_gain,
)
from .credible import (
    BlockCredibleSet,
    CartesianCredibleSet,
    CriterionRow,
    CriterionTrace,
    block_pip,
    find_block_sets,
    modal_submodel,
    partition_penalty,
    select_partition,
)
from .sampler import (
    LinearBvsConfig,
    MarginalEngine,
    SamplerState,
    SingularModelError,
    ads_step,
    gibbs_pi,
    log_marginal_likelihood,
    run_chain,
    run_chains,
    update_g,
)
from .datagen import (
    SyntheticDataset,
    gen_block_ar,
    gen_george_mcculloch,
)
from .oracle import (
    EnumerationBoundError,
    ExplicitDistribution,
    ValidationReport,
    exact_posterior_enumeration,
    exhaustive_partition_scan,
    exhaustive_set_mass,
    marginal_block_distribution,
    product_distribution,
    validate_credible_set,
)
from .io_report import (
    Report,
    RunConfig,
    SchemaError,
    SvgStyle,
    TraceFormatError,
    analyze_trace,
    read_design,
    read_distribution,
    read_report,
    read_trace,
    render_svg,
    report_credible_set,
    write_design,
    write_distribution,
    write_report,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
