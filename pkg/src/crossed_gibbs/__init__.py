"""Gibbs and collapsed Gibbs sampling for two-factor crossed random effects.

Also builds the collapsed sampler's autoregression matrix, its spectral norm,
spectral radius and relaxation time, and runs finite-size checks of the
concentration and random-matrix bounds behind its scalability.
"""

__version__ = "0.1.0"

from .model import (
    DegenerateFactorError,
    LatentState,
    ObservationSet,
    VarianceComponents,
    level_means,
    level_weights,
    shrinkage_factors,
)
from .missingness import (
    ProbabilityPattern,
    RegimeSpec,
    make_pattern,
    regime_condition,
    sample_Z,
    simulate,
    synthesize_responses,
)
from .samplers import (
    ChainTrace,
    SamplerConfig,
    collapsed_sweep,
    precision_update,
    run_chain,
    vanilla_sweep,
)
from .autoregression import (
    AutoregressionBundle,
    analyze,
    build_B1_B2,
    build_M,
    build_M_prime,
    phi_upsilon,
    relaxation_time,
    spectral_norm,
    spectral_radius,
)
from .diagnostics import EssResult, autocorrelation, effective_sample_size, summarize_trace
from .theory_lab import (
    VerificationReport,
    hoeffding_bound,
    latala_ratio,
    norm_vs_S_experiment,
    verify_row_col_concentration,
    verify_Z_norm_bound,
)
from .io import RatingsDataset, load_ratings_csv
