"""Finite-length bounds for source coding with side-information and channel
coding with Markov noise, built on conditional Renyi entropies of
transition matrices."""

__version__ = "0.1.0"

from .bounds import (
    BoundResult,
    ChannelQuery,
    SourceQuery,
    asymptotics,
    chan_bounds,
    normal_quantile,
    src_achievability,
    src_converse,
    src_markov_bounds,
)
from .conversion import (
    FiniteAbelianGroup,
    RegularChannel,
    convert_markov_noise,
    decompose,
    presets,
    to_conditional_additive,
)
from .inversion import (
    MeasureFamily,
    a_of_R,
    critical_rate,
    exponent_linear,
    exponent_scaled,
    quadratic_expansion_check,
    singleshot_family,
    theta_of_a,
    theta_of_R,
    transition_family,
)
from .markov import PairTransitionMatrix, cgf, perron_frobenius, stationary_distribution
from .oracle import (
    SimConfig,
    brute_joint,
    brute_optimal_source_error,
    brute_renyi_n,
    empirical_varentropy,
    mc_hash_coding,
)
from .singleshot import (
    JointDistribution,
    Lower,
    RelativeQ,
    TwoParam,
    Upper,
    conditional_entropy,
    optimal_conditioner,
    singleshot_renyi,
    varentropy,
)
from .transition import (
    Assumption,
    MarkovSource,
    finite_corrections,
    optimal_V,
    transition_renyi,
    transition_varentropy,
)
