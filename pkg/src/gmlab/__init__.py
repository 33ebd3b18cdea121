"""Monte Carlo laboratory for additive functionals of stationary AR(1) arrays.

The package simulates near-unit-root stationary Gaussian AR(1) triangular
arrays, evaluates Hermite-polynomial observables along them, and checks the
resulting standardized partial-sum processes against their three limit
families (Brownian motion, tempered Hermite processes, degenerate linear
processes) with exact variance formulas, closed-form total variation
distances, and empirical distribution distances.
"""

from gmlab.hermite import (
    Basis,
    PolySpec,
    SmallVarianceExpansion,
    hermite_eval,
    hermite_scaled,
    mehler_cov,
    multiplication_expand,
    poly_eval,
    small_variance_expansion,
)
from gmlab.gauss_markov import (
    PathBatch,
    ProcessParams,
    Regime,
    ar_coefficient,
    gaussian_tv,
    innovation_variance,
    mixing_bounds,
    mixing_time,
    simulate_paths,
    stationary_variance,
    tv_from_start,
)
from gmlab.functionals import (
    FunctionalSeries,
    WeightFamily,
    WeightSet,
    additive_functional,
    chaos_coefficients,
    chaos_weights,
    contraction_diagnostic,
    corr_power_sum,
    corr_power_sum_asymptotic,
    functional_variance,
    functional_variance_leading,
    initial_state_decomposition,
    sample_functional,
    sqrt_decay_sum_bound,
)
from gmlab.limits import (
    LimitSample,
    TemperedHermiteLaw,
    simulate_brownian,
    simulate_degenerate,
    simulate_ou,
    simulate_tempered_hermite,
    simulate_tempered_mixture,
    tempered_hermite_cov,
    tempered_norm_constant,
)
from gmlab.distances import (
    DistanceReport,
    ks_two_sample,
    ks_vs_cdf,
    ks_vs_std_normal,
    loglog_slope,
    tv_histogram,
)

__version__ = "0.1.0"
