"""Estimation of Gaussian mode amplitudes through noisy beam-splitter networks.

Heterodyne and counting measurements on n bosonic modes carry information
about a location pair (theta, eta) and a common scale nu.  Concentrating
networks trade measurement noise for sensitivity to splitter-angle jitter;
this package provides the estimator families, their exact finite-sample
moments, and the simulation harnesses to compare them.
"""

from .analytic import (
    EstimatorMoments,
    MomentTables,
    binary_tree_moments,
    corrected_closed_forms,
    corrected_engine_moments,
    gaussian_raw_moments,
    hayashi_closed_forms,
    hayashi_engine_moments,
    hayashi_nu_variance,
    mse_n2,
    trig_moment,
)
from .estimators import (
    Estimates,
    corrected_batch,
    corrected_estimate,
    corrected_selection,
    cross_weight,
    cross_weight_parts,
    hayashi_batch,
    hayashi_covariance,
    hayashi_estimate,
    naive_batch,
    naive_covariance,
    naive_estimate,
)
from .experiments import (
    CrossoverRow,
    MCSummary,
    RelErrRow,
    RelErrTable,
    Scenario,
    crossover_curve,
    crossover_theta,
    rao_blackwell_mc,
    run_monte_carlo,
    table1_grid,
)
from .model import (
    AmplitudeEnsemble,
    ModelParams,
    Observations,
    RandomSource,
    SelectionSet,
    conditional_log_density,
    marginal_log_density,
    measure,
    mix_seed,
    sample_amplitudes,
)
from .network import (
    BeamSplitterOp,
    Network,
    NoiseSpec,
    apply_network,
    apply_op,
    binary_tree_network,
    cascade_network,
    network_from_text,
    network_matrix,
    network_to_text,
    perturb,
    tree_stages,
)

__version__ = "0.1.0"
