"""Bipartite graphon co-clustering: sampling, exact population quantities and rate experiments."""
from .graphon import (BipartiteSample, StepGraphon, conditional_mean_matrix, eval_graphon,
                      make_rng, make_step_graphon, sample_bipartite)
from .stats import CoClusterLabels, GeneralLatent, block_summary, empirical_risk, model_kernel
from .population import (AllocationMap, PopulationLatentMap, blocked_graphon, blocked_graphon_mixed,
                         centering_constants, greedy_sigma_star, match_population_cocluster,
                         population_risk, realize_partition)
from .geometry import (EpsilonCover, ProfileVector, epsilon_cover, hausdorff_estimate,
                       profile_vector, psi_cdf_distance, quantize_latents, support_function)
from .estimators import fit_blockmodel_als, fit_dot_product_model, spectral_cocluster
from .bench import (ExperimentConfig, RateResult, emit_report, fit_rate_exponent,
                    run_theorem1_experiment, run_theorem2_experiment)

__all__ = [name for name in dir() if not name.startswith("_")]
