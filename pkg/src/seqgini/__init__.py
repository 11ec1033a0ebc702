"""Gini estimation with bounded-width sequential cluster sampling."""
from .design import (FrameSource, IncomeLaw, PopulationFrame, PopulationSpec, WeightedSample,
                     compute_weights, generate_pseudo_population, pps_sample_clusters,
                     srs_households)
from .errors import (DegenerateSampleError, FrameError, InsufficientReplicatesError,
                     ParameterError, SeqGiniError, SourceError, SurveyFormatError)
from .estimators import (confidence_interval, empirical_cdf, estimate, fixed_n_experiment,
                         gini_hat, gini_pairwise_oracle, linearized_scores, optimal_C,
                         sample_quantile, variance_hat, weighted_mean)
from .sequential import (StoppingConfig, pilot_sizes, run_purely_sequential, run_two_stage,
                         stopping_check, two_stage_final_size)

__version__ = "0.1.0"
