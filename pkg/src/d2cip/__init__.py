"""Iterative multi-mode particle filter for single-target tracking.

Particles are refined to peaks of local correlation-response maps, the
refined peaks are merged into posterior modes with change-of-support
corrected likelihoods, modes are clustered to pick a state estimate, and
resampling only fires when the effective sample size collapses.  The
:mod:`d2cip.tracker` module ties the pieces into per-sequence runs and
:mod:`d2cip.ablation` compares the variant ladder on synthetic data.
"""

from d2cip.ablation import AblationTable, default_suite, run_ablation
from d2cip.estimation import (EstimatorConfig, Posterior, build_posterior,
                              cluster_modes, effective_sample_size,
                              estimate_state, handoff_modes, maybe_resample)
from d2cip.metrics import MetricBundle, compute_metrics
from d2cip.motion import PriorMode, TransitionMixture, build_mixture
from d2cip.observation import Frame, Sequence
from d2cip.refinement import (AllParticlesDiscarded, ConvergedPeak,
                              RefinementConfig, merge_peaks, refine_all,
                              refine_particle)
from d2cip.scenario import SyntheticScenario, generate_scenario, make_sequence
from d2cip.state import (Particle, PosteriorMode, RandomSource, ResponseMap,
                         TargetState)
from d2cip.tracker import VARIANTS, RunConfig, TrackResult, run_sequence

__version__ = "0.1.0"

__all__ = [
    "AblationTable",
    "AllParticlesDiscarded",
    "ConvergedPeak",
    "EstimatorConfig",
    "Frame",
    "MetricBundle",
    "Particle",
    "Posterior",
    "PosteriorMode",
    "PriorMode",
    "RandomSource",
    "RefinementConfig",
    "ResponseMap",
    "RunConfig",
    "Sequence",
    "SyntheticScenario",
    "TargetState",
    "TrackResult",
    "TransitionMixture",
    "VARIANTS",
    "build_mixture",
    "build_posterior",
    "cluster_modes",
    "compute_metrics",
    "default_suite",
    "effective_sample_size",
    "estimate_state",
    "generate_scenario",
    "handoff_modes",
    "make_sequence",
    "maybe_resample",
    "merge_peaks",
    "refine_all",
    "refine_particle",
    "run_ablation",
    "run_sequence",
]
