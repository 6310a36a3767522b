"""Two-level credit assignment for multi-turn policy-gradient training.

Episode level: group z-scored returns rescaled by a success-rate-aware
sigmoid weight. Step level: baselines built from similarity-weighted peer
returns over TF-IDF embeddings of observations. Both feed a clipped surrogate
objective with a KL penalty.
"""

from .core_types import AdvantageTensor, EpisodeGroup, Estimator, Step, Trajectory, success_rate, total_return
from .episode_credit import PscConfig, modulated_advantages, psc_factor, zscore_advantages, zscore_closed_form
from .objective import ObjectiveConfig, categorical_kl, clipped_surrogate, combine_advantages, objective_and_gradient
from .policy import Policy, PolicySnapshot
from .step_credit import (
    PsaConfig,
    SelfMode,
    discounted_returns,
    group_size_histogram,
    hard_group_advantages,
    psa_step_advantages,
    soft_weights,
)
from .text_sim import build_vocabulary, cosine, vectorize
from .trainer import RunReport, TrainConfig, compute_advantages, train

__version__ = "0.1.0"

__all__ = [
    "AdvantageTensor",
    "EpisodeGroup",
    "Estimator",
    "Step",
    "Trajectory",
    "success_rate",
    "total_return",
    "PscConfig",
    "modulated_advantages",
    "psc_factor",
    "zscore_advantages",
    "zscore_closed_form",
    "ObjectiveConfig",
    "categorical_kl",
    "clipped_surrogate",
    "combine_advantages",
    "objective_and_gradient",
    "Policy",
    "PolicySnapshot",
    "PsaConfig",
    "SelfMode",
    "discounted_returns",
    "group_size_histogram",
    "hard_group_advantages",
    "psa_step_advantages",
    "soft_weights",
    "build_vocabulary",
    "cosine",
    "vectorize",
    "RunReport",
    "TrainConfig",
    "compute_advantages",
    "train",
]
