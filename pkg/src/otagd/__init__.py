"""Analog over-the-air gradient descent under fading and alpha-stable interference."""

from otagd.alpha_core import alpha_norm_pow, check_alpha, is_alpha_pd, lemma1_gap, signed_power
from otagd.analysis import (
    BoundConstants,
    RateFit,
    corollary_rate,
    fit_rate,
    generalization_bound,
    theorem1_bound,
    theorem2_bound,
)
from otagd.channel import ChannelModel, WaveformBasis, demodulate, make_basis, modulate, ota_aggregate
from otagd.objectives import FederatedProblem, make_logistic, make_quadratic, oracle_minimize
from otagd.stable import RngStream, StableParams, sample_stable, sample_stable_vec
from otagd.trainer import Schedule, TrainConfig, TrajectoryStats, run_monte_carlo, run_trial

__version__ = "0.1.0"

__all__ = [
    "BoundConstants", "ChannelModel", "FederatedProblem", "RateFit", "RngStream", "Schedule",
    "StableParams", "TrainConfig", "TrajectoryStats", "WaveformBasis", "alpha_norm_pow",
    "check_alpha", "corollary_rate", "demodulate", "fit_rate", "generalization_bound",
    "is_alpha_pd", "lemma1_gap", "make_basis", "make_logistic", "make_quadratic", "modulate",
    "ota_aggregate", "oracle_minimize", "run_monte_carlo", "run_trial", "sample_stable",
    "sample_stable_vec", "signed_power", "theorem1_bound", "theorem2_bound",
]
