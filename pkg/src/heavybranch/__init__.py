"""Heavy-tailed branching-process simulation and stable-limit verification."""

from .branching import GWIModel, PathSample, make_model, simulate_path
from .heavy_tail import ImmigrationLaw, OffspringLaw, hill_estimator, norming_sequence
from .partial_sum import BlockSequence, Centering, FidisGrid, ScaledFidis, block_sequence
from .stable_law import (GeneralStableCF, StableParams, b_plus_sequence, c_alpha,
                         drift_b_alpha, limit_params, limit_scale_K, spectral_tail,
                         stable_cdf, stable_cf, stable_sample)
from .verify import VerificationReport, ecf_distance, ks_distance

__version__ = "0.1.0"

__all__ = [
    "GWIModel", "PathSample", "make_model", "simulate_path",
    "ImmigrationLaw", "OffspringLaw", "hill_estimator", "norming_sequence",
    "BlockSequence", "Centering", "FidisGrid", "ScaledFidis", "block_sequence",
    "GeneralStableCF", "StableParams", "b_plus_sequence", "c_alpha",
    "drift_b_alpha", "limit_params", "limit_scale_K", "spectral_tail",
    "stable_cdf", "stable_cf", "stable_sample",
    "VerificationReport", "ecf_distance", "ks_distance",
]
