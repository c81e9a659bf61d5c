"""Observation-history sampling for embodied navigation agents."""

from .core import (
    Episode,
    Observation,
    Position,
    SampledHistory,
    SamplerConfig,
    Trajectory,
    TrajectoryFormatError,
    load_sampled,
    load_trajectory,
    save_sampled,
    save_trajectory,
)
from .sampler import cosine_similarity, max_pool, oracle_sample, redundancy_stats, sample_history

__all__ = [
    "Episode",
    "Observation",
    "Position",
    "SampledHistory",
    "SamplerConfig",
    "Trajectory",
    "TrajectoryFormatError",
    "cosine_similarity",
    "load_sampled",
    "load_trajectory",
    "max_pool",
    "oracle_sample",
    "redundancy_stats",
    "sample_history",
    "save_sampled",
    "save_trajectory",
]
