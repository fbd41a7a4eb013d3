"""EDM-style denoising world model with per-step single-agent conditioning."""

from dima.diffusion.loss import corrupt, training_loss
from dima.diffusion.net import DenoiserConfig, DenoiserNet
from dima.diffusion.sampler import ConditioningOrder, make_order, sample_next_state
from dima.diffusion.schedule import (
    NoiseSchedule,
    preconditioners,
    sample_training_sigma,
    sampling_sigma_grid,
    steps_for_agents,
)
from dima.diffusion.stats import RunningStats

__all__ = [
    "NoiseSchedule", "preconditioners", "sample_training_sigma",
    "sampling_sigma_grid", "steps_for_agents", "RunningStats",
    "DenoiserConfig", "DenoiserNet", "ConditioningOrder", "make_order",
    "sample_next_state", "corrupt", "training_loss",
]
