"""Noise schedule, preconditioners, and the denoising-step rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dima.errors import DomainError


@dataclass
class NoiseSchedule:
    """Log-normal training noise distribution and the sampling grid range."""

    p_mean: float = -0.4
    p_std: float = 1.2
    sigma_data: float = 0.5
    sigma_min: float = 0.002
    sigma_max: float = 80.0

    def __post_init__(self):
        if not (0.0 < self.sigma_min < self.sigma_max):
            raise ValueError("need 0 < sigma_min < sigma_max")
        if self.sigma_data <= 0.0:
            raise ValueError("sigma_data must be positive")


def preconditioners(sigma, sigma_data: float = 0.5):
    """Scalings (c_skip, c_out, c_in, c_noise) at noise level sigma.

    c_in = 1/sqrt(sigma^2 + sd^2); c_out = sigma*sd/sqrt(sigma^2 + sd^2);
    c_noise = ln(sigma)/4; c_skip = sd^2/(sd^2 + sigma^2).
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0.0):
        raise DomainError("preconditioners require sigma > 0")
    denom = np.sqrt(sigma ** 2 + sigma_data ** 2)
    c_in = 1.0 / denom
    c_out = sigma * sigma_data / denom
    c_noise = 0.25 * np.log(sigma)
    c_skip = sigma_data ** 2 / (sigma_data ** 2 + sigma ** 2)
    return c_skip, c_out, c_in, c_noise


def sample_training_sigma(rng: np.random.Generator, schedule: NoiseSchedule, size=None):
    """sigma = exp(p_mean + p_std * z), z ~ N(0, 1)."""
    z = rng.standard_normal(size)
    return np.exp(schedule.p_mean + schedule.p_std * z)


def sampling_sigma_grid(steps: int, schedule: NoiseSchedule) -> np.ndarray:
    """Log-linearly spaced sigma_max..sigma_min followed by a final 0."""
    if steps < 1:
        raise DomainError("need at least one denoising step")
    if steps == 1:
        grid = np.array([schedule.sigma_max])
    else:
        grid = np.exp(np.linspace(np.log(schedule.sigma_max),
                                  np.log(schedule.sigma_min), steps))
    return np.concatenate([grid, [0.0]])


def steps_for_agents(n: int) -> int:
    """Denoising-step count: 2n for n <= 2, otherwise n."""
    if n < 1:
        raise DomainError("need at least one agent")
    return 2 * n if n <= 2 else n
