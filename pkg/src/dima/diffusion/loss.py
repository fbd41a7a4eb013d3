"""Denoising score-matching objective with uniform single-agent conditioning."""

from __future__ import annotations

import numpy as np

from dima.diffusion.net import DenoiserNet
from dima.diffusion.schedule import NoiseSchedule, sample_training_sigma
from dima.tensorkit import tensor as T
from dima.tensorkit.tensor import Tensor


def corrupt(clean: np.ndarray, sigma: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Forward-process corruption. Reads nothing but (clean, sigma, noise),
    so the noising process is independent of every conditioning signal."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim == 1:
        sigma = sigma[:, None]
    return clean + sigma * noise


def training_loss(model: DenoiserNet, ctx_states: np.ndarray, ctx_actions: np.ndarray,
                  joint_action: np.ndarray, target: np.ndarray,
                  rng: np.random.Generator, schedule: NoiseSchedule | None = None,
                  return_details: bool = False):
    """Mean squared denoising error over the batch.

    Per sample: draw sigma from the training schedule, corrupt the
    normalized target, draw a conditioning agent uniformly, and predict
    the clean state. The preconditioned parameterization provides the
    per-sample weighting; no extra sigma weight is applied. In joint mode
    the full current joint action conditions instead and no agent is drawn.
    """
    schedule = schedule or model.schedule
    target = np.asarray(target, dtype=np.float64)
    batch = target.shape[0]
    sigma = sample_training_sigma(rng, schedule, size=batch)
    noise = rng.standard_normal(target.shape)
    noisy = corrupt(target, sigma, noise)

    joint_action = np.asarray(joint_action, dtype=np.float64)
    if model.config.conditioning == "sequential":
        agent_ids = rng.integers(0, model.config.n_agents, size=batch)
        action = joint_action[np.arange(batch), agent_ids]
    else:
        agent_ids = np.zeros(batch, dtype=int)
        action = joint_action

    pred = model.denoise(noisy, sigma, ctx_states, ctx_actions, action, agent_ids)
    err = T.sub(pred, Tensor(target))
    loss = T.mean(T.sum(T.mul(err, err), axis=-1))
    if return_details:
        return loss, {"sigma": sigma, "agent_ids": agent_ids}
    return loss
