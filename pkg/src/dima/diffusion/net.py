"""EDM-preconditioned residual-MLP denoiser for next-state prediction.

Temporal context enters by stacking past states into the trunk input;
the current action, past joint actions, and the noise level condition
every residual block through adaptive normalization. In sequential mode
exactly one agent's current action (plus its identity) is injected per
forward call; the joint variant used by the ablation injects the full
current joint action instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dima.diffusion.schedule import NoiseSchedule, preconditioners
from dima.errors import ContractViolationError
from dima.tensorkit import nn
from dima.tensorkit import tensor as T
from dima.tensorkit.tensor import Tensor


@dataclass
class DenoiserConfig:
    state_dim: int
    n_agents: int
    action_dim: int
    context_len: int = 3        # states fed as temporal context (includes s_t)
    width: int = 256
    blocks: int = 3
    cond_dim: int = 256
    conditioning: str = "sequential"   # or "joint"

    def __post_init__(self):
        if self.context_len < 1:
            raise ValueError("context_len must be >= 1")
        if self.conditioning not in ("sequential", "joint"):
            raise ValueError(f"unknown conditioning mode: {self.conditioning}")


class ResidualBlock(nn.Module):
    def __init__(self, width: int, cond_dim: int, rng: np.random.Generator):
        self.norm = nn.AdaptiveNorm(width, cond_dim, rng)
        self.fc1 = nn.Linear(width, width, rng)
        self.fc2 = nn.Linear(width, width, rng, zero_init=True)

    def __call__(self, x: Tensor, cond: Tensor) -> Tensor:
        h = self.norm(x, cond)
        h = self.fc2(T.gelu(self.fc1(h)))
        return T.add(x, h)


class DenoiserNet(nn.Module):
    """F_theta plus the sigma-dependent preconditioning wrapper."""

    def __init__(self, config: DenoiserConfig, schedule: NoiseSchedule,
                 rng: np.random.Generator):
        cfg = config
        self.config = cfg
        self.schedule = schedule
        d, n, ad = cfg.state_dim, cfg.n_agents, cfg.action_dim
        trunk_in = d + cfg.context_len * d
        self.input_proj = nn.Linear(trunk_in, cfg.width, rng)
        self.blocks = [ResidualBlock(cfg.width, cfg.cond_dim, rng)
                       for _ in range(cfg.blocks)]
        self.out_norm = nn.AdaptiveNorm(cfg.width, cfg.cond_dim, rng)
        self.head = nn.Linear(cfg.width, d, rng, zero_init=True)

        # conditioning encoders
        if cfg.conditioning == "sequential":
            act_in = ad + n        # action value plus one-hot agent identity
        else:
            act_in = n * ad        # full current joint action
        self.action_embed = nn.MLP([act_in, cfg.cond_dim, cfg.cond_dim], rng)
        past_in = max((cfg.context_len - 1) * n * ad, 1)
        self.past_action_embed = nn.MLP([past_in, cfg.cond_dim, cfg.cond_dim], rng)
        self.noise_embed = nn.MLP([1, cfg.cond_dim, cfg.cond_dim], rng)

    def _conditioning(self, c_noise: np.ndarray, ctx_actions: np.ndarray,
                      action: np.ndarray, agent_ids) -> Tensor:
        cfg = self.config
        batch = action.shape[0]
        if cfg.conditioning == "sequential":
            onehot = np.zeros((batch, cfg.n_agents))
            onehot[np.arange(batch), np.asarray(agent_ids, dtype=int)] = 1.0
            act_in = np.concatenate([action, onehot], axis=-1)
        else:
            act_in = action.reshape(batch, -1)
        cond = self.action_embed(Tensor(act_in))
        if cfg.context_len > 1:
            past = ctx_actions.reshape(batch, -1)
        else:
            past = np.zeros((batch, 1))
        cond = T.add(cond, self.past_action_embed(Tensor(past)))
        cond = T.add(cond, self.noise_embed(Tensor(c_noise.reshape(batch, 1))))
        return T.gelu(cond)

    def denoise(self, noisy: np.ndarray, sigma, ctx_states: np.ndarray,
                ctx_actions: np.ndarray, action: np.ndarray, agent_ids) -> Tensor:
        """Predicted clean next state (normalized units).

        noisy: (B, d); sigma: scalar or (B,); ctx_states: (B, L, d) normalized;
        ctx_actions: (B, L-1, n, action_dim); action: (B, action_dim) for
        sequential conditioning or (B, n, action_dim) for joint; agent_ids:
        (B,) zero-based, ignored in joint mode.
        """
        cfg = self.config
        noisy = np.asarray(noisy, dtype=np.float64)
        batch, d = noisy.shape
        if d != cfg.state_dim:
            raise ContractViolationError(f"state width {d} != {cfg.state_dim}")
        if ctx_states.shape[1] != cfg.context_len or ctx_states.shape[2] != cfg.state_dim:
            raise ContractViolationError(
                f"context shape {ctx_states.shape} incompatible with "
                f"(B, {cfg.context_len}, {cfg.state_dim})")
        sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (batch,))
        c_skip, c_out, c_in, c_noise = preconditioners(sigma, self.schedule.sigma_data)

        action = np.asarray(action, dtype=np.float64)
        cond = self._conditioning(c_noise, np.asarray(ctx_actions, dtype=np.float64),
                                  action, agent_ids)

        x_in = np.concatenate([c_in[:, None] * noisy,
                               ctx_states.reshape(batch, -1)], axis=-1)
        h = self.input_proj(Tensor(x_in))
        for block in self.blocks:
            h = block(h, cond)
        f_out = self.head(self.out_norm(h, cond))
        skip = Tensor(c_skip[:, None] * noisy)
        return T.add(skip, T.mul(f_out, Tensor(c_out[:, None])))
