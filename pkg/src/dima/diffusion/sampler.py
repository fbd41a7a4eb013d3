"""Conditioning orders and the Euler sampler that injects one agent per step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dima.diffusion.net import DenoiserNet
from dima.diffusion.schedule import NoiseSchedule, sampling_sigma_grid
from dima.errors import ContractViolationError, SamplerDivergenceError

ORDER_MODES = ("random", "ascending", "descending")


@dataclass
class ConditioningOrder:
    """Sequence of zero-based agent ids, one per denoising step."""

    ids: np.ndarray
    n_agents: int

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=int)
        if self.ids.ndim != 1:
            raise ContractViolationError("order must be a flat id sequence")
        if np.any(self.ids < 0) or np.any(self.ids >= self.n_agents):
            raise ContractViolationError("order contains an unknown agent id")
        counts = np.bincount(self.ids, minlength=self.n_agents)
        lo, hi = len(self.ids) // self.n_agents, -(-len(self.ids) // self.n_agents)
        if np.any(counts < lo) or np.any(counts > hi):
            raise ContractViolationError(
                f"unbalanced order: counts {counts.tolist()} for {len(self.ids)} steps")

    def __len__(self):
        return len(self.ids)


def make_order(mode: str, n: int, steps: int,
               rng: np.random.Generator | None = None) -> ConditioningOrder:
    """Balanced multiset of agent ids across the denoising steps.

    ascending keeps repeats contiguous in increasing id (n=2, steps=4 ->
    (0,0,1,1)); descending is its reverse; random shuffles the multiset.
    """
    if steps < n:
        raise ContractViolationError(
            f"{steps} steps cannot condition on all {n} agents")
    base, extra = divmod(steps, n)
    counts = [base + (1 if i < extra else 0) for i in range(n)]
    ascending = np.repeat(np.arange(n), counts)
    if mode == "ascending":
        ids = ascending
    elif mode == "descending":
        ids = ascending[::-1].copy()
    elif mode == "random":
        if rng is None:
            raise ContractViolationError("random order needs an rng")
        ids = rng.permutation(ascending)
    else:
        raise ContractViolationError(f"unknown order mode: {mode}")
    return ConditioningOrder(ids=ids, n_agents=n)


def sample_next_state(model: DenoiserNet, ctx_states: np.ndarray,
                      ctx_actions: np.ndarray, joint_action: np.ndarray,
                      orders: np.ndarray, rng: np.random.Generator,
                      schedule: NoiseSchedule | None = None) -> np.ndarray:
    """Euler probability-flow sampling of the normalized next state.

    ctx_states: (B, L, d) normalized; ctx_actions: (B, L-1, n, ad);
    joint_action: (B, n, ad); orders: (B, steps) zero-based agent ids (each
    row is one rollout's conditioning order). The only stochasticity is the
    initial Gaussian draw, so a fixed seed and order reproduce the output
    bit-exactly. Returns (B, d) in normalized units.
    """
    schedule = schedule or model.schedule
    ctx_states = np.asarray(ctx_states, dtype=np.float64)
    orders = np.atleast_2d(np.asarray(orders, dtype=int))
    batch = ctx_states.shape[0]
    if orders.shape[0] == 1 and batch > 1:
        orders = np.repeat(orders, batch, axis=0)
    steps = orders.shape[1]
    grid = sampling_sigma_grid(steps, schedule)
    joint_action = np.asarray(joint_action, dtype=np.float64)
    rows = np.arange(batch)

    x = schedule.sigma_max * rng.standard_normal((batch, model.config.state_dim))
    for j in range(steps):
        sigma, sigma_next = grid[j], grid[j + 1]
        ids = orders[:, j]
        if model.config.conditioning == "sequential":
            action = joint_action[rows, ids]
        else:
            action = joint_action
        denoised = model.denoise(x, sigma, ctx_states, ctx_actions, action, ids).data
        d = (x - denoised) / sigma
        x = x + (sigma_next - sigma) * d
        if not np.all(np.isfinite(x)):
            raise SamplerDivergenceError(j, float(sigma))
    return x
