"""Linear-Gaussian team environment with closed-form transition oracles.

Dynamics: s' = A s + sum_i B_i a^i + w with w ~ N(0, sigma_w^2 I), shared
reward -||s - g||^2 - c * sum_i ||a^i||^2. Because the transition is
Gaussian, both the next-state distribution and the optimal denoiser
(the posterior mean under isotropic corruption) are available exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dima.envs.base import Env, EnvSpec
from dima.errors import DomainError, UnsupportedOracleError


@dataclass
class LinearTeamParams:
    A: np.ndarray            # state_dim x state_dim
    B: list                  # per-agent state_dim x action_dim
    C: list                  # per-agent obs_dim x state_dim
    goal: np.ndarray
    sigma_w: float = 0.05
    action_cost: float = 0.01
    max_steps: int = 100

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=np.float64)
        self.B = [np.asarray(b, dtype=np.float64) for b in self.B]
        self.C = [np.asarray(c, dtype=np.float64) for c in self.C]
        self.goal = np.asarray(self.goal, dtype=np.float64)
        radius = float(np.max(np.abs(np.linalg.eigvals(self.A))))
        if radius > 1.05:
            raise ValueError(f"spectral radius {radius:.3f} exceeds 1.05")
        if self.sigma_w < 0:
            raise ValueError("sigma_w must be nonnegative")


def default_linear_team_params(n_agents: int = 2, state_dim: int = 4,
                               sigma_w: float = 0.05) -> LinearTeamParams:
    """Desk-scale instance: two rotation planes, one driven by each agent,
    observations overlapping strict subsets of the state."""
    if n_agents != 2 or state_dim != 4:
        raise ValueError("default instance is fixed at n=2, state_dim=4")
    c, s = np.cos(0.15), np.sin(0.15)
    A = 0.9 * np.array([
        [c, -s, 0.0, 0.0],
        [s, c, 0.0, 0.0],
        [0.0, 0.0, c, s],
        [0.0, 0.0, -s, c],
    ])
    B = [
        np.array([[0.5], [0.25], [0.0], [0.0]]),
        np.array([[0.0], [0.0], [0.5], [0.25]]),
    ]
    eye = np.eye(4)
    C = [eye[[0, 1, 2]], eye[[1, 2, 3]]]
    return LinearTeamParams(A=A, B=B, C=C, goal=np.zeros(4), sigma_w=sigma_w)


class LinearTeam(Env):
    def __init__(self, params: LinearTeamParams | None = None, seed: int = 0):
        self.params = params or default_linear_team_params()
        p = self.params
        spec = EnvSpec(
            n_agents=len(p.B),
            state_dim=p.A.shape[0],
            obs_dims=tuple(c.shape[0] for c in p.C),
            action_dim=p.B[0].shape[1],
            max_steps=p.max_steps,
        )
        super().__init__(spec, seed)

    def _initial_state(self, rng):
        return rng.uniform(-1.0, 1.0, size=self.spec.state_dim)

    def observe(self, state):
        return [c @ state for c in self.params.C]

    def _dynamics(self, state, actions, rng):
        p = self.params
        mean = p.A @ state
        for b, a in zip(p.B, actions):
            mean = mean + b @ a
        noise = p.sigma_w * rng.standard_normal(self.spec.state_dim) if p.sigma_w > 0 else 0.0
        next_state = mean + noise
        err = state - p.goal
        reward = -float(err @ err) - p.action_cost * float(np.sum(actions * actions))
        return next_state, reward, False

    # -- analytic oracles ---------------------------------------------------

    def oracle_next_state_distribution(self, state, joint_action):
        """Exact P(s'|s, a): (mean, covariance)."""
        p = self.params
        acts = self.clip_actions(joint_action)
        mean = p.A @ np.asarray(state, dtype=np.float64)
        for b, a in zip(p.B, acts):
            mean = mean + b @ a
        cov = p.sigma_w ** 2 * np.eye(self.spec.state_dim)
        return mean, cov

    def tweedie_denoiser_oracle(self, noisy_next, sigma, state, joint_action):
        """Posterior mean E[s_{t+1} | corrupted s^tau, s_t, a] under isotropic
        corruption of scale sigma: mu + (sw^2/(sw^2+sigma^2)) (s^tau - mu)."""
        if sigma <= 0:
            raise DomainError("sigma must be positive")
        mean, _ = self.oracle_next_state_distribution(state, joint_action)
        sw2 = self.params.sigma_w ** 2
        shrink = sw2 / (sw2 + sigma ** 2)
        return mean + shrink * (np.asarray(noisy_next, dtype=np.float64) - mean)


def require_linear_team(env) -> LinearTeam:
    if not isinstance(env, LinearTeam):
        raise UnsupportedOracleError(
            f"analytic transition oracle requires LinearTeam, got {type(env).__name__}")
    return env
