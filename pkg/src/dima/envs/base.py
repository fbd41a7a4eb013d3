"""Cooperative Dec-POMDP environment interface."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dima.errors import EnvironmentFaultError


@dataclass
class EnvSpec:
    """Static description of a Dec-POMDP instance."""

    n_agents: int
    state_dim: int
    obs_dims: tuple          # per-agent observation widths
    action_dim: int          # per-agent action width
    max_steps: int
    action_low: float = -1.0
    action_high: float = 1.0

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("need at least two agents")
        if self.state_dim <= 0 or self.action_dim <= 0 or self.max_steps <= 0:
            raise ValueError("dimensions and horizon must be positive")
        self.obs_dims = tuple(int(d) for d in self.obs_dims)
        if len(self.obs_dims) != self.n_agents or any(d <= 0 for d in self.obs_dims):
            raise ValueError("obs_dims must list a positive width per agent")


@dataclass
class StepResult:
    next_state: np.ndarray
    next_obs: list            # per-agent observation vectors
    reward: float
    terminated: bool          # task-level termination, not time-limit truncation


class Env:
    """Base class; concrete environments implement _dynamics and observe."""

    spec: EnvSpec

    def __init__(self, spec: EnvSpec, seed: int = 0):
        self.spec = spec
        self._rng = np.random.default_rng(seed)
        self._state = None
        self._t = 0

    @property
    def state(self) -> np.ndarray:
        return self._state

    @property
    def steps_taken(self) -> int:
        return self._t

    def reset(self, seed: int | None = None):
        """Sample an initial state; deterministic for a given seed."""
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._state = self._initial_state(self._rng)
        self._t = 0
        return self._state.copy(), self.observe(self._state)

    def observe(self, state: np.ndarray) -> list:
        """Per-agent observations, a deterministic function of the state."""
        raise NotImplementedError

    def _initial_state(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def _dynamics(self, state, actions, rng):
        """Returns (next_state, reward, terminated)."""
        raise NotImplementedError

    def clip_actions(self, joint_action) -> np.ndarray:
        acts = np.asarray(joint_action, dtype=np.float64)
        if acts.shape != (self.spec.n_agents, self.spec.action_dim):
            raise EnvironmentFaultError(
                f"joint action shape {acts.shape} != "
                f"({self.spec.n_agents}, {self.spec.action_dim})")
        return np.clip(acts, self.spec.action_low, self.spec.action_high)

    def step(self, joint_action) -> StepResult:
        if self._state is None:
            raise EnvironmentFaultError("step() before reset()")
        acts = np.asarray(joint_action, dtype=np.float64)
        if not np.all(np.isfinite(acts)) or not np.all(np.isfinite(self._state)):
            raise EnvironmentFaultError("non-finite state or action")
        acts = self.clip_actions(acts)
        next_state, reward, terminated = self._dynamics(self._state, acts, self._rng)
        if not np.all(np.isfinite(next_state)) or not np.isfinite(reward):
            raise EnvironmentFaultError("environment produced a non-finite value")
        self._state = next_state
        self._t += 1
        return StepResult(next_state.copy(), self.observe(next_state), float(reward),
                          bool(terminated))

    def time_limit_reached(self) -> bool:
        return self._t >= self.spec.max_steps
