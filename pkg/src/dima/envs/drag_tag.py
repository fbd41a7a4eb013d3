"""Rendezvous environment with quadratic velocity drag.

Point-mass agents accelerate in the plane; velocity obeys
v' = v + dt * (a - k_d * ||v|| * v) and positions integrate v'. The team
is rewarded for being close together and the episode ends early when all
agents reach a fixed rendezvous point. Dynamics are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dima.envs.base import Env, EnvSpec


@dataclass
class DragTagParams:
    n_agents: int = 2
    dt: float = 0.1
    drag: float = 0.1
    action_cost: float = 0.01
    rendezvous_radius: float = 0.3
    max_steps: int = 100
    init_box: float = 1.0


class DragTag(Env):
    """State layout: [p_1 (2), v_1 (2), ..., p_n (2), v_n (2)].

    Agent i observes its own position and velocity plus the positions of
    the other agents (a strict subset of the state: others' velocities are
    hidden).
    """

    def __init__(self, params: DragTagParams | None = None, seed: int = 0):
        self.params = params or DragTagParams()
        n = self.params.n_agents
        spec = EnvSpec(
            n_agents=n,
            state_dim=4 * n,
            obs_dims=tuple(4 + 2 * (n - 1) for _ in range(n)),
            action_dim=2,
            max_steps=self.params.max_steps,
        )
        super().__init__(spec, seed)

    def _initial_state(self, rng):
        n = self.params.n_agents
        state = np.zeros(4 * n)
        for i in range(n):
            state[4 * i: 4 * i + 2] = rng.uniform(-self.params.init_box,
                                                  self.params.init_box, size=2)
        return state

    @staticmethod
    def positions(state, n):
        return np.stack([state[4 * i: 4 * i + 2] for i in range(n)])

    @staticmethod
    def velocities(state, n):
        return np.stack([state[4 * i + 2: 4 * i + 4] for i in range(n)])

    def observe(self, state):
        n = self.params.n_agents
        pos = self.positions(state, n)
        obs = []
        for i in range(n):
            others = np.concatenate([pos[j] for j in range(n) if j != i]) if n > 1 else np.zeros(0)
            obs.append(np.concatenate([state[4 * i: 4 * i + 4], others]))
        return obs

    def mean_pairwise_distance(self, state) -> float:
        n = self.params.n_agents
        pos = self.positions(state, n)
        dists = [np.linalg.norm(pos[i] - pos[j]) for i in range(n) for j in range(i + 1, n)]
        return float(np.mean(dists))

    def _dynamics(self, state, actions, rng):
        p = self.params
        n = p.n_agents
        next_state = np.empty_like(state)
        for i in range(n):
            pos = state[4 * i: 4 * i + 2]
            vel = state[4 * i + 2: 4 * i + 4]
            speed = np.linalg.norm(vel)
            new_vel = vel + p.dt * (actions[i] - p.drag * speed * vel)
            next_state[4 * i: 4 * i + 2] = pos + p.dt * new_vel
            next_state[4 * i + 2: 4 * i + 4] = new_vel
        reward = -self.mean_pairwise_distance(state) \
            - p.action_cost * float(np.sum(actions * actions))
        pos_next = self.positions(next_state, n)
        terminated = bool(np.all(np.linalg.norm(pos_next, axis=1) <= p.rendezvous_radius))
        return next_state, reward, terminated
