"""Toy cooperative Dec-POMDP environments with analytically known dynamics."""

from dima.envs.base import Env, EnvSpec, StepResult
from dima.envs.drag_tag import DragTag, DragTagParams
from dima.envs.linear_team import (
    LinearTeam,
    LinearTeamParams,
    default_linear_team_params,
    require_linear_team,
)


def make_env(name: str, seed: int = 0, **kwargs) -> Env:
    if name == "linear_team":
        sigma_w = kwargs.pop("sigma_w", 0.05)
        params = default_linear_team_params(sigma_w=sigma_w)
        for key, value in kwargs.items():
            if not hasattr(params, key):
                raise ValueError(f"unknown linear_team parameter: {key}")
            setattr(params, key, value)
        return LinearTeam(params, seed=seed)
    if name == "drag_tag":
        return DragTag(DragTagParams(**kwargs), seed=seed)
    raise ValueError(f"unknown environment: {name}")


__all__ = [
    "Env", "EnvSpec", "StepResult", "LinearTeam", "LinearTeamParams",
    "DragTag", "DragTagParams", "default_linear_team_params",
    "require_linear_team", "make_env",
]
