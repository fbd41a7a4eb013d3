"""Minimal dense-tensor numerics with reverse-mode autodiff."""

from dima.tensorkit.tensor import (
    GradStore,
    Tape,
    Tensor,
    add,
    backward,
    clamp,
    concat,
    div,
    exp,
    gelu,
    huber,
    layer_norm,
    log,
    matmul,
    mean,
    minimum,
    mul,
    neg,
    pow_const,
    relu,
    reshape,
    round_ste,
    softmax,
    standardize,
    sub,
    sum,
    take,
    tanh,
    transpose,
)
from dima.tensorkit.optim import AdamWState, adamw_step, clip_grad_norm, global_grad_norm

__all__ = [
    "Tensor", "Tape", "GradStore", "backward",
    "add", "sub", "mul", "div", "neg", "exp", "log", "tanh", "relu", "gelu",
    "pow_const", "clamp", "minimum", "huber", "round_ste", "sum", "mean", "reshape",
    "transpose", "concat", "take", "matmul", "softmax", "standardize",
    "layer_norm",
    "AdamWState", "adamw_step", "clip_grad_norm", "global_grad_norm",
]
