"""AdamW with decoupled weight decay, plus global-norm gradient clipping."""

from __future__ import annotations

import numpy as np

from dima.errors import NonFiniteGradientError


class AdamWState:
    """Per-parameter Adam moments and the shared step counter.

    With weight_decay=0 the update is exactly Adam; the decay term is applied
    directly to the parameter, independent of the moment estimates.
    """

    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = list(params)
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]
        self.t = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay

    def state_arrays(self):
        """Flat (name, array) view of the moments for checkpointing."""
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            yield f"m.{i}", m
            yield f"v.{i}", v


def adamw_step(state: AdamWState, grads) -> None:
    """One optimizer step; rejects the whole step on any non-finite gradient."""
    grads = list(grads)
    if len(grads) != len(state.params):
        raise ValueError(f"expected {len(state.params)} gradients, got {len(grads)}")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError("non-finite gradient; step rejected")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(state.params, grads, state.m, state.v):
        if state.weight_decay != 0.0:
            p.data -= state.lr * state.weight_decay * p.data
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def global_grad_norm(grads) -> float:
    total = 0.0
    for g in grads:
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_grad_norm(grads, max_norm: float):
    """Scale all gradients so the global L2 norm is at most max_norm."""
    if max_norm <= 0.0:
        raise ValueError("max_norm must be positive")
    grads = list(grads)
    norm = global_grad_norm(grads)
    if norm > max_norm:
        scale = max_norm / norm
        grads = [g * scale for g in grads]
    return grads, norm
