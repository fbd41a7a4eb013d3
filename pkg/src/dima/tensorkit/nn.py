"""Parameterized layers built on the tensor primitives."""

from __future__ import annotations

import numpy as np

from dima.errors import ContractViolationError
from dima.tensorkit import tensor as T
from dima.tensorkit.tensor import Tensor


class Module:
    """Base for anything holding trainable tensors.

    Parameters are discovered by attribute walk, so construction order fixes
    the (name, tensor) listing used by optimizers and checkpoints.
    """

    def parameters(self):
        """Yield (name, tensor) pairs for this module and its children."""
        for attr, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield attr, value
            elif isinstance(value, Module):
                for sub, p in value.parameters():
                    yield f"{attr}.{sub}", p
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        for sub, p in item.parameters():
                            yield f"{attr}.{i}.{sub}", p
                    elif isinstance(item, Tensor) and item.requires_grad:
                        yield f"{attr}.{i}", item

    def param_tensors(self):
        return [p for _, p in self.parameters()]

    def n_params(self) -> int:
        return int(np.sum([p.size for p in self.param_tensors()])) if self.param_tensors() else 0


def _init_weight(rng: np.random.Generator, fan_in: int, fan_out: int, scale: float = 1.0):
    std = scale / np.sqrt(fan_in)
    return Tensor(rng.normal(0.0, std, size=(fan_in, fan_out)), requires_grad=True)


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 zero_init: bool = False):
        if zero_init:
            self.weight = Tensor(np.zeros((in_dim, out_dim)), requires_grad=True)
        else:
            self.weight = _init_weight(rng, in_dim, out_dim)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return T.add(T.matmul(x, self.weight), self.bias)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.shift = Tensor(np.zeros(dim), requires_grad=True)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gain, self.shift, self.eps)


class AdaptiveNorm(Module):
    """Layer normalization modulated by a conditioning embedding.

    The conditioning vector maps through a learned affine to per-channel
    scale gamma and shift beta; output is standardize(x)*(1+gamma)+beta.
    The affine is zero-initialized so the layer starts as plain layer norm.
    """

    def __init__(self, dim: int, cond_dim: int, rng: np.random.Generator, eps: float = 1e-5):
        self.to_scale_shift = Linear(cond_dim, 2 * dim, rng, zero_init=True)
        self.dim = dim
        self.cond_dim = cond_dim
        self.eps = eps

    def __call__(self, x: Tensor, cond: Tensor) -> Tensor:
        if x.shape[-1] != self.dim:
            raise ContractViolationError(
                f"adaptive_norm expects width {self.dim}, got {x.shape}")
        if cond.shape[-1] != self.cond_dim:
            raise ContractViolationError(
                f"adaptive_norm conditioning width {cond.shape[-1]} != {self.cond_dim}")
        ss = self.to_scale_shift(cond)
        gamma = T.take(ss, np.arange(self.dim), axis=-1)
        beta = T.take(ss, np.arange(self.dim, 2 * self.dim), axis=-1)
        normed = T.standardize(x, self.eps)
        return T.add(T.mul(normed, T.add(gamma, Tensor(1.0))), beta)


def adaptive_norm(x: Tensor, cond: Tensor, module: AdaptiveNorm) -> Tensor:
    """Functional alias for the adaptive normalization pathway."""
    return module(x, cond)


class MLP(Module):
    """Stack of Linear layers with an activation between them."""

    def __init__(self, dims, rng: np.random.Generator, activation: str = "gelu",
                 layer_norm: bool = False, zero_init_last: bool = False):
        self.layers = [
            Linear(dims[i], dims[i + 1], rng,
                   zero_init=(zero_init_last and i == len(dims) - 2))
            for i in range(len(dims) - 1)
        ]
        self.norms = (
            [LayerNorm(dims[i + 1]) for i in range(len(dims) - 2)] if layer_norm else []
        )
        self.activation = {"gelu": T.gelu, "relu": T.relu, "tanh": T.tanh}[activation]

    def __call__(self, x: Tensor) -> Tensor:
        n = len(self.layers)
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < n - 1:
                if self.norms:
                    x = self.norms[i](x)
                x = self.activation(x)
        return x


def dropout(x: Tensor, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or p == 0."""
    if not training or p <= 0.0:
        return x
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return T.mul(x, Tensor(mask))
