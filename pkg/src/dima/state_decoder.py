"""Quantized autoencoder from global state to joint local observations.

Finite scalar quantization: each latent channel is squashed by a scaled
tanh and rounded to one of L_i integer codes, giving an implicit codebook
of prod(L_i) entries per group with no auxiliary losses. Even level counts
use a half-step offset inside the squash so the reachable code count is
exactly L_i; odd counts are symmetric about zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dima.errors import ContractViolationError
from dima.tensorkit import nn
from dima.tensorkit import tensor as T
from dima.tensorkit.tensor import Tensor


@dataclass
class FSQConfig:
    levels: tuple = (8, 6, 5)
    n_groups: int = 2          # latent width = n_groups * len(levels)
    hidden: int = 512
    conditioning_note: str = field(default="", repr=False)

    def __post_init__(self):
        self.levels = tuple(int(v) for v in self.levels)
        if any(v < 2 for v in self.levels):
            raise ValueError("each quantization level count must be >= 2")
        if self.n_groups < 1:
            raise ValueError("n_groups must be >= 1")

    @property
    def latent_width(self) -> int:
        return self.n_groups * len(self.levels)

    @property
    def codebook_size(self) -> int:
        """Implicit codebook cardinality of one level group."""
        return int(np.prod(self.levels))

    @property
    def channel_levels(self) -> np.ndarray:
        return np.tile(np.asarray(self.levels, dtype=np.float64), self.n_groups)


def bound(z: Tensor, levels: np.ndarray) -> Tensor:
    """Squash each channel so rounding yields exactly levels[i] codes."""
    levels = np.asarray(levels, dtype=np.float64)
    if z.shape[-1] != levels.shape[0]:
        raise ContractViolationError(
            f"latent width {z.shape[-1]} != {levels.shape[0]} channels")
    half_l = (levels - 1.0) / 2.0
    offset = np.where(levels % 2 == 0, 0.5, 0.0)
    shift = np.arctanh(offset / half_l)
    squashed = T.mul(T.tanh(T.add(z, Tensor(shift))), Tensor(half_l))
    return T.sub(squashed, Tensor(offset))


def quantize(bounded: Tensor):
    """(integer codes, straight-through latent) for a bounded latent."""
    ste = T.round_ste(bounded)
    codes = ste.data.astype(np.int64)
    return codes, ste


class StateDecoder(nn.Module):
    """Encoder/decoder MLP pair around the finite scalar quantizer.

    Operates on normalized global states and reconstructs the flat joint
    observation vector, which partitions into per-agent observations.
    """

    def __init__(self, state_dim: int, obs_dims, config: FSQConfig,
                 rng: np.random.Generator):
        self.config = config
        self.obs_dims = tuple(int(d) for d in obs_dims)
        self.obs_total = int(np.sum(self.obs_dims))
        w = config.latent_width
        h = config.hidden
        self.encoder = nn.MLP([state_dim, h, h, w], rng)
        self.decoder = nn.MLP([w, h, h, self.obs_total], rng)

    def encode_bounded(self, states_n) -> Tensor:
        states_t = states_n if isinstance(states_n, Tensor) else Tensor(np.asarray(states_n))
        return bound(self.encoder(states_t), self.config.channel_levels)

    def codes(self, states_n) -> np.ndarray:
        c, _ = quantize(self.encode_bounded(states_n))
        return c

    def reconstruct(self, states_n) -> Tensor:
        _, ste = quantize(self.encode_bounded(states_n))
        return self.decoder(ste)

    def decode_obs(self, states_n) -> list:
        """Per-agent observation vectors for a batch of normalized states."""
        flat = self.reconstruct(states_n).data
        return self.split_obs(flat)

    def split_obs(self, flat: np.ndarray) -> list:
        if flat.shape[-1] != self.obs_total:
            raise ContractViolationError(
                f"observation width {flat.shape[-1]} != {self.obs_total}")
        out, start = [], 0
        for d in self.obs_dims:
            out.append(flat[..., start:start + d])
            start += d
        return out


def fsq_loss(model: StateDecoder, states_n: np.ndarray, obs_flat: np.ndarray) -> Tensor:
    """Single reconstruction term: mean over the batch of ||o - D(q(E(s)))||^2."""
    recon = model.reconstruct(states_n)
    err = T.sub(recon, Tensor(np.asarray(obs_flat, dtype=np.float64)))
    return T.mean(T.sum(T.mul(err, err), axis=-1))


def reachable_codes(levels: int, sweep=None) -> np.ndarray:
    """Enumerate codes one channel can produce by sweeping the raw latent."""
    sweep = np.linspace(-6.0, 6.0, 4001) if sweep is None else sweep
    z = Tensor(sweep.reshape(-1, 1))
    b = bound(z, np.array([levels], dtype=np.float64))
    return np.unique(np.round(b.data))
