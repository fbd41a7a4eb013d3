"""Causal transformer predicting shared reward and termination.

The input is an interleaved token sequence (s_t, a_t, s_{t+1}, a_{t+1}, ...)
of length 2H; both prediction heads read the embedding at each action-token
position, so the estimate for step t sees exactly s_<=t and a_<=t. Reward is
a scalar regression on standardized targets (smooth L1); termination is a
two-class head with class 0 = terminate, class 1 = continue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dima.errors import ContractViolationError
from dima.tensorkit import nn
from dima.tensorkit import tensor as T
from dima.tensorkit.tensor import Tensor

NEG_MASK = -1e9
TERMINATE_CLASS = 0
CONTINUE_CLASS = 1


@dataclass
class SeqBatch:
    """Aligned (state, joint action, reward, continue-flag) windows."""

    states: np.ndarray        # (B, H, state_dim)
    actions: np.ndarray       # (B, H, n_agents, action_dim)
    rewards: np.ndarray       # (B, H) standardized
    terminated: np.ndarray    # (B, H) bool, True where the episode ends

    def __post_init__(self):
        b, h = self.states.shape[:2]
        if self.actions.shape[:2] != (b, h) or self.rewards.shape != (b, h) \
                or self.terminated.shape != (b, h):
            raise ContractViolationError("misaligned sequence batch")

    @property
    def horizon(self) -> int:
        return self.states.shape[1]


@dataclass
class RTConfig:
    state_dim: int
    n_agents: int
    action_dim: int
    horizon: int = 15
    embed_dim: int = 128
    n_layers: int = 4
    n_heads: int = 4
    dropout: float = 0.1

    def __post_init__(self):
        if self.embed_dim % self.n_heads != 0:
            raise ValueError("embed_dim must be divisible by n_heads")


class _Block(nn.Module):
    def __init__(self, cfg: RTConfig, rng: np.random.Generator):
        e = cfg.embed_dim
        self.ln1 = nn.LayerNorm(e)
        self.ln2 = nn.LayerNorm(e)
        self.wq = nn.Linear(e, e, rng)
        self.wk = nn.Linear(e, e, rng)
        self.wv = nn.Linear(e, e, rng)
        self.proj = nn.Linear(e, e, rng)
        self.mlp = nn.MLP([e, 4 * e, e], rng)
        self.n_heads = cfg.n_heads
        self.dropout = cfg.dropout

    def __call__(self, x: Tensor, mask: np.ndarray, rng, training: bool) -> Tensor:
        b, t, e = x.shape
        h, dh = self.n_heads, e // self.n_heads
        y = self.ln1(x)

        def split(z):
            return T.transpose(T.reshape(z, (b, t, h, dh)), (0, 2, 1, 3))

        q, k, v = split(self.wq(y)), split(self.wk(y)), split(self.wv(y))
        scores = T.mul(T.matmul(q, T.transpose(k, (0, 1, 3, 2))),
                       Tensor(1.0 / np.sqrt(dh)))
        scores = T.add(scores, Tensor(mask[:t, :t]))
        att = T.softmax(scores, axis=-1)
        att = nn.dropout(att, self.dropout, rng, training)
        ctx = T.reshape(T.transpose(T.matmul(att, v), (0, 2, 1, 3)), (b, t, e))
        x = T.add(x, nn.dropout(self.proj(ctx), self.dropout, rng, training))
        x = T.add(x, nn.dropout(self.mlp(self.ln2(x)), self.dropout, rng, training))
        return x


class RTNet(nn.Module):
    def __init__(self, cfg: RTConfig, rng: np.random.Generator):
        self.config = cfg
        e = cfg.embed_dim
        self.state_proj = nn.Linear(cfg.state_dim, e, rng)
        self.action_proj = nn.Linear(cfg.n_agents * cfg.action_dim, e, rng)
        self.pos_embed = Tensor(
            0.02 * rng.standard_normal((2 * cfg.horizon, e)), requires_grad=True)
        self.blocks = [_Block(cfg, rng) for _ in range(cfg.n_layers)]
        self.ln_f = nn.LayerNorm(e)
        self.reward_head = nn.MLP([e, e, e, 1], rng)
        self.term_head = nn.MLP([e, e, e, 2], rng)
        tokens = 2 * cfg.horizon
        self._mask = np.triu(np.full((tokens, tokens), NEG_MASK), k=1)

    def forward(self, states, actions, rng: np.random.Generator | None = None,
                training: bool = False):
        """Per-step reward estimates and termination logits.

        states: (B, H, d) normalized; actions: (B, H, n, action_dim).
        Returns (rewards (B, H), term_logits (B, H, 2)) as Tensors.
        """
        cfg = self.config
        states_t = states if isinstance(states, Tensor) else Tensor(np.asarray(states))
        actions_t = actions if isinstance(actions, Tensor) else Tensor(np.asarray(actions))
        b, h = states_t.shape[0], states_t.shape[1]
        if h > cfg.horizon:
            raise ContractViolationError(
                f"sequence of {h} steps exceeds configured horizon {cfg.horizon}")
        if rng is None:
            rng = np.random.default_rng(0)

        s_emb = self.state_proj(states_t)
        a_emb = self.action_proj(T.reshape(actions_t, (b, h, cfg.n_agents * cfg.action_dim)))
        pair = T.concat([T.reshape(s_emb, (b, h, 1, cfg.embed_dim)),
                         T.reshape(a_emb, (b, h, 1, cfg.embed_dim))], axis=2)
        x = T.reshape(pair, (b, 2 * h, cfg.embed_dim))
        x = T.add(x, T.take(self.pos_embed, np.arange(2 * h), axis=0))
        x = nn.dropout(x, cfg.dropout, rng, training)
        for block in self.blocks:
            x = block(x, self._mask, rng, training)
        x = self.ln_f(x)
        at_actions = T.take(x, np.arange(1, 2 * h, 2), axis=1)   # (B, H, e)
        rewards = T.reshape(self.reward_head(at_actions), (b, h))
        term_logits = self.term_head(at_actions)
        return rewards, term_logits

    def continue_probability(self, states, actions) -> np.ndarray:
        _, logits = self.forward(states, actions, training=False)
        return T.softmax(logits, axis=-1).data[..., CONTINUE_CLASS]


def rt_loss(model: RTNet, batch: SeqBatch, rng: np.random.Generator,
            training: bool = True) -> Tensor:
    """Sum over time of SmoothL1(reward) + CrossEntropy(termination),
    averaged over the batch."""
    pred_r, logits = model.forward(batch.states, batch.actions, rng, training)
    resid = T.sub(pred_r, Tensor(batch.rewards))
    reward_term = T.sum(T.huber(resid, 1.0), axis=-1)

    classes = np.where(batch.terminated, TERMINATE_CLASS, CONTINUE_CLASS)
    onehot = np.zeros(logits.shape)
    b, h = classes.shape
    onehot[np.arange(b)[:, None], np.arange(h)[None, :], classes] = 1.0
    logp = log_softmax(logits)
    ce = T.neg(T.sum(T.mul(logp, Tensor(onehot)), axis=(1, 2)))
    return T.mean(T.add(reward_term, ce))


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    """x - logsumexp(x); the max shift is a constant and cancels in the gradient."""
    m = np.max(x.data, axis=axis, keepdims=True)
    shifted = T.sub(x, Tensor(m))
    lse = T.log(T.sum(T.exp(shifted), axis=axis, keepdims=True))
    return T.sub(shifted, lse)
