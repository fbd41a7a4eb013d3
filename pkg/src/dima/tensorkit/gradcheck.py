"""Central finite-difference verification of tape gradients.

The harness perturbs raw parameter storage in place, so the loss builder
must recompute the forward pass from the same Tensor objects on every call.
Inputs for kinked ops (relu, clamp, huber, ...) are sampled away from their
non-differentiable points, where finite differences are meaningless.
"""

from __future__ import annotations

import numpy as np

from dima.tensorkit import nn
from dima.tensorkit import tensor as T
from dima.tensorkit.tensor import Tape, Tensor

FD_H = 1e-5
# coordinates with |grad| below this are compared absolutely, not relatively
_REL_FLOOR = 1e-4


def rel_err(fd: float, an: float) -> float:
    return abs(fd - an) / max(abs(fd), abs(an), _REL_FLOOR)


def check_scalar_loss(build, tensors, h: float = FD_H, coords_per_tensor: int = 4,
                      rng: np.random.Generator | None = None) -> float:
    """Worst relative error between FD and tape gradients of build().

    `build` must return a scalar Tensor recomputed from the live `tensors`.
    """
    rng = rng or np.random.default_rng(0)
    with Tape() as tape:
        loss = build()
    grads = tape.backward(loss)

    worst = 0.0
    for t in tensors:
        flat = t.data.reshape(-1)
        n = flat.size
        coords = range(n) if n <= coords_per_tensor else rng.choice(n, coords_per_tensor, replace=False)
        g = grads.get(t)
        g_flat = np.zeros(n) if g is None else g.reshape(-1)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            f_plus = build().item()
            flat[c] = orig - h
            f_minus = build().item()
            flat[c] = orig
            fd = (f_plus - f_minus) / (2.0 * h)
            worst = max(worst, rel_err(fd, g_flat[c]))
    return worst


def _rand(rng, shape, lo=-2.0, hi=2.0):
    return Tensor(rng.uniform(lo, hi, size=shape), requires_grad=True)


def _weighted(out: Tensor, w: np.ndarray) -> Tensor:
    return T.sum(T.mul(out, Tensor(w)))


def primitive_op_checks(rng: np.random.Generator, trials: int = 100) -> dict:
    """Run every primitive op against finite differences.

    Returns op name -> worst relative error over `trials` random inputs
    drawn in [-2, 2].
    """
    worst: dict = {}

    def run(name, setup):
        w = worst.get(name, 0.0)
        for _ in range(trials):
            build, tensors = setup()
            w = max(w, check_scalar_loss(build, tensors, rng=rng, coords_per_tensor=3))
        worst[name] = w

    def binary(op, broadcast=False):
        def setup():
            a = _rand(rng, (3, 4))
            b = _rand(rng, (4,) if broadcast else (3, 4))
            w = rng.normal(size=(3, 4))
            return (lambda: _weighted(op(a, b), w)), [a, b]
        return setup

    def unary(op, lo=-2.0, hi=2.0, avoid=None):
        def setup():
            x = rng.uniform(lo, hi, size=(3, 4))
            if avoid is not None:
                lo_a, hi_a = avoid
                while np.any((x > lo_a) & (x < hi_a)):
                    bad = (x > lo_a) & (x < hi_a)
                    x[bad] = rng.uniform(lo, hi, size=int(bad.sum()))
            xt = Tensor(x, requires_grad=True)
            w = rng.normal(size=(3, 4))
            return (lambda: _weighted(op(xt), w)), [xt]
        return setup

    run("add", binary(T.add))
    run("add_broadcast", binary(T.add, broadcast=True))
    run("sub", binary(T.sub))
    run("mul", binary(T.mul))
    run("mul_broadcast", binary(T.mul, broadcast=True))
    run("div", binary(lambda a, b: T.div(a, T.add(T.mul(b, b), Tensor(0.5)))))
    run("neg", unary(T.neg))
    run("exp", unary(T.exp))
    run("log", unary(T.log, lo=0.05, hi=2.0))
    run("tanh", unary(T.tanh))
    run("relu", unary(T.relu, avoid=(-0.05, 0.05)))
    run("gelu", unary(T.gelu))
    run("pow_square", unary(lambda x: T.pow_const(x, 2.0)))
    run("clamp", unary(lambda x: T.clamp(x, -1.0, 1.0), avoid=(-1.05, -0.95)))
    run("minimum", binary(T.minimum))
    run("huber", unary(lambda x: T.huber(x, 1.0), avoid=(0.95, 1.05)))
    def reduction(op, out_shape):
        def setup():
            x = _rand(rng, (3, 4))
            w = rng.normal(size=out_shape)
            return (lambda: _weighted(op(x), w)), [x]
        return setup

    run("sum", reduction(lambda x: T.sum(x, axis=-1), (3,)))
    run("mean", reduction(lambda x: T.mean(x, axis=0), (4,)))
    run("softmax", unary(lambda x: T.softmax(x, axis=-1)))
    run("standardize", unary(T.standardize))

    def matmul_2d():
        a = _rand(rng, (3, 4))
        b = _rand(rng, (4, 2))
        w = rng.normal(size=(3, 2))
        return (lambda: _weighted(T.matmul(a, b), w)), [a, b]

    def matmul_batched():
        a = _rand(rng, (2, 3, 4))
        b = _rand(rng, (2, 4, 3))
        w = rng.normal(size=(2, 3, 3))
        return (lambda: _weighted(T.matmul(a, b), w)), [a, b]

    def matmul_folded():
        a = _rand(rng, (2, 3, 4))
        b = _rand(rng, (4, 2))
        w = rng.normal(size=(2, 3, 2))
        return (lambda: _weighted(T.matmul(a, b), w)), [a, b]

    run("matmul", matmul_2d)
    run("matmul_batched", matmul_batched)
    run("matmul_folded", matmul_folded)

    def layer_norm_setup():
        x = _rand(rng, (3, 6))
        gain = _rand(rng, (6,))
        bias = _rand(rng, (6,))
        w = rng.normal(size=(3, 6))
        return (lambda: _weighted(T.layer_norm(x, gain, bias), w)), [x, gain, bias]

    run("layer_norm", layer_norm_setup)

    def adaptive_norm_setup():
        mod = nn.AdaptiveNorm(6, 5, rng)
        mod.to_scale_shift.weight.data[:] = rng.normal(0, 0.3, size=(5, 12))
        x = _rand(rng, (3, 6))
        cond = _rand(rng, (3, 5))
        w = rng.normal(size=(3, 6))
        tensors = [x, cond] + mod.param_tensors()
        return (lambda: _weighted(mod(x, cond), w)), tensors

    run("adaptive_norm", adaptive_norm_setup)

    def shape_ops():
        x = _rand(rng, (3, 4))
        w = rng.normal(size=(2, 6))
        return (lambda: _weighted(T.reshape(x, (2, 6)), w)), [x]

    run("reshape", shape_ops)

    def transpose_setup():
        x = _rand(rng, (2, 3, 4))
        w = rng.normal(size=(2, 4, 3))
        return (lambda: _weighted(T.transpose(x, (0, 2, 1)), w)), [x]

    run("transpose", transpose_setup)

    def concat_setup():
        a = _rand(rng, (3, 2))
        b = _rand(rng, (3, 4))
        w = rng.normal(size=(3, 6))
        return (lambda: _weighted(T.concat([a, b], axis=-1), w)), [a, b]

    run("concat", concat_setup)

    def take_setup():
        x = _rand(rng, (5, 3))
        idx = np.array([0, 2, 2, 4])
        w = rng.normal(size=(4, 3))
        return (lambda: _weighted(T.take(x, idx, axis=0), w)), [x]

    run("take", take_setup)
    return worst


def negative_control_check(rng: np.random.Generator) -> float:
    """A tanh with a deliberately wrong backward rule; must FAIL the check."""

    def broken_tanh(a: Tensor) -> Tensor:
        out = Tensor(np.tanh(a.data))
        y = out.data
        return T._record(out, (a,), lambda g: ((a, g * 0.5 * (1.0 - y * y)),))

    x = _rand(rng, (3, 4))
    w = rng.normal(size=(3, 4))
    return check_scalar_loss(lambda: _weighted(broken_tanh(x), w), [x], rng=rng)
