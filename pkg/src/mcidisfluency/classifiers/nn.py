"""Multilayer perceptron and small CNN with hand-written backpropagation.

Both use sigmoid hidden units and a softmax / cross-entropy output, and
train by full-batch gradient descent. A step that raises the loss is
undone and the learning rate halved, so the loss sequence never increases.
"""

from __future__ import annotations

import math

import numpy as np


class DivergenceError(FloatingPointError):
    pass


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs, y):
    p = probs[np.arange(y.size), y]
    return float(-np.mean(np.log(np.maximum(p, 1e-300))))


def _dense_stack_init(rng, sizes):
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        params.append(rng.uniform(-0.5, 0.5, (fan_in, fan_out)))
        params.append(rng.uniform(-0.5, 0.5, fan_out))
    return params


def _dense_forward(params, a):
    acts = [a]
    n_layers = len(params) // 2
    for layer in range(n_layers):
        W, b = params[2 * layer], params[2 * layer + 1]
        z = acts[-1] @ W + b
        acts.append(softmax(z) if layer == n_layers - 1 else sigmoid(z))
    return acts


def _dense_backward(params, acts, y):
    """Gradients of mean cross-entropy; also returns d(loss)/d(input)."""
    n = y.size
    delta = acts[-1].copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = [None] * len(params)
    for layer in range(len(params) // 2 - 1, -1, -1):
        W = params[2 * layer]
        grads[2 * layer] = acts[layer].T @ delta
        grads[2 * layer + 1] = delta.sum(axis=0)
        delta = delta @ W.T
        if layer > 0:
            a = acts[layer]
            delta = delta * a * (1.0 - a)
    return grads, delta


class MLP:
    def __init__(self, n_in: int, hidden=(100, 100), n_out: int = 2, seed: int = 0, params=None):
        self.sizes = [n_in, *hidden, n_out]
        self.params = params if params is not None else _dense_stack_init(
            np.random.default_rng(seed), self.sizes)

    def forward(self, X):
        return _dense_forward(self.params, np.asarray(X, dtype=np.float64))[-1]

    def loss_and_grad(self, X, y):
        acts = _dense_forward(self.params, np.asarray(X, dtype=np.float64))
        grads, _ = _dense_backward(self.params, acts, y)
        return cross_entropy(acts[-1], y), grads


def grid_side(d: int) -> int:
    return math.isqrt(d - 1) + 1 if d > 1 else 1


def reshape_to_grid(x) -> np.ndarray:
    """Row-major square grid of side ceil(sqrt(D)), zero padded.

    Accepts a single vector or a ``(N, D)`` batch.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    d = X.shape[1]
    if d < 1:
        raise ValueError("empty feature vector")
    s = grid_side(d)
    out = np.zeros((X.shape[0], s * s))
    out[:, :d] = X
    out = out.reshape(X.shape[0], s, s)
    return out[0] if single else out


def _patches(grids, c):
    n, s, _ = grids.shape
    o = s - c + 1
    view = np.lib.stride_tricks.sliding_window_view(grids, (c, c), axis=(1, 2))
    return view.reshape(n, o, o, c * c)


class CNN:
    """conv(c x c, valid) -> sigmoid -> maxpool(p x p, stride p) -> dense... -> softmax."""

    def __init__(self, side: int, n_filters: int = 20, conv: int = 3, pool: int = 2,
                 dense=(20,), n_out: int = 2, seed: int = 0, params=None):
        if side < conv:
            raise ValueError(f"grid {side}x{side} smaller than {conv}x{conv} kernel")
        self.side, self.n_filters, self.conv, self.pool = side, n_filters, conv, pool
        self.conv_out = side - conv + 1
        self.pool_out = self.conv_out // pool
        if self.pool_out < 1:
            raise ValueError("feature map smaller than the pooling window")
        self.flat = self.pool_out * self.pool_out * n_filters
        self.sizes = [self.flat, *dense, n_out]
        if params is None:
            rng = np.random.default_rng(seed)
            params = [rng.uniform(-0.5, 0.5, (n_filters, conv * conv)),
                      rng.uniform(-0.5, 0.5, n_filters)]
            params += _dense_stack_init(rng, self.sizes)
        self.params = params

    def shapes(self) -> list[tuple[int, ...]]:
        """Activation shapes from convolution output to class scores."""
        co, po, f = self.conv_out, self.pool_out, self.n_filters
        return [(co, co, f), (po, po, f), (self.flat,), *[(h,) for h in self.sizes[1:]]]

    def _forward(self, grids):
        grids = np.asarray(grids, dtype=np.float64)
        if grids.ndim == 2:
            grids = grids[None]
        F, bf = self.params[0], self.params[1]
        P = _patches(grids, self.conv)
        A = sigmoid(P @ F.T + bf)  # (n, co, co, f)
        n, p, q = grids.shape[0], self.pool, self.pool_out
        blocks = A[:, : q * p, : q * p].reshape(n, q, p, q, p, self.n_filters)
        blocks = blocks.transpose(0, 1, 3, 2, 4, 5).reshape(n, q, q, p * p, self.n_filters)
        arg = np.argmax(blocks, axis=3)
        pooled = np.take_along_axis(blocks, arg[:, :, :, None, :], axis=3)[:, :, :, 0, :]
        acts = _dense_forward(self.params[2:], pooled.reshape(n, -1))
        return acts, (P, A, arg)

    def forward(self, grids):
        return self._forward(grids)[0][-1]

    def loss_and_grad(self, grids, y):
        acts, (P, A, arg) = self._forward(grids)
        dense_grads, dflat = _dense_backward(self.params[2:], acts, y)
        n, p, q, f = P.shape[0], self.pool, self.pool_out, self.n_filters
        dpool = dflat.reshape(n, q, q, f)
        dblocks = np.zeros((n, q, q, p * p, f))
        np.put_along_axis(dblocks, arg[:, :, :, None, :], dpool[:, :, :, None, :], axis=3)
        dA = np.zeros_like(A)
        dA[:, : q * p, : q * p] = (dblocks.reshape(n, q, q, p, p, f)
                                   .transpose(0, 1, 3, 2, 4, 5).reshape(n, q * p, q * p, f))
        dZ = dA * A * (1.0 - A)
        dF = np.einsum("nijf,nijk->fk", dZ, P)
        dbf = dZ.sum(axis=(0, 1, 2))
        return cross_entropy(acts[-1], y), [dF, dbf, *dense_grads]


def train_gd(net, X, y, lr: float, epochs: int) -> list[float]:
    """Full-batch gradient descent with halve-on-increase step control."""
    loss, grads = net.loss_and_grad(X, y)
    history = [loss]
    for _ in range(epochs):
        if not math.isfinite(loss):
            raise DivergenceError("non-finite training loss")
        if not all(np.isfinite(g).all() for g in grads):
            raise DivergenceError("non-finite gradient")
        old = [p.copy() for p in net.params]
        for p, g in zip(net.params, grads):
            p -= lr * g
        new_loss, new_grads = net.loss_and_grad(X, y)
        if not math.isfinite(new_loss) or new_loss > loss:
            net.params[:] = old
            lr *= 0.5
            if lr < 1e-12:
                break
        else:
            loss, grads = new_loss, new_grads
        history.append(loss)
    if not math.isfinite(loss):
        raise DivergenceError("non-finite training loss")
    return history


def gradient_check(net, X, y, h: float = 1e-5) -> float:
    """Max relative error between backprop and central finite differences."""
    _, grads = net.loss_and_grad(X, y)
    worst = 0.0
    for p, g in zip(net.params, grads):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + h
            lp, _ = net.loss_and_grad(X, y)
            flat[k] = orig - h
            lm, _ = net.loss_and_grad(X, y)
            flat[k] = orig
            num = (lp - lm) / (2.0 * h)
            rel = abs(num - gflat[k]) / max(abs(num) + abs(gflat[k]), 1e-8)
            worst = max(worst, rel)
    return worst
