"""Layers with explicit forward and backward passes.

Dense layers take ``(N, D)`` arrays; convolution and pooling take
``(N, C, L)``.  Each layer caches what its backward pass needs during
``forward`` and returns the gradient with respect to its input from
``backward``; parameter gradients land in ``self.grads`` in the same order as
``self.params``.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_out_len(length: int, kernel: int, stride: int, padding: int) -> int:
    return (length + 2 * padding - kernel) // stride + 1


def he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    params: list
    grads: list

    def __init__(self):
        self.params = []
        self.grads = []

    def forward(self, x, train: bool = False, rng=None):
        raise NotImplementedError

    def backward(self, g):
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, relu: bool, rng: np.random.Generator):
        super().__init__()
        self.W = he_uniform(rng, (n_in, n_out), n_in)
        self.b = np.zeros(n_out)
        self.relu = relu
        self.params = [self.W, self.b]

    def forward(self, x, train=False, rng=None):
        self.x = x
        z = x @ self.W + self.b
        if self.relu:
            self.active = z > 0
            z = np.where(self.active, z, 0.0)
        return z

    def backward(self, g):
        if self.relu:
            g = np.where(self.active, g, 0.0)
        self.grads = [self.x.T @ g, g.sum(axis=0)]
        return g @ self.W.T


class Conv1d(Layer):
    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int, padding: int,
                 relu: bool, rng: np.random.Generator):
        super().__init__()
        self.W = he_uniform(rng, (c_out, c_in, kernel), c_in * kernel)
        self.b = np.zeros(c_out)
        self.k, self.s, self.p = kernel, stride, padding
        self.relu = relu
        self.params = [self.W, self.b]

    def forward(self, x, train=False, rng=None):
        N, C, L = x.shape
        xp = np.pad(x, ((0, 0), (0, 0), (self.p, self.p))) if self.p else x
        self.in_shape = x.shape
        self.padded_len = xp.shape[2]
        win = sliding_window_view(xp, self.k, axis=2)[:, :, ::self.s, :]  # N, C, Lout, k
        self.win = win
        z = np.einsum("nclk,ock->nol", win, self.W, optimize=True) + self.b[None, :, None]
        if self.relu:
            self.active = z > 0
            z = np.where(self.active, z, 0.0)
        return z

    def backward(self, g):
        if self.relu:
            g = np.where(self.active, g, 0.0)
        dW = np.einsum("nol,nclk->ock", g, self.win, optimize=True)
        db = g.sum(axis=(0, 2))
        self.grads = [dW, db]
        N, C, L = self.in_shape
        Lout = g.shape[2]
        dxp = np.zeros((N, C, self.padded_len))
        span = self.s * (Lout - 1) + 1
        for kk in range(self.k):
            dxp[:, :, kk:kk + span:self.s] += np.einsum("nol,oc->ncl", g, self.W[:, :, kk], optimize=True)
        return dxp[:, :, self.p:self.p + L] if self.p else dxp


class MaxPool1d(Layer):
    def __init__(self, kernel: int, stride: int, padding: int = 0):
        super().__init__()
        self.k, self.s, self.p = kernel, stride, padding

    def forward(self, x, train=False, rng=None):
        N, C, L = x.shape
        xp = np.pad(x, ((0, 0), (0, 0), (self.p, self.p)), constant_values=-np.inf) if self.p else x
        self.in_shape = x.shape
        self.padded_len = xp.shape[2]
        win = sliding_window_view(xp, self.k, axis=2)[:, :, ::self.s, :]
        self.arg = win.argmax(axis=3)  # first maximum wins ties
        return np.take_along_axis(win, self.arg[..., None], axis=3)[..., 0]

    def backward(self, g):
        N, C, L = self.in_shape
        Lout = g.shape[2]
        dxp = np.zeros((N, C, self.padded_len))
        span = self.s * (Lout - 1) + 1
        for kk in range(self.k):
            dxp[:, :, kk:kk + span:self.s] += np.where(self.arg == kk, g, 0.0)
        return dxp[:, :, self.p:self.p + L] if self.p else dxp


class Flatten(Layer):
    def forward(self, x, train=False, rng=None):
        self.in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, g):
        return g.reshape(self.in_shape)


class Dropout(Layer):
    """Inverted dropout: kept units are scaled by 1/(1-rate) during training."""

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            self.mask = None
            return x
        if rng is None:
            raise ValueError("training-mode dropout needs a random generator")
        self.mask = (rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self.mask

    def backward(self, g):
        return g if self.mask is None else g * self.mask


class Reshape1d(Layer):
    """(N, L) -> (N, 1, L) so a sequence can enter a convolution."""

    def forward(self, x, train=False, rng=None):
        return x[:, None, :] if x.ndim == 2 else x

    def backward(self, g):
        return g[:, 0, :] if g.ndim == 3 and g.shape[1] == 1 else g
