"""Minimal deterministic CNN with manual backpropagation.

Architecture: conv3x3 (pad 1, stride 1) -> ReLU -> dropout(0.5) ->
maxpool 2x2 (stride 1) -> flatten -> fc -> ReLU -> fc -> 13 logits.
At full scale the conv has 122 output channels so the flattened feature
count is 122*4*9 = 4392. Everything is float64 so finite-difference
gradient checks hold to tight tolerances.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

N_CLASSES = 13
CONV_CHANNELS = 122
HIDDEN = 100


class ShapeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# layers (functional, cache-returning)

def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """3x3 convolution, zero padding 1, stride 1. x: (N, C, H, W)."""
    n, c, h, wd = x.shape
    k_out, c_k, kh, kw = w.shape
    if c != c_k:
        raise ShapeError(f"conv input has {c} channels, kernel expects {c_k}")
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # (N, C, H, W, kh, kw)
    y = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))  # (N, H, W, K)
    y = np.transpose(y, (0, 3, 1, 2)) + b[None, :, None, None]
    return y, (windows, w, x.shape)


def conv2d_backward(dy: np.ndarray, cache):
    windows, w, x_shape = cache
    db = dy.sum(axis=(0, 2, 3))
    # dW[k,c,i,j] = sum_{n,h,w} dy[n,k,h,w] * windows[n,c,h,w,i,j]
    dw = np.tensordot(dy, windows, axes=([0, 2, 3], [0, 2, 3]))  # (K, C, kh, kw)
    # dx via full correlation of dy with the kernel
    dyp = np.pad(dy, ((0, 0), (0, 0), (1, 1), (1, 1)))
    dy_windows = sliding_window_view(dyp, (3, 3), axis=(2, 3))  # (N, K, H, W, 3, 3)
    w_flip = w[:, :, ::-1, ::-1]
    dx = np.tensordot(dy_windows, w_flip, axes=([1, 4, 5], [0, 2, 3]))  # (N, H, W, C)
    dx = np.transpose(dx, (0, 3, 1, 2))
    return dx, dw, db


def maxpool2_forward(x: np.ndarray):
    """2x2 max pooling with stride 1; (N, C, H, W) -> (N, C, H-1, W-1)."""
    if x.shape[2] < 2 or x.shape[3] < 2:
        raise ShapeError("maxpool needs spatial dims >= 2")
    windows = sliding_window_view(x, (2, 2), axis=(2, 3))  # (N, C, H-1, W-1, 2, 2)
    flat = windows.reshape(*windows.shape[:4], 4)
    arg = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return y, (x.shape, arg)


def maxpool2_backward(dy: np.ndarray, cache):
    x_shape, arg = cache
    n, c, ho, wo = dy.shape
    dx = np.zeros(x_shape)
    di, dj = np.divmod(arg, 2)
    ni, ci, hi, wi = np.indices(dy.shape, sparse=False)
    np.add.at(dx, (ni, ci, hi + di, wi + dj), dy)
    return dx


def relu_forward(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(dy: np.ndarray, mask: np.ndarray):
    return dy * mask


def dropout_mask(shape, p: float, rng: np.random.Generator) -> np.ndarray:
    return (rng.random(shape) >= p).astype(float)


def dropout_forward(x: np.ndarray, p: float, train: bool, mask: np.ndarray | None = None):
    """Inverted dropout: identity in eval mode, survivors scaled by 1/(1-p)."""
    if not train or p == 0.0:
        return x, None
    if mask is None:
        raise ValueError("train-mode dropout needs a mask")
    scale = 1.0 / (1.0 - p)
    return x * mask * scale, (mask, scale)


def dropout_backward(dy: np.ndarray, cache):
    if cache is None:
        return dy
    mask, scale = cache
    return dy * mask * scale


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    if x.shape[-1] != w.shape[1]:
        raise ShapeError(f"linear input dim {x.shape[-1]} != weight dim {w.shape[1]}")
    return x @ w.T + b, (x, w)


def linear_backward(dy: np.ndarray, cache):
    x, w = cache
    return dy @ w, dy.T @ x, dy.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels):
    """Mean cross-entropy loss and dloss/dlogits. Accepts (13,) or (N, 13)."""
    logits = np.asarray(logits, dtype=float)
    single = logits.ndim == 1
    if single:
        logits = logits[None, :]
        labels = np.array([labels])
    else:
        labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError("label out of range")
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    log_probs = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -log_probs[np.arange(n), labels].mean()
    grad = softmax(logits)
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    if single:
        grad = grad[0]
    return float(loss), grad


# ---------------------------------------------------------------------------
# model

class CnnModel:
    """Conv/FC classifier; full scale is in_channels 122 or 366."""

    DROPOUT_P = 0.5

    def __init__(self, in_channels: int, seed: int = 0, conv_channels: int = CONV_CHANNELS,
                 hidden: int = HIDDEN, n_classes: int = N_CLASSES,
                 spatial: tuple[int, int] = (5, 10)):
        self.in_channels = in_channels
        self.conv_channels = conv_channels
        self.spatial = spatial
        self.flat_dim = conv_channels * (spatial[0] - 1) * (spatial[1] - 1)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x494E4954]))
        self.params: dict[str, np.ndarray] = {}
        self.params["conv_w"] = self._kaiming(rng, (conv_channels, in_channels, 3, 3), in_channels * 9)
        self.params["conv_b"] = np.zeros(conv_channels)
        self.params["fc1_w"] = self._kaiming(rng, (hidden, self.flat_dim), self.flat_dim)
        self.params["fc1_b"] = np.zeros(hidden)
        self.params["fc2_w"] = self._kaiming(rng, (n_classes, hidden), hidden)
        self.params["fc2_b"] = np.zeros(n_classes)

    @staticmethod
    def _kaiming(rng, shape, fan_in):
        limit = np.sqrt(6.0 / fan_in)
        return rng.uniform(-limit, limit, size=shape)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {k: v.shape for k, v in self.params.items()}

    def forward(self, x: np.ndarray, train: bool = False,
                dropout_rng: np.random.Generator | None = None,
                dropout_masks: np.ndarray | None = None):
        """Returns (logits, cache). Train mode needs a dropout rng or mask."""
        if x.ndim != 4 or x.shape[1] != self.in_channels or x.shape[2:] != self.spatial:
            raise ShapeError(f"expected (N, {self.in_channels}, {self.spatial[0]}, "
                             f"{self.spatial[1]}), got {x.shape}")
        p = self.params
        c1, conv_cache = conv2d_forward(x, p["conv_w"], p["conv_b"])
        r1, r1_mask = relu_forward(c1)
        if train and dropout_masks is None:
            if dropout_rng is None:
                raise ValueError("train-mode forward needs dropout_rng or dropout_masks")
            dropout_masks = dropout_mask(r1.shape, self.DROPOUT_P, dropout_rng)
        d1, drop_cache = dropout_forward(r1, self.DROPOUT_P, train, dropout_masks)
        pool, pool_cache = maxpool2_forward(d1)
        flat = pool.reshape(pool.shape[0], -1)
        h1, fc1_cache = linear_forward(flat, p["fc1_w"], p["fc1_b"])
        a1, a1_mask = relu_forward(h1)
        logits, fc2_cache = linear_forward(a1, p["fc2_w"], p["fc2_b"])
        cache = (conv_cache, r1_mask, drop_cache, pool_cache, pool.shape,
                 fc1_cache, a1_mask, fc2_cache)
        return logits, cache

    def backward(self, dlogits: np.ndarray, cache) -> dict[str, np.ndarray]:
        if cache is None:
            raise ValueError("backward requires the cache from a forward pass")
        (conv_cache, r1_mask, drop_cache, pool_cache, pool_shape,
         fc1_cache, a1_mask, fc2_cache) = cache
        grads: dict[str, np.ndarray] = {}
        da1, grads["fc2_w"], grads["fc2_b"] = linear_backward(dlogits, fc2_cache)
        dh1 = relu_backward(da1, a1_mask)
        dflat, grads["fc1_w"], grads["fc1_b"] = linear_backward(dh1, fc1_cache)
        dpool = dflat.reshape(pool_shape)
        dd1 = maxpool2_backward(dpool, pool_cache)
        dr1 = dropout_backward(dd1, drop_cache)
        dc1 = relu_backward(dr1, r1_mask)
        _, grads["conv_w"], grads["conv_b"] = conv2d_backward(dc1, conv_cache)
        return grads

    def loss_and_grads(self, x, labels, train=True, dropout_rng=None, dropout_masks=None):
        logits, cache = self.forward(x, train=train, dropout_rng=dropout_rng,
                                     dropout_masks=dropout_masks)
        loss, dlogits = softmax_cross_entropy(logits, labels)
        return loss, self.backward(dlogits, cache)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode argmax class per sample; ties resolve to the lowest index."""
        logits, _ = self.forward(x, train=False)
        return logits.argmax(axis=1)

    def clone_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        for k in self.params:
            self.params[k] = params[k].copy()


@dataclass
class AdamState:
    """Bias-corrected Adam over a parameter dict."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        if not self.m:
            self.m = {k: np.zeros_like(v) for k, v in params.items()}
            self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.step_count += 1
        t = self.step_count
        for k, p in params.items():
            g = grads[k]
            if g.shape != p.shape:
                raise ShapeError(f"gradient shape {g.shape} != param shape {p.shape} for {k}")
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            m_hat = self.m[k] / (1 - self.beta1**t)
            v_hat = self.v[k] / (1 - self.beta2**t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)
