"""Layer-level forward passes: FC (structured or dense), activations, pooling, dense CONV.

Feature maps are plain ndarrays laid out ``(W, H, C)`` (width, height, channels).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from swmnet.errors import DimensionError
from swmnet.structured_matrix import BlockCirculantMatrix, apply_weights, matvec_fft, weight_shape


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    # split by sign so exp never overflows
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def tanh_act(x):
    return np.tanh(np.asarray(x, dtype=np.float64))


def identity(x):
    return np.asarray(x, dtype=np.float64)


ACTIVATIONS = {
    "relu": relu,
    "sigmoid": sigmoid,
    "tanh": tanh_act,
    "identity": identity,
}


def get_activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; expected one of {sorted(ACTIVATIONS)}") from None


@dataclass
class FcLayer:
    """``y = activation(W x + bias)``; ``weights`` is dense or block-circulant."""

    weights: object
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.bias = np.asarray(self.bias, dtype=np.float64)
        m, _ = weight_shape(self.weights)
        if self.bias.shape != (m,):
            raise DimensionError(f"bias must have length {m}, got shape {self.bias.shape}")
        get_activation(self.activation)

    @property
    def structured(self) -> bool:
        return isinstance(self.weights, BlockCirculantMatrix)

    @property
    def in_features(self) -> int:
        return weight_shape(self.weights)[1]

    @property
    def out_features(self) -> int:
        return weight_shape(self.weights)[0]

    @property
    def stored_weights(self) -> int:
        if self.structured:
            return self.weights.stored_weights
        return int(np.size(self.weights))

    def __call__(self, x):
        if self.structured:
            return fc_forward_structured(self, x)
        return fc_forward_dense(self.weights, self.bias, self.activation, x)


def fc_forward_structured(layer: FcLayer, x) -> np.ndarray:
    if not layer.structured:
        raise TypeError("fc_forward_structured needs a BlockCirculantMatrix layer")
    return get_activation(layer.activation)(matvec_fft(layer.weights, x) + layer.bias)


def fc_forward_dense(weights, bias, activation: str, x) -> np.ndarray:
    return get_activation(activation)(apply_weights(weights, x) + np.asarray(bias, dtype=np.float64))


def max_pool_2d(fmap, window: int = 2, stride: int = 2) -> np.ndarray:
    """Per-channel max pooling; ragged edges are padded with ``-inf``."""
    fmap = np.asarray(fmap, dtype=np.float64)
    if fmap.ndim != 3 or min(fmap.shape) < 1:
        raise DimensionError(f"feature map must be (W, H, C) with all dims >= 1, got {fmap.shape}")
    if window < 1 or stride < 1:
        raise ValueError("window and stride must be positive")
    W, H, C = fmap.shape
    out_w = max(1, -(-(W - window) // stride) + 1)
    out_h = max(1, -(-(H - window) // stride) + 1)
    need_w = (out_w - 1) * stride + window
    need_h = (out_h - 1) * stride + window
    padded = np.full((need_w, need_h, C), -np.inf)
    padded[:W, :H] = fmap
    out = np.full((out_w, out_h, C), -np.inf)
    for di in range(window):
        for dj in range(window):
            view = padded[di : di + (out_w - 1) * stride + 1 : stride, dj : dj + (out_h - 1) * stride + 1 : stride]
            np.maximum(out, view, out=out)
    return out


def conv2d_dense_reference(fmap, kernels) -> np.ndarray:
    """Valid, stride-1 convolution ``Y[x, y, p] = sum F[i, j, c, p] X[x+i, y+j, c]``.

    ``kernels`` is shaped ``(r, r, C, P)``; the output is ``(W-r+1, H-r+1, P)``.
    """
    X = np.asarray(fmap, dtype=np.float64)
    F = np.asarray(kernels, dtype=np.float64)
    if X.ndim != 3 or F.ndim != 4:
        raise DimensionError("expected input (W, H, C) and kernels (r, r, C, P)")
    W, H, C = X.shape
    r, r2, kc, P = F.shape
    if r != r2 or kc != C:
        raise DimensionError(f"kernel shape {F.shape} incompatible with input {X.shape}")
    if r > W or r > H:
        raise DimensionError(f"kernel size {r} larger than input {W}x{H}")
    out = np.zeros((W - r + 1, H - r + 1, P))
    for i in range(r):
        for j in range(r):
            out += X[i : i + W - r + 1, j : j + H - r + 1, :] @ F[i, j]
    return out


@dataclass
class MaxPoolLayer:
    """Max pooling over a flat input reshaped row-major to ``input_shape`` ``(W, H, C)``."""

    input_shape: tuple[int, int, int]
    window: int = 2
    stride: int = 2

    def __post_init__(self):
        self.input_shape = tuple(int(d) for d in self.input_shape)
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise DimensionError(f"input_shape must be (W, H, C) with dims >= 1, got {self.input_shape}")

    @property
    def in_features(self) -> int:
        return int(np.prod(self.input_shape))

    @property
    def output_shape(self) -> tuple[int, int, int]:
        return max_pool_2d(np.zeros(self.input_shape), self.window, self.stride).shape

    @property
    def out_features(self) -> int:
        return int(np.prod(self.output_shape))

    stored_weights = 0

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.in_features,):
            raise DimensionError(f"maxpool expects a flat input of length {self.in_features}, got {x.shape}")
        return max_pool_2d(x.reshape(self.input_shape), self.window, self.stride).ravel()
