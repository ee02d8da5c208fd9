"""Oracle-equivalence checks over a model, used by ``swmnet verify``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from swmnet.fft_core import fft, naive_dft
from swmnet.lstm import LstmLayer
from swmnet.model_io import Model, dense_reference, model_forward
from swmnet.nn_layers import FcLayer
from swmnet.structured_matrix import (
    BlockCirculantMatrix,
    expand_to_dense,
    matvec_direct,
    matvec_fft,
    relative_error,
)

MATVEC_TOL = 1e-9
FFT_TOL = 1e-10


@dataclass
class Check:
    name: str
    trials: int
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def _structured_matrices(model: Model):
    for i, layer in enumerate(model.layers):
        if isinstance(layer, FcLayer) and layer.structured:
            yield f"layer{i}.W", layer.weights
        elif isinstance(layer, LstmLayer):
            for name, W in layer.params.matrices().items():
                if isinstance(W, BlockCirculantMatrix):
                    yield f"layer{i}.{name}", W


def verify_model(model: Model, trials: int = 100, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks = []

    ks = sorted({W.k for _, W in _structured_matrices(model) if W.k >= 2})
    for k in ks:
        worst = 0.0
        for _ in range(trials):
            x = rng.uniform(-1, 1, k) + 1j * rng.uniform(-1, 1, k)
            worst = max(worst, relative_error(fft(x), naive_dft(x)))
        checks.append(Check(f"fft_vs_naive_dft[k={k}]", trials, worst, FFT_TOL))

    for name, W in _structured_matrices(model):
        dense = expand_to_dense(W)
        xs = rng.uniform(-1, 1, (trials, W.n))
        worst_direct = max(relative_error(matvec_fft(W, x), matvec_direct(W, x)) for x in xs)
        worst_dense = max(relative_error(matvec_fft(W, x), dense @ x) for x in xs)
        checks.append(Check(f"{name}:fft_vs_direct", trials, worst_direct, MATVEC_TOL))
        checks.append(Check(f"{name}:fft_vs_dense", trials, worst_dense, MATVEC_TOL))

    if model.layers:
        ref = dense_reference(model)
        worst = 0.0
        for _ in range(trials):
            x = rng.uniform(-1, 1, model.in_features)
            worst = max(worst, relative_error(model_forward(model, x), model_forward(ref, x)))
        checks.append(Check("model:fft_vs_dense_reference", trials, worst, MATVEC_TOL))
    return checks
