"""LSTM with peepholes and a projection layer, dense or block-circulant weights.

One step computes, with ``*`` the elementwise product::

    i = sigmoid(W_ix x + W_ir y_prev + w_ic * c_prev + b_i)
    f = sigmoid(W_fx x + W_fr y_prev + w_fc * c_prev + b_f)
    g = sigmoid(W_cx x + W_cr y_prev + b_c)
    c = f * c_prev + g * i
    o = sigmoid(W_ox x + W_or y_prev + w_oc * c + b_o)
    m = o * tanh(c)
    y = W_ym m

The candidate ``g`` goes through the logistic function, not tanh. The
recurrence reads the projected output ``y``, so recurrent matrices are
``h x o``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import NamedTuple

import numpy as np

from swmnet.errors import DimensionError
from swmnet.nn_layers import sigmoid, tanh_act
from swmnet.structured_matrix import (
    BlockCirculantMatrix,
    apply_weights,
    project_dense_to_circulant,
    to_dense,
    weight_shape,
)

MATRIX_NAMES = ("W_ix", "W_ir", "W_fx", "W_fr", "W_cx", "W_cr", "W_ox", "W_or", "W_ym")
PEEPHOLE_NAMES = ("w_ic", "w_fc", "w_oc")
BIAS_NAMES = ("b_i", "b_f", "b_c", "b_o")


@dataclass
class LstmCellParams:
    W_ix: object
    W_ir: object
    W_fx: object
    W_fr: object
    W_cx: object
    W_cr: object
    W_ox: object
    W_or: object
    W_ym: object
    w_ic: np.ndarray
    w_fc: np.ndarray
    w_oc: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        for name in PEEPHOLE_NAMES + BIAS_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        for name in MATRIX_NAMES:
            W = getattr(self, name)
            if not isinstance(W, BlockCirculantMatrix):
                setattr(self, name, np.asarray(W, dtype=np.float64))
        self._check()

    @property
    def input_dim(self) -> int:
        return weight_shape(self.W_ix)[1]

    @property
    def hidden_dim(self) -> int:
        return weight_shape(self.W_ix)[0]

    @property
    def output_dim(self) -> int:
        return weight_shape(self.W_ym)[0]

    def _check(self):
        h, d, o = self.hidden_dim, self.input_dim, self.output_dim
        expected = {"W_ym": (o, h)}
        for gate in "ifco":
            expected[f"W_{gate}x"] = (h, d)
            expected[f"W_{gate}r"] = (h, o)
        for name, shape in expected.items():
            got = weight_shape(getattr(self, name))
            if got != shape:
                raise DimensionError(f"{name} must be {shape[0]}x{shape[1]}, got {got[0]}x{got[1]}")
        for name in PEEPHOLE_NAMES + BIAS_NAMES:
            if getattr(self, name).shape != (h,):
                raise DimensionError(f"{name} must have length {h}, got shape {getattr(self, name).shape}")

    def matrices(self) -> dict:
        return {name: getattr(self, name) for name in MATRIX_NAMES}


@dataclass(frozen=True)
class LstmState:
    c: np.ndarray
    y: np.ndarray


class CellTrace(NamedTuple):
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    c: np.ndarray
    o: np.ndarray
    m: np.ndarray
    y: np.ndarray


def zero_state(params: LstmCellParams) -> LstmState:
    return LstmState(c=np.zeros(params.hidden_dim), y=np.zeros(params.output_dim))


def lstm_cell_trace(params: LstmCellParams, x_t, prev: LstmState) -> CellTrace:
    """One step, returning every intermediate."""
    x_t = np.asarray(x_t, dtype=np.float64)
    c_prev = np.asarray(prev.c, dtype=np.float64)
    y_prev = np.asarray(prev.y, dtype=np.float64)
    if x_t.shape != (params.input_dim,):
        raise DimensionError(f"x_t must have length {params.input_dim}, got shape {x_t.shape}")
    if c_prev.shape != (params.hidden_dim,) or y_prev.shape != (params.output_dim,):
        raise DimensionError("previous state does not match the cell dimensions")

    def pre(Wx, Wr, bias):
        return apply_weights(Wx, x_t) + apply_weights(Wr, y_prev) + bias

    i = sigmoid(pre(params.W_ix, params.W_ir, params.b_i) + params.w_ic * c_prev)
    f = sigmoid(pre(params.W_fx, params.W_fr, params.b_f) + params.w_fc * c_prev)
    g = sigmoid(pre(params.W_cx, params.W_cr, params.b_c))
    c = f * c_prev + g * i
    o = sigmoid(pre(params.W_ox, params.W_or, params.b_o) + params.w_oc * c)
    m = o * tanh_act(c)
    y = apply_weights(params.W_ym, m)
    return CellTrace(i=i, f=f, g=g, c=c, o=o, m=m, y=y)


def lstm_cell_step(params: LstmCellParams, x_t, prev: LstmState | None = None) -> LstmState:
    if prev is None:
        prev = zero_state(params)
    tr = lstm_cell_trace(params, x_t, prev)
    return LstmState(c=tr.c, y=tr.y)


def lstm_sequence_forward(params: LstmCellParams, inputs, init: LstmState | None = None) -> np.ndarray:
    """Run the cell over ``inputs`` (``T x d``) and return the stacked outputs (``T x o``)."""
    state = zero_state(params) if init is None else init
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.size == 0:
        return np.zeros((0, params.output_dim))
    if inputs.ndim != 2 or inputs.shape[1] != params.input_dim:
        raise DimensionError(f"inputs must be T x {params.input_dim}, got shape {inputs.shape}")
    outputs = []
    for x_t in inputs:
        state = lstm_cell_step(params, x_t, state)
        outputs.append(state.y)
    return np.stack(outputs)


def structured_lstm_from_dense(params: LstmCellParams, k: int) -> LstmCellParams:
    """Project every weight matrix onto block-circulant form; peepholes and biases are copied."""
    projected = {
        name: project_dense_to_circulant(to_dense(W), k) for name, W in params.matrices().items()
    }
    return replace(params, **projected)


def dense_lstm(params: LstmCellParams) -> LstmCellParams:
    return replace(params, **{name: to_dense(W) for name, W in params.matrices().items()})


def random_lstm_params(d: int, h: int, o: int, rng: np.random.Generator, scale: float = 1.0) -> LstmCellParams:
    """Uniform random dense parameters in ``[-scale, scale]``."""
    def u(*shape):
        return rng.uniform(-scale, scale, size=shape)

    kw = {}
    for gate in "ifco":
        kw[f"W_{gate}x"] = u(h, d)
        kw[f"W_{gate}r"] = u(h, o)
    kw["W_ym"] = u(o, h)
    for name in PEEPHOLE_NAMES + BIAS_NAMES:
        kw[name] = u(h)
    return LstmCellParams(**kw)


def lstm_param_names() -> tuple[str, ...]:
    return tuple(f.name for f in fields(LstmCellParams))


@dataclass
class LstmLayer:
    """Model-level wrapper: a flat input of ``seq_len * d`` values in, ``seq_len * o`` out.

    The input is read row-major as a ``seq_len x d`` sequence starting from the
    zero state; the output is the stacked ``y_1 .. y_T`` flattened the same way.
    """

    params: LstmCellParams
    seq_len: int = 1

    def __post_init__(self):
        if self.seq_len < 1:
            raise DimensionError(f"seq_len must be >= 1, got {self.seq_len}")

    @property
    def structured(self) -> bool:
        return any(isinstance(W, BlockCirculantMatrix) for W in self.params.matrices().values())

    @property
    def in_features(self) -> int:
        return self.seq_len * self.params.input_dim

    @property
    def out_features(self) -> int:
        return self.seq_len * self.params.output_dim

    @property
    def stored_weights(self) -> int:
        total = 0
        for W in self.params.matrices().values():
            total += W.stored_weights if isinstance(W, BlockCirculantMatrix) else int(np.size(W))
        return total + 3 * self.params.hidden_dim

    def sequence(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.in_features,):
            raise DimensionError(f"lstm layer expects a flat input of length {self.in_features}, got {x.shape}")
        return x.reshape(self.seq_len, self.params.input_dim)

    def __call__(self, x):
        return lstm_sequence_forward(self.params, self.sequence(x)).ravel()
