"""Bit-accurate signed fixed-point simulator for quantized inference.

Values are held as integer codes ``v * 2**frac_bits`` in ``total_bits``-bit
two's complement. Every rounding step is round-half-to-even and every
overflow saturates; nothing ever wraps.

Matrix-vector products accumulate exact integer products in a wide
accumulator (``2*W + ceil(log2 n)`` bits, which cannot overflow) and are
rescaled once at the end, like a hardware MAC array. Structured layers are
evaluated through their time-domain expansion. Sigmoid and tanh are modelled
as a lookup table: the exact function of the dequantized input, requantized.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from swmnet.errors import DimensionError
from swmnet.lstm import LstmLayer
from swmnet.nn_layers import FcLayer, MaxPoolLayer, get_activation, max_pool_2d
from swmnet.structured_matrix import BlockCirculantMatrix, _circulant_index


@dataclass(frozen=True)
class FixedPointFormat:
    total_bits: int
    frac_bits: int

    def __post_init__(self):
        if not 2 <= self.total_bits <= 32:
            raise ValueError(f"total_bits must be in [2, 32], got {self.total_bits}")
        if not 0 <= self.frac_bits < self.total_bits:
            raise ValueError(f"frac_bits must be in [0, {self.total_bits - 1}], got {self.frac_bits}")

    signed = True

    @property
    def max_code(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def min_code(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def max_value(self) -> float:
        return self.max_code * self.resolution

    @property
    def min_value(self) -> float:
        return self.min_code * self.resolution

    def __str__(self) -> str:
        return f"{self.total_bits}x{self.frac_bits}"


# total widths used by the FPGA designs; the integer/fraction split is our choice
DCNN_12 = FixedPointFormat(12, 8)
LSTM_16 = FixedPointFormat(16, 12)

_FORMAT_RE = re.compile(r"^[WwQq]?(\d+)(?:[xX.:]|[xX]?[Ff])(\d+)$")


def parse_format(text: str) -> FixedPointFormat:
    """Parse ``"16x8"``, ``"W16F8"``, ``"W16xF8"`` or ``"Q16.8"`` (total bits, fraction bits)."""
    m = _FORMAT_RE.match(text.strip())
    if not m:
        raise ValueError(f"cannot parse fixed-point format {text!r}; expected e.g. 16x8")
    return FixedPointFormat(int(m.group(1)), int(m.group(2)))


@dataclass(frozen=True)
class QuantizedTensor:
    format: FixedPointFormat
    raw: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.raw.shape

    def dequantize(self) -> np.ndarray:
        return np.ldexp(self.raw.astype(np.float64), -self.format.frac_bits)

    def __float__(self) -> float:
        return float(self.dequantize())


def saturate(codes, fmt: FixedPointFormat) -> np.ndarray:
    codes = np.asarray(codes)
    return np.where(codes > fmt.max_code, fmt.max_code, np.where(codes < fmt.min_code, fmt.min_code, codes))


def _fits_int64(bits: int) -> bool:
    return bits <= 62


def _to_int(codes: np.ndarray) -> np.ndarray:
    if codes.dtype == object:
        return codes.astype(np.int64)
    return codes.astype(np.int64, copy=False)


def quantize(v, fmt: FixedPointFormat) -> QuantizedTensor:
    """Round ``v * 2**F`` half-to-even, then saturate to the format's range."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot quantize non-finite values")
    scaled = np.rint(np.ldexp(v, fmt.frac_bits))
    scaled = np.clip(scaled, fmt.min_code, fmt.max_code)
    return QuantizedTensor(fmt, scaled.astype(np.int64))


def _as_quantized(a, fmt: FixedPointFormat) -> QuantizedTensor:
    if isinstance(a, QuantizedTensor):
        if a.format != fmt:
            raise ValueError(f"operand format {a.format} does not match {fmt}")
        return a
    return quantize(a, fmt)


def round_shift(values, shift: int):
    """Arithmetic right shift by ``shift`` bits, rounding half to even.

    Works on int64 and on object (Python int) arrays.
    """
    if shift == 0:
        return values
    values = np.asarray(values)
    q = values >> shift
    rem = values - (q << shift)
    half = 1 << (shift - 1)
    up = (rem > half) | ((rem == half) & ((q & 1) == 1))
    return q + up.astype(values.dtype if values.dtype != object else np.int64)


def q_add(a, b, fmt: FixedPointFormat) -> QuantizedTensor:
    qa, qb = _as_quantized(a, fmt), _as_quantized(b, fmt)
    return QuantizedTensor(fmt, saturate(qa.raw + qb.raw, fmt).astype(np.int64))


def q_mul(a, b, fmt: FixedPointFormat) -> QuantizedTensor:
    qa, qb = _as_quantized(a, fmt), _as_quantized(b, fmt)
    prod = qa.raw.astype(np.int64) * qb.raw.astype(np.int64)  # |prod| <= 2**62
    return QuantizedTensor(fmt, saturate(round_shift(prod, fmt.frac_bits), fmt).astype(np.int64))


def q_linear(weight_codes: np.ndarray, x_codes: np.ndarray, bias_codes, fmt: FixedPointFormat) -> np.ndarray:
    """``saturate(round((W x + b * 2**F) / 2**F))`` with an exact wide accumulator."""
    n = weight_codes.shape[1]
    if x_codes.shape != (n,):
        raise DimensionError(f"expected input of length {n}, got shape {x_codes.shape}")
    acc_bits = 2 * fmt.total_bits + max(1, math.ceil(math.log2(n + 1)))
    dtype = np.int64 if _fits_int64(acc_bits) else object
    W = weight_codes.astype(dtype)
    x = x_codes.astype(dtype)
    acc = W @ x
    if bias_codes is not None:
        acc = acc + (np.asarray(bias_codes).astype(dtype) << fmt.frac_bits)
    return _to_int(saturate(round_shift(acc, fmt.frac_bits), fmt))


def quantized_weight_codes(W, fmt: FixedPointFormat) -> np.ndarray:
    """Integer codes of the logical dense matrix; circulant blocks are expanded after quantization."""
    if isinstance(W, BlockCirculantMatrix):
        codes = quantize(W.vectors, fmt).raw[:, :, _circulant_index(W.k)]
        dense = codes.transpose(0, 2, 1, 3).reshape(W.p * W.k, W.q * W.k)
        return dense[: W.m, : W.n]
    return quantize(W, fmt).raw


def q_activation(codes: np.ndarray, name: str, fmt: FixedPointFormat) -> np.ndarray:
    if name == "identity":
        return codes
    if name == "relu":
        return np.maximum(codes, 0)
    x = np.ldexp(codes.astype(np.float64), -fmt.frac_bits)
    return quantize(get_activation(name)(x), fmt).raw


@dataclass
class QuantizedRun:
    output: QuantizedTensor
    reference: np.ndarray
    max_abs_deviation: float


def _q_fc(layer: FcLayer, x_codes: np.ndarray, fmt: FixedPointFormat) -> np.ndarray:
    W = quantized_weight_codes(layer.weights, fmt)
    b = quantize(layer.bias, fmt).raw
    return q_activation(q_linear(W, x_codes, b, fmt), layer.activation, fmt)


def quantized_fc_forward(layer: FcLayer, x, fmt: FixedPointFormat) -> QuantizedRun:
    """Run one FC layer entirely in fixed point and compare with the float path."""
    x = np.asarray(x, dtype=np.float64)
    out = QuantizedTensor(fmt, _q_fc(layer, quantize(x, fmt).raw, fmt))
    ref = layer(x)
    dev = float(np.max(np.abs(out.dequantize() - ref), initial=0.0))
    return QuantizedRun(out, ref, dev)


def _q_lstm(layer: LstmLayer, x_codes: np.ndarray, fmt: FixedPointFormat) -> np.ndarray:
    p = layer.params
    W = {name: quantized_weight_codes(M, fmt) for name, M in p.matrices().items()}
    vec = {name: quantize(getattr(p, name), fmt).raw for name in ("w_ic", "w_fc", "w_oc", "b_i", "b_f", "b_c", "b_o")}
    seq = x_codes.reshape(layer.seq_len, p.input_dim)
    c = np.zeros(p.hidden_dim, dtype=np.int64)
    y = np.zeros(p.output_dim, dtype=np.int64)

    def add(*terms):
        total = terms[0]
        for t in terms[1:]:
            total = saturate(total + t, fmt)
        return total

    def mul(a, b):
        return q_mul(QuantizedTensor(fmt, a), QuantizedTensor(fmt, b), fmt).raw

    outputs = []
    for x_t in seq:
        def gate(gx, gr, bias, peep=None):
            pre = add(q_linear(W[gx], x_t, vec[bias], fmt), q_linear(W[gr], y, None, fmt))
            return pre if peep is None else add(pre, peep)

        i = q_activation(gate("W_ix", "W_ir", "b_i", mul(vec["w_ic"], c)), "sigmoid", fmt)
        f = q_activation(gate("W_fx", "W_fr", "b_f", mul(vec["w_fc"], c)), "sigmoid", fmt)
        g = q_activation(gate("W_cx", "W_cr", "b_c"), "sigmoid", fmt)
        c = add(mul(f, c), mul(g, i))
        o = q_activation(gate("W_ox", "W_or", "b_o", mul(vec["w_oc"], c)), "sigmoid", fmt)
        m = mul(o, q_activation(c, "tanh", fmt))
        y = q_linear(W["W_ym"], m, None, fmt)
        outputs.append(y)
    return np.concatenate(outputs)


def quantized_layer_forward(layer, x_codes: np.ndarray, fmt: FixedPointFormat) -> np.ndarray:
    if isinstance(layer, FcLayer):
        return _q_fc(layer, x_codes, fmt)
    if isinstance(layer, LstmLayer):
        return _q_lstm(layer, x_codes, fmt)
    if isinstance(layer, MaxPoolLayer):
        if x_codes.shape != (layer.in_features,):
            raise DimensionError(f"maxpool expects a flat input of length {layer.in_features}")
        pooled = max_pool_2d(x_codes.reshape(layer.input_shape).astype(np.float64), layer.window, layer.stride)
        return pooled.ravel().astype(np.int64)
    raise TypeError(f"unsupported layer type {type(layer).__name__}")


def quantized_forward(layers, x, fmt: FixedPointFormat) -> QuantizedTensor:
    codes = quantize(x, fmt).raw
    for layer in layers:
        codes = quantized_layer_forward(layer, codes, fmt)
    return QuantizedTensor(fmt, codes)


@dataclass
class SweepRow:
    format: FixedPointFormat
    max_abs_deviation: float
    stored_weights: int
    storage_bits: int


def quantization_sweep(layers, formats, x) -> list[SweepRow]:
    """End-to-end output deviation from the float path for each format."""
    layers = list(layers)
    x = np.asarray(x, dtype=np.float64)
    ref = x
    for layer in layers:
        ref = layer(ref)
    stored = sum(layer.stored_weights for layer in layers)
    rows = []
    for fmt in formats:
        out = quantized_forward(layers, x, fmt).dequantize()
        dev = float(np.max(np.abs(out - ref), initial=0.0))
        rows.append(SweepRow(fmt, dev, stored, stored * fmt.total_bits))
    return rows
