from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swmnet.fixed_point import (
    DCNN_12,
    LSTM_16,
    FixedPointFormat,
    QuantizedTensor,
    parse_format,
    q_add,
    q_linear,
    q_mul,
    quantization_sweep,
    quantize,
    quantized_fc_forward,
    quantized_forward,
    round_shift,
)
from swmnet.lstm import LstmLayer, random_lstm_params, structured_lstm_from_dense
from swmnet.nn_layers import FcLayer, MaxPoolLayer
from swmnet.structured_matrix import from_defining_vectors


def exact_code(v, fmt):
    """Round-half-even of v * 2**F in exact rationals, then saturate."""
    scaled = Fraction(v) * (1 << fmt.frac_bits)
    floor = scaled.numerator // scaled.denominator
    rem = scaled - floor
    code = floor + (1 if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and floor % 2) else 0)
    return max(fmt.min_code, min(fmt.max_code, code))


formats = st.builds(lambda w, f: FixedPointFormat(w, min(f, w - 1)), st.integers(2, 32), st.integers(0, 31))


def test_format_properties():
    f = FixedPointFormat(8, 4)
    assert (f.min_code, f.max_code, f.resolution) == (-128, 127, 1 / 16)
    assert f.max_value == 7.9375 and f.min_value == -8.0
    with pytest.raises(ValueError):
        FixedPointFormat(33, 0)
    with pytest.raises(ValueError):
        FixedPointFormat(8, 8)


def test_presets_bit_widths():
    assert DCNN_12.total_bits == 12
    assert LSTM_16.total_bits == 16


@pytest.mark.parametrize("text", ["16x8", "W16F8", "W16xF8", "Q16.8"])
def test_parse_format(text):
    assert parse_format(text) == FixedPointFormat(16, 8)


def test_parse_format_rejects_garbage():
    with pytest.raises(ValueError):
        parse_format("sixteen")


def test_quantize_examples():
    q = quantize(3.14159, FixedPointFormat(16, 8))
    assert int(q.raw) == 804 == exact_code(3.14159, FixedPointFormat(16, 8))
    assert float(q) == 3.140625
    assert float(quantize(100.0, FixedPointFormat(8, 4))) == 127 / 16
    for w, f in [(2, 0), (12, 8), (32, 20)]:
        assert float(quantize(0.0, FixedPointFormat(w, f))) == 0.0


def test_quantize_ties_to_even():
    f = FixedPointFormat(8, 0)
    assert quantize([0.5, 1.5, 2.5, -0.5, -1.5, -2.5], f).raw.tolist() == [0, 2, 2, 0, -2, -2]


@given(st.floats(-1e4, 1e4, allow_nan=False), formats)
def test_quantize_matches_exact_rational(v, fmt):
    assert int(quantize(v, fmt).raw) == exact_code(v, fmt)


@given(st.floats(-1e12, 1e12, allow_nan=False), formats)
def test_saturation_never_wraps(v, fmt):
    code = int(quantize(v, fmt).raw)
    assert fmt.min_code <= code <= fmt.max_code
    if v >= fmt.max_value:
        assert code == fmt.max_code
    if v <= fmt.min_value:
        assert code == fmt.min_code
    # sign is preserved (no wraparound) unless the value rounds to zero
    if code != 0:
        assert (code > 0) == (v > 0)


def test_q_mul_examples():
    f = FixedPointFormat(16, 8)
    r = q_mul(1.5, 1.5, f)
    assert int(r.raw) == 576 == (384 * 384) >> 8
    assert float(r) == 2.25
    for x in (0.3, -2.71, 100.0, -127.99):
        assert int(q_mul(1.0, x, f).raw) == int(quantize(x, f).raw)


def test_q_add_saturates():
    f = FixedPointFormat(4, 2)
    assert float(q_add(1.75, 1.75, f)) == 1.75
    assert float(q_add(-2.0, -2.0, f)) == -2.0


@given(st.integers(-(2 ** 40), 2 ** 40), st.integers(1, 20))
def test_round_shift_matches_exact(v, s):
    exact = Fraction(v, 1 << s)
    floor = exact.numerator // exact.denominator
    rem = exact - floor
    expected = floor + (1 if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and floor % 2) else 0)
    assert int(round_shift(np.array([v]), s)[0]) == expected
    assert int(round_shift(np.array([v], dtype=object), s)[0]) == expected


@given(st.integers(-(2 ** 15), 2 ** 15 - 1), st.integers(-(2 ** 15), 2 ** 15 - 1), st.integers(0, 15))
def test_q_mul_matches_exact(a, b, f):
    fmt = FixedPointFormat(16, f)
    qa, qb = QuantizedTensor(fmt, np.int64(a)), QuantizedTensor(fmt, np.int64(b))
    exact = Fraction(a * b, 1 << f)
    floor = exact.numerator // exact.denominator
    rem = exact - floor
    code = floor + (1 if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and floor % 2) else 0)
    assert int(q_mul(qa, qb, fmt).raw) == max(fmt.min_code, min(fmt.max_code, code))


@given(st.lists(st.integers(-100, 100), min_size=3, max_size=3))
def test_q_add_associative_without_saturation(codes):
    fmt = FixedPointFormat(16, 4)
    a, b, c = (QuantizedTensor(fmt, np.int64(v)) for v in codes)
    assert int(q_add(q_add(a, b, fmt), c, fmt).raw) == int(q_add(a, q_add(b, c, fmt), fmt).raw)


def test_q_linear_wide_accumulator_is_exact(rng):
    # 32-bit codes overflow int64 products sums; the object path must stay exact
    fmt = FixedPointFormat(32, 20)
    W = rng.integers(fmt.min_code // 4, fmt.max_code // 4, (3, 300))
    x = rng.integers(fmt.min_code // 4, fmt.max_code // 4, 300)
    got = q_linear(W, x, None, fmt)
    for r in range(3):
        exact = Fraction(sum(int(W[r, c]) * int(x[c]) for c in range(300)), 1 << 20)
        floor = exact.numerator // exact.denominator
        rem = exact - floor
        code = floor + (1 if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and floor % 2) else 0)
        assert int(got[r]) == max(fmt.min_code, min(fmt.max_code, code))


def test_round_trip_error_bound_1e5(rng):
    for fmt in (FixedPointFormat(8, 4), DCNN_12, LSTM_16, FixedPointFormat(32, 20)):
        v = rng.uniform(fmt.min_value, fmt.max_value, 100_000)
        err = np.abs(quantize(v, fmt).dequantize() - v)
        assert np.max(err) <= 2.0 ** (-fmt.frac_bits - 1)


def test_grid_values_round_trip_losslessly(rng):
    fmt = FixedPointFormat(12, 5)
    codes = rng.integers(fmt.min_code, fmt.max_code + 1, 1000)
    v = codes / 32.0
    assert quantize(v, fmt).raw.tolist() == codes.tolist()


def test_round_trip_error_monotone_in_frac_bits(rng):
    headroom = 4
    v = rng.uniform(-7.9, 7.9, 10_000)
    errors = [np.max(np.abs(quantize(v, FixedPointFormat(headroom + f, f)).dequantize() - v)) for f in range(0, 28)]
    assert all(b <= a for a, b in zip(errors, errors[1:]))


def random_fc(rng, m, n, k=None, act="relu"):
    bound = 1 / np.sqrt(n)
    if k is None:
        W = rng.uniform(-bound, bound, (m, n))
    else:
        W = from_defining_vectors(rng.uniform(-bound, bound, (m // k, n // k, k)), m, n, k)
    return FcLayer(W, rng.uniform(-bound, bound, m), act)


def test_wide_format_fc_deviation(rng):
    for k in (None, 8):
        run = quantized_fc_forward(random_fc(rng, 32, 64, k, "tanh"), rng.uniform(-1, 1, 64), FixedPointFormat(32, 20))
        assert run.max_abs_deviation < 1e-4


def test_identity_layer_on_grid_is_exact():
    fmt = FixedPointFormat(16, 8)
    layer = FcLayer(np.eye(4), np.zeros(4), "identity")
    x = np.array([1.5, -2.25, 0.00390625, 3.0])
    run = quantized_fc_forward(layer, x, fmt)
    assert run.max_abs_deviation == 0.0
    structured = FcLayer(from_defining_vectors([[[1, 0, 0, 0]]], 4, 4, 4), np.zeros(4), "identity")
    assert quantized_fc_forward(structured, x, fmt).max_abs_deviation == 0.0


def test_fc_deviation_monotone_in_frac_bits(rng):
    layer = random_fc(rng, 64, 64, 16, "identity")
    x = rng.uniform(-1, 1, 64)
    devs = [quantized_fc_forward(layer, x, FixedPointFormat(f + 6, f)).max_abs_deviation for f in range(2, 15)]
    assert all(b <= a for a, b in zip(devs, devs[1:])), devs


def test_quantized_lstm_and_pool_converge(rng):
    p = structured_lstm_from_dense(random_lstm_params(8, 8, 8, rng, scale=0.3), 4)
    layers = [LstmLayer(p, seq_len=2), MaxPoolLayer((2, 2, 4))]
    x = rng.uniform(-1, 1, 16)
    ref = layers[1](layers[0](x))
    out = quantized_forward(layers, x, FixedPointFormat(32, 20)).dequantize()
    assert np.max(np.abs(out - ref)) < 1e-4


def test_sweep_rows_and_storage(rng):
    layers = [random_fc(rng, 64, 64, 16), random_fc(rng, 10, 64, None, "identity")]
    stored = 64 * 64 // 16 + 640
    rows = quantization_sweep(layers, [DCNN_12, LSTM_16], rng.uniform(-1, 1, 64))
    assert [r.storage_bits for r in rows] == [12 * stored, 16 * stored]
    assert rows[1].max_abs_deviation <= rows[0].max_abs_deviation
    single = quantization_sweep(layers, [DCNN_12], rng.uniform(-1, 1, 64))
    assert len(single) == 1
