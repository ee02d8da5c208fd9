"""Models: layer stacks, the JSON model file format, random generation and conversion.

File layout (``format_version`` 1)::

    {"format": "swmnet-model", "format_version": 1,
     "quantization": null | {"total_bits": 12, "frac_bits": 8},
     "layers": [
       {"type": "fc_swm", "in": 512, "out": 512, "k": 64, "activation": "relu",
        "weights": <p x q x k nested lists>, "bias": [...]},
       {"type": "fc_dense", "in": 64, "out": 10, "activation": "identity",
        "weights": <out x in nested lists>, "bias": [...]},
       {"type": "lstm", "input_dim": d, "hidden_dim": h, "output_dim": o,
        "seq_len": T, "k": 8,            # k only when structured
        "weights": {"W_ix": ..., ...}, "peepholes": {"w_ic": ...}, "biases": {"b_i": ...}},
       {"type": "maxpool", "input_shape": [W, H, C], "window": 2, "stride": 2}]}

Weights are stored in the time domain as decimal floats with round-trip
precision; spectra are recomputed when a model is loaded.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from swmnet.errors import DimensionError, ModelFormatError, ModelVersionError, ParseError, SizeError
from swmnet.fixed_point import FixedPointFormat, quantized_forward
from swmnet.fft_core import is_power_of_two
from swmnet.lstm import (
    BIAS_NAMES,
    MATRIX_NAMES,
    PEEPHOLE_NAMES,
    LstmCellParams,
    LstmLayer,
    dense_lstm,
    structured_lstm_from_dense,
)
from swmnet.nn_layers import ACTIVATIONS, FcLayer, MaxPoolLayer
from swmnet.perf_model import count_dense_fc, count_swm_fc
from swmnet.structured_matrix import (
    BlockCirculantMatrix,
    expand_to_dense,
    from_defining_vectors,
    precompute_spectra,
    project_dense_to_circulant,
    to_dense,
)

FORMAT_NAME = "swmnet-model"
FORMAT_VERSION = 1

CANONICAL_SPEC = "512x512:64,512x512:64,512x64:64,64x10"


@dataclass
class Model:
    layers: list = field(default_factory=list)
    quantization: FixedPointFormat | None = None

    def __post_init__(self):
        for i in range(1, len(self.layers)):
            prev, cur = self.layers[i - 1], self.layers[i]
            if prev.out_features != cur.in_features:
                raise DimensionError(
                    f"layer {i - 1} emits {prev.out_features} values but layer {i} expects {cur.in_features}"
                )

    @property
    def in_features(self) -> int | None:
        return self.layers[0].in_features if self.layers else None

    @property
    def out_features(self) -> int | None:
        return self.layers[-1].out_features if self.layers else None

    @property
    def stored_weights(self) -> int:
        return sum(layer.stored_weights for layer in self.layers)

    def __call__(self, x):
        return model_forward(self, x)


def model_forward(model: Model, x) -> np.ndarray:
    """Float inference; structured layers take the FFT path."""
    x = np.asarray(x, dtype=np.float64)
    for layer in model.layers:
        x = layer(x)
    return x


def dense_reference(model: Model) -> Model:
    """The same model with every structured matrix expanded to dense."""
    layers = []
    for layer in model.layers:
        if isinstance(layer, FcLayer) and layer.structured:
            layer = FcLayer(expand_to_dense(layer.weights), layer.bias.copy(), layer.activation)
        elif isinstance(layer, LstmLayer) and layer.structured:
            layer = LstmLayer(dense_lstm(layer.params), layer.seq_len)
        layers.append(layer)
    return Model(layers, model.quantization)


# -- op counts ---------------------------------------------------------------

def _matrix_mults(W) -> int:
    m, n = W.shape if isinstance(W, BlockCirculantMatrix) else np.shape(W)
    if isinstance(W, BlockCirculantMatrix):
        return count_swm_fc(m, n, W.k).real_mults
    return count_dense_fc(m, n).real_mults


def layer_real_mults(layer) -> int:
    if isinstance(layer, FcLayer):
        return _matrix_mults(layer.weights)
    if isinstance(layer, LstmLayer):
        per_step = sum(_matrix_mults(W) for W in layer.params.matrices().values())
        # peephole products and the c/m elementwise products
        per_step += 7 * layer.params.hidden_dim
        return per_step * layer.seq_len
    return 0


def layer_type(layer) -> str:
    if isinstance(layer, FcLayer):
        return "fc_swm" if layer.structured else "fc_dense"
    if isinstance(layer, LstmLayer):
        return "lstm"
    if isinstance(layer, MaxPoolLayer):
        return "maxpool"
    raise TypeError(f"unsupported layer {type(layer).__name__}")


def layer_k(layer) -> int | None:
    if isinstance(layer, FcLayer) and layer.structured:
        return layer.weights.k
    if isinstance(layer, LstmLayer) and layer.structured:
        return layer.params.W_ix.k
    return None


# -- run report ----------------------------------------------------------------

@dataclass
class LayerRun:
    index: int
    type: str
    in_features: int
    out_features: int
    k: int | None
    stored_weights: int
    real_mults: int
    seconds: float


@dataclass
class RunReport:
    layers: list[LayerRun]
    output: np.ndarray
    class_index: int | None
    total_seconds: float
    total_real_mults: int
    total_stored_weights: int
    quantization: FixedPointFormat | None = None
    max_abs_deviation: float | None = None

    def to_dict(self) -> dict:
        return {
            "layers": [dict(r.__dict__) for r in self.layers],
            "output": [float(v) for v in self.output],
            "class_index": self.class_index,
            "total_seconds": self.total_seconds,
            "total_real_mults": self.total_real_mults,
            "total_stored_weights": self.total_stored_weights,
            "quantization": str(self.quantization) if self.quantization else None,
            "max_abs_deviation": self.max_abs_deviation,
        }


def run_model(model: Model, x, fmt: FixedPointFormat | None = None) -> RunReport:
    """Float inference with per-layer timing; with ``fmt`` the output is the fixed-point run."""
    x = np.asarray(x, dtype=np.float64)
    if model.layers and x.shape != (model.in_features,):
        raise DimensionError(f"model expects {model.in_features} inputs, got {x.size}")
    rows = []
    h = x
    for i, layer in enumerate(model.layers):
        t0 = time.perf_counter()
        h = layer(h)
        dt = time.perf_counter() - t0
        rows.append(LayerRun(i, layer_type(layer), layer.in_features, layer.out_features, layer_k(layer),
                             layer.stored_weights, layer_real_mults(layer), dt))
    output, deviation = h, None
    if fmt is not None:
        output = quantized_forward(model.layers, x, fmt).dequantize()
        deviation = float(np.max(np.abs(output - h), initial=0.0))
    return RunReport(
        layers=rows,
        output=output,
        class_index=int(np.argmax(output)) if output.size else None,
        total_seconds=sum(r.seconds for r in rows),
        total_real_mults=sum(r.real_mults for r in rows),
        total_stored_weights=sum(r.stored_weights for r in rows),
        quantization=fmt,
        max_abs_deviation=deviation,
    )


# -- serialization ---------------------------------------------------------------

def _matrix_to_obj(W):
    return (W.vectors if isinstance(W, BlockCirculantMatrix) else np.asarray(W)).tolist()


def layer_to_dict(layer) -> dict:
    kind = layer_type(layer)
    if kind in ("fc_swm", "fc_dense"):
        d = {"type": kind, "in": layer.in_features, "out": layer.out_features}
        if kind == "fc_swm":
            d["k"] = layer.weights.k
        d["activation"] = layer.activation
        d["weights"] = _matrix_to_obj(layer.weights)
        d["bias"] = layer.bias.tolist()
        return d
    if kind == "lstm":
        p = layer.params
        d = {"type": "lstm", "input_dim": p.input_dim, "hidden_dim": p.hidden_dim,
             "output_dim": p.output_dim, "seq_len": layer.seq_len}
        if layer.structured:
            d["k"] = layer_k(layer)
        d["weights"] = {name: _matrix_to_obj(getattr(p, name)) for name in MATRIX_NAMES}
        d["peepholes"] = {name: getattr(p, name).tolist() for name in PEEPHOLE_NAMES}
        d["biases"] = {name: getattr(p, name).tolist() for name in BIAS_NAMES}
        return d
    return {"type": "maxpool", "input_shape": list(layer.input_shape), "window": layer.window,
            "stride": layer.stride}


def model_to_dict(model: Model) -> dict:
    q = model.quantization
    return {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "quantization": None if q is None else {"total_bits": q.total_bits, "frac_bits": q.frac_bits},
        "layers": [layer_to_dict(layer) for layer in model.layers],
    }


def dumps_model(model: Model) -> str:
    return json.dumps(model_to_dict(model), indent=1, allow_nan=False) + "\n"


def save_model(model: Model, path) -> None:
    Path(path).write_text(dumps_model(model))


class _Fields:
    """Typed accessors over a JSON object that report the offending field path."""

    def __init__(self, obj, where: str):
        if not isinstance(obj, dict):
            raise ModelFormatError(f"{where}: expected an object, got {type(obj).__name__}")
        self.obj = obj
        self.where = where

    def path(self, key: str) -> str:
        return f"{self.where}.{key}" if self.where else key

    def get(self, key: str, optional: bool = False):
        if key not in self.obj:
            if optional:
                return None
            raise ModelFormatError(f"{self.path(key)}: missing field")
        return self.obj[key]

    def int(self, key: str, optional: bool = False, minimum: int = 1):
        v = self.get(key, optional)
        if v is None and optional:
            return None
        if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
            raise ModelFormatError(f"{self.path(key)}: expected an integer >= {minimum}, got {v!r}")
        return v

    def array(self, key: str, shape: tuple, value=None):
        v = self.obj.get(key) if value is None else value
        if v is None:
            raise ModelFormatError(f"{self.path(key)}: missing field")
        try:
            arr = np.array(v, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ModelFormatError(f"{self.path(key)}: not a rectangular array of numbers ({exc})") from None
        if arr.shape != shape:
            raise ModelFormatError(f"{self.path(key)}: expected shape {shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ModelFormatError(f"{self.path(key)}: contains non-finite values")
        return arr


def _check_k(f: _Fields) -> int:
    k = f.int("k")
    if not is_power_of_two(k):
        raise ModelFormatError(f"{f.path('k')}: block size must be a power of two, got {k}")
    return k


def _matrix_from_obj(f: _Fields, key: str, value, m: int, n: int, k: int | None):
    if k is None:
        return f.array(key, (m, n), value)
    shape = (-(-m // k), -(-n // k), k)
    return precompute_spectra(from_defining_vectors(f.array(key, shape, value), m, n, k))


def layer_from_dict(obj, where: str):
    f = _Fields(obj, where)
    kind = f.get("type")
    if kind in ("fc_swm", "fc_dense"):
        n, m = f.int("in"), f.int("out")
        if kind == "fc_swm":
            k = _check_k(f)
        else:
            if "k" in f.obj:
                raise ModelFormatError(f"{f.path('k')}: dense layers must not declare a block size")
            k = None
        act = f.get("activation")
        if act not in ACTIVATIONS:
            raise ModelFormatError(f"{f.path('activation')}: unknown activation {act!r}")
        W = _matrix_from_obj(f, "weights", f.get("weights"), m, n, k)
        return FcLayer(W, f.array("bias", (m,)), act)
    if kind == "lstm":
        d, h, o = f.int("input_dim"), f.int("hidden_dim"), f.int("output_dim")
        seq_len = f.int("seq_len")
        k = _check_k(f) if "k" in f.obj else None
        shapes = {"W_ym": (o, h)}
        for gate in "ifco":
            shapes[f"W_{gate}x"] = (h, d)
            shapes[f"W_{gate}r"] = (h, o)
        wf = _Fields(f.get("weights"), f.path("weights"))
        pf = _Fields(f.get("peepholes"), f.path("peepholes"))
        bf = _Fields(f.get("biases"), f.path("biases"))
        kw = {name: _matrix_from_obj(wf, name, wf.get(name), *shapes[name], k) for name in MATRIX_NAMES}
        kw.update({name: pf.array(name, (h,)) for name in PEEPHOLE_NAMES})
        kw.update({name: bf.array(name, (h,)) for name in BIAS_NAMES})
        return LstmLayer(LstmCellParams(**kw), seq_len)
    if kind == "maxpool":
        shape = f.get("input_shape")
        if not (isinstance(shape, list) and len(shape) == 3 and all(isinstance(s, int) and s >= 1 for s in shape)):
            raise ModelFormatError(f"{f.path('input_shape')}: expected [W, H, C] positive integers, got {shape!r}")
        return MaxPoolLayer(tuple(shape), f.int("window"), f.int("stride"))
    raise ModelFormatError(f"{f.path('type')}: unknown layer type {kind!r}")


def model_from_dict(obj) -> Model:
    f = _Fields(obj, "")
    if f.get("format") != FORMAT_NAME:
        raise ModelFormatError(f"format: expected {FORMAT_NAME!r}, got {f.get('format')!r}")
    version = f.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"format_version: this build reads version {FORMAT_VERSION}, file has {version!r}")
    q = f.get("quantization", optional=True)
    fmt = None
    if q is not None:
        qf = _Fields(q, "quantization")
        try:
            fmt = FixedPointFormat(qf.int("total_bits"), qf.int("frac_bits", minimum=0))
        except ValueError as exc:
            raise ModelFormatError(f"quantization: {exc}") from None
    layers_obj = f.get("layers")
    if not isinstance(layers_obj, list):
        raise ModelFormatError("layers: expected a list")
    layers = [layer_from_dict(obj, f"layers[{i}]") for i, obj in enumerate(layers_obj)]
    return Model(layers, fmt)


def loads_model(text: str) -> Model:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return model_from_dict(obj)


def load_model(path) -> Model:
    """Read a model file; raises :class:`ModelFormatError` (or ``OSError``) without partial results."""
    return loads_model(Path(path).read_text())


# -- generation and conversion ---------------------------------------------------

@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "fc", "lstm" or "pool"
    dims: tuple[int, ...]
    k: int | None = None
    activation: str | None = None
    seq_len: int = 1


def parse_layer_specs(text: str) -> list[LayerSpec]:
    """Parse a comma-separated layer list.

    ``INxOUT[:k][/activation]`` is an FC layer,
    ``lstm:DxHxO[:k][:tT]`` an LSTM over ``T`` steps and ``pool:WxHxC`` a 2x2 max pool.
    """
    specs = []
    for raw in filter(None, (s.strip() for s in text.split(","))):
        try:
            body, _, act = raw.partition("/")
            parts = body.split(":")
            if parts[0] == "lstm":
                dims = tuple(int(v) for v in parts[1].split("x"))
                k, seq_len = None, 1
                for extra in parts[2:]:
                    if extra.startswith("t"):
                        seq_len = int(extra[1:])
                    else:
                        k = int(extra)
                if len(dims) != 3:
                    raise ValueError("lstm needs DxHxO")
                specs.append(LayerSpec("lstm", dims, k, None, seq_len))
            elif parts[0] == "pool":
                dims = tuple(int(v) for v in parts[1].split("x"))
                if len(dims) != 3:
                    raise ValueError("pool needs WxHxC")
                specs.append(LayerSpec("pool", dims))
            else:
                dims = tuple(int(v) for v in parts[0].split("x"))
                if len(dims) != 2 or len(parts) > 2:
                    raise ValueError("fc needs INxOUT[:k]")
                k = int(parts[1]) if len(parts) == 2 else None
                specs.append(LayerSpec("fc", dims, k, act or None))
        except (ValueError, IndexError) as exc:
            raise ParseError(f"bad layer spec {raw!r}: {exc}") from None
    return specs


def generate_random_model(specs, seed: int) -> Model:
    """Deterministic random model; weights uniform in ``[-1/sqrt(n), 1/sqrt(n)]`` with ``n`` the layer input size."""
    if isinstance(specs, str):
        specs = parse_layer_specs(specs)
    rng = np.random.default_rng(seed)
    fc_indices = [i for i, s in enumerate(specs) if s.kind == "fc"]
    layers = []
    for i, spec in enumerate(specs):
        if spec.k is not None and not is_power_of_two(spec.k):
            raise ParseError(f"layer {i}: block size must be a power of two, got {spec.k}")
        if any(d < 1 for d in spec.dims):
            raise DimensionError(f"layer {i}: dimensions must be positive, got {spec.dims}")
        if spec.kind == "fc":
            n, m = spec.dims
            bound = 1.0 / math.sqrt(n)
            if spec.k is None:
                W = rng.uniform(-bound, bound, (m, n))
            else:
                shape = (-(-m // spec.k), -(-n // spec.k), spec.k)
                W = precompute_spectra(from_defining_vectors(rng.uniform(-bound, bound, shape), m, n, spec.k))
            act = spec.activation or ("identity" if fc_indices and i == fc_indices[-1] else "relu")
            layers.append(FcLayer(W, rng.uniform(-bound, bound, m), act))
        elif spec.kind == "lstm":
            d, h, o = spec.dims
            kw = {}
            for name in MATRIX_NAMES:
                m, n = (o, h) if name == "W_ym" else (h, d if name.endswith("x") else o)
                bound = 1.0 / math.sqrt(n)
                if spec.k is None:
                    kw[name] = rng.uniform(-bound, bound, (m, n))
                else:
                    shape = (-(-m // spec.k), -(-n // spec.k), spec.k)
                    kw[name] = precompute_spectra(
                        from_defining_vectors(rng.uniform(-bound, bound, shape), m, n, spec.k))
            for name in PEEPHOLE_NAMES + BIAS_NAMES:
                kw[name] = rng.uniform(-1.0 / math.sqrt(h), 1.0 / math.sqrt(h), h)
            layers.append(LstmLayer(LstmCellParams(**kw), spec.seq_len))
        else:
            layers.append(MaxPoolLayer(spec.dims))
    return Model(layers)


@dataclass
class ProjectionReport:
    index: int
    name: str
    k: int
    stored_weights: int
    dense_weights: int
    relative_frobenius_error: float


def _projection_error(D, P) -> float:
    D = np.asarray(D)
    norm = float(np.linalg.norm(D))
    err = float(np.linalg.norm(D - expand_to_dense(P)))
    return err / norm if norm > 0 else err


def convert_model(model: Model, k: int, include_output_layer: bool = False) -> tuple[Model, list[ProjectionReport]]:
    """Project dense FC and LSTM weights onto block-circulant form.

    The final FC layer stays dense unless ``include_output_layer``.
    """
    if not is_power_of_two(k):
        raise SizeError(f"block size must be a power of two, got {k}")
    fc_indices = [i for i, layer in enumerate(model.layers) if isinstance(layer, FcLayer)]
    last_fc = fc_indices[-1] if fc_indices else None
    layers, reports = [], []
    for i, layer in enumerate(model.layers):
        if isinstance(layer, FcLayer) and (i != last_fc or include_output_layer):
            D = to_dense(layer.weights)
            P = precompute_spectra(project_dense_to_circulant(D, k))
            reports.append(ProjectionReport(i, "W", k, P.stored_weights, D.size, _projection_error(D, P)))
            layer = FcLayer(P, layer.bias.copy(), layer.activation)
        elif isinstance(layer, LstmLayer):
            dense = dense_lstm(layer.params)
            params = structured_lstm_from_dense(dense, k)
            for name in MATRIX_NAMES:
                D, P = getattr(dense, name), precompute_spectra(getattr(params, name))
                reports.append(ProjectionReport(i, name, k, P.stored_weights, D.size, _projection_error(D, P)))
            layer = LstmLayer(params, layer.seq_len)
        layers.append(layer)
    return Model(layers, model.quantization), reports


def read_vector(path) -> np.ndarray:
    """One value per line; blank lines and ``#`` comments are skipped."""
    values = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            v = float(line)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: not a number: {line!r}") from None
        if not math.isfinite(v):
            raise ParseError(f"{path}:{lineno}: non-finite value")
        values.append(v)
    return np.array(values, dtype=np.float64)


def write_vector(values, path) -> None:
    Path(path).write_text("".join(f"{float(v)!r}\n" for v in np.ravel(values)))
