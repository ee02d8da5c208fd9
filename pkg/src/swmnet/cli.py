"""Command-line interface: ``swmnet {generate,convert,infer,bench,sweep,verify}``.

Tables go to stdout as tab-separated values with a header row; notes such as
a generated seed go to stderr.

Exit codes: 0 success, 2 usage, 3 missing or unreadable file, 4 parse error,
5 dimension error, 6 verification failure, 7 model format version mismatch.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys

import numpy as np

from swmnet.errors import DimensionError, ModelVersionError, ParseError, SizeError
from swmnet.fixed_point import DCNN_12, LSTM_16, FixedPointFormat, parse_format, quantization_sweep
from swmnet.model_io import (
    CANONICAL_SPEC,
    convert_model,
    dumps_model,
    generate_random_model,
    load_model,
    read_vector,
    run_model,
    save_model,
)
from swmnet.perf_model import count_dense_fc, count_swm_fc, empirical_benchmark, estimate_throughput
from swmnet.verify import verify_model

DEFAULT_SWEEP = [FixedPointFormat(8, 4), FixedPointFormat(10, 6), DCNN_12, FixedPointFormat(14, 10), LSTM_16,
                 FixedPointFormat(32, 20)]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_PARSE = 4
EXIT_DIMENSION = 5
EXIT_VERIFY = 6
EXIT_VERSION = 7


def _print_table(rows: list[dict], out=None) -> None:
    out = out or sys.stdout
    if not rows:
        return
    header = list(rows[0])
    print("\t".join(header), file=out)
    for row in rows:
        print("\t".join(_fmt(row[h]) for h in header), file=out)


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(32)
        print(f"# seed: {args.seed}", file=sys.stderr)
    return args.seed


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ParseError(f"expected comma-separated integers, got {text!r}") from None


def _sizes(text: str) -> list[tuple[int, int]]:
    sizes = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        try:
            dims = [int(v) for v in item.lower().split("x")]
        except ValueError:
            raise ParseError(f"bad size {item!r}; expected N or MxN") from None
        if len(dims) == 1:
            dims = dims * 2
        if len(dims) != 2 or min(dims) < 1:
            raise ParseError(f"bad size {item!r}; expected N or MxN")
        sizes.append(tuple(dims))
    return sizes


def _formats(text: str) -> list[FixedPointFormat]:
    try:
        return [parse_format(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def cmd_generate(args) -> int:
    model = generate_random_model(args.layers, _seed(args))
    if args.fixed:
        model.quantization = _formats(args.fixed)[0]
    if args.output:
        save_model(model, args.output)
    else:
        sys.stdout.write(dumps_model(model))
    stored = [layer.stored_weights for layer in model.layers]
    print(f"# stored weights per layer: {stored} total {sum(stored)}", file=sys.stderr)
    return EXIT_OK


def cmd_convert(args) -> int:
    model = load_model(args.input)
    converted, reports = convert_model(model, args.k, include_output_layer=args.all_layers)
    save_model(converted, args.output)
    _print_table([dict(r.__dict__) for r in reports])
    return EXIT_OK


def cmd_infer(args) -> int:
    model = load_model(args.model)
    x = read_vector(args.input)
    fmt = _formats(args.fixed)[0] if args.fixed else model.quantization
    report = run_model(model, x, fmt)
    if args.json:
        print(json.dumps(report.to_dict(), indent=1))
        return EXIT_OK
    rows = [dict(r.__dict__) for r in report.layers]
    rows.append({"index": "total", "type": "-", "in_features": model.in_features, "out_features": model.out_features,
                 "k": None, "stored_weights": report.total_stored_weights, "real_mults": report.total_real_mults,
                 "seconds": report.total_seconds})
    _print_table(rows)
    print()
    _print_table([{"output_index": i, "value": float(v)} for i, v in enumerate(report.output)])
    print()
    print(f"class_index\t{_fmt(report.class_index)}")
    if fmt is not None:
        print(f"quantization\t{fmt}")
        print(f"max_abs_deviation\t{report.max_abs_deviation:.6g}")
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes, ks = _sizes(args.sizes), _int_list(args.k)
    for k in ks:
        if k < 1 or k & (k - 1):
            raise SizeError(f"block size must be a power of two, got {k}")
    rows = []
    measured = {}
    if not args.counts_only:
        for r in empirical_benchmark(sizes, ks, repetitions=args.reps, warmup=args.warmup, seed=_seed(args),
                                     single_thread=not args.multi_thread):
            measured[(r.m, r.n, r.k)] = r
    for m, n in sizes:
        dense = count_dense_fc(m, n)
        for k in ks:
            swm = count_swm_fc(m, n, k)
            p, q = swm.p, swm.q
            tp = estimate_throughput(swm, args.clock_mhz * 1e6, args.mults_per_cycle)
            row = {
                "m": m, "n": n, "k": k,
                "stored_weights": p * q * k, "dense_weights": m * n,
                "stored_ratio": (m * n) / (p * q * k),
                "dense_real_mults": dense.real_mults, "swm_complex_mults": swm.complex_mults,
                "swm_real_mults": swm.real_mults, "mult_ratio": dense.real_mults / swm.real_mults,
                "est_cycles": tp.cycles_per_inference, "est_inferences_per_s": tp.inferences_per_second,
            }
            r = measured.get((m, n, k))
            if r is not None:
                row.update({
                    "dense_median_s": r.dense_median_s, "fft_median_s": r.fft_median_s,
                    "dense_stdev_s": r.dense_stdev_s, "fft_stdev_s": r.fft_stdev_s,
                    "speedup": r.speedup, "max_rel_diff": r.max_rel_diff, "threads": r.threads,
                })
            rows.append(row)
    _print_table(rows)
    return EXIT_OK


def cmd_sweep(args) -> int:
    model = load_model(args.model)
    formats = _formats(args.formats) if args.formats else DEFAULT_SWEEP
    if args.input:
        x = read_vector(args.input)
        if model.layers and x.shape != (model.in_features,):
            raise DimensionError(f"model expects {model.in_features} inputs, got {x.size}")
    else:
        x = np.random.default_rng(_seed(args)).uniform(-1, 1, model.in_features or 0)
    rows = quantization_sweep(model.layers, formats, x)
    _print_table([{"format": str(r.format), "total_bits": r.format.total_bits, "frac_bits": r.format.frac_bits,
                   "max_abs_deviation": r.max_abs_deviation, "stored_weights": r.stored_weights,
                   "storage_bits": r.storage_bits} for r in rows])
    return EXIT_OK


def cmd_verify(args) -> int:
    model = load_model(args.model)
    checks = verify_model(model, trials=args.trials, seed=_seed(args))
    _print_table([{"check": c.name, "trials": c.trials, "max_error": c.max_error, "tolerance": c.tolerance,
                   "status": "pass" if c.passed else "FAIL"} for c in checks])
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swmnet", description="Block-circulant NN inference engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a deterministic random model")
    p.add_argument("--layers", default=CANONICAL_SPEC,
                   help="layer list, e.g. '512x512:64,64x10' or 'lstm:16x32x16:8:t4' (default: %(default)s)")
    p.add_argument("--seed", type=int)
    p.add_argument("--fixed", help="attach a quantization descriptor, e.g. 12x8")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("convert", help="project dense weights onto block-circulant form")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--output", "-o", required=True)
    p.add_argument("--all-layers", action="store_true", help="also convert the output layer")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("infer", help="run a model on one input vector")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="text file, one value per line")
    p.add_argument("--fixed", help="fixed-point format WxF, e.g. 16x8")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("bench", help="op counts and wall-clock, dense vs SWM")
    p.add_argument("--sizes", default="512,4096", help="comma list of N or MxN")
    p.add_argument("--k", default="16,64", help="comma list of block sizes")
    p.add_argument("--reps", type=int, default=11)
    p.add_argument("--warmup", type=int, default=3)
    p.add_argument("--seed", type=int)
    p.add_argument("--clock-mhz", type=float, default=200.0)
    p.add_argument("--mults-per-cycle", type=int, default=64)
    p.add_argument("--multi-thread", action="store_true", help="do not pin BLAS to one thread")
    p.add_argument("--counts-only", action="store_true", help="skip wall-clock measurement")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="fixed-point format sweep")
    p.add_argument("--model", required=True)
    p.add_argument("--formats", help="comma list of WxF formats")
    p.add_argument("--input", help="input vector file (default: seeded uniform [-1, 1])")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="oracle-equivalence suite; exit 0 iff all checks pass")
    p.add_argument("--model", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ModelVersionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERSION
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (DimensionError, SizeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION


if __name__ == "__main__":
    sys.exit(main())
