"""Max deviation from float across fixed-point splits for a fixed total width.

    python3 scripts/quantization_sweep.py --bits 12 --layers 512x512:64,512x64:64,64x10
"""

import argparse

import numpy as np

from swmnet.fixed_point import FixedPointFormat, quantization_sweep
from swmnet.model_io import generate_random_model


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bits", type=int, nargs="+", default=[12, 16])
    ap.add_argument("--layers", default="512x512:64,512x64:64,64x10")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--inputs", type=int, default=8, help="random inputs averaged per format")
    args = ap.parse_args()

    model = generate_random_model(args.layers, args.seed)
    rng = np.random.default_rng(args.seed)
    xs = rng.uniform(-1, 1, (args.inputs, model.in_features))
    for bits in args.bits:
        formats = [FixedPointFormat(bits, f) for f in range(1, bits)]
        devs = np.array([[r.max_abs_deviation for r in quantization_sweep(model.layers, formats, x)] for x in xs])
        mean = devs.mean(axis=0)
        best = int(np.argmin(mean))
        print(f"W={bits}")
        for fmt, d in zip(formats, mean):
            mark = "  <- best" if fmt is formats[best] else ""
            print(f"  {fmt!s:>6}  mean max|dev| {d:.3e}{mark}")


if __name__ == "__main__":
    main()
