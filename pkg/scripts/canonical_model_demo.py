"""Build the 512-512-512-64-10 network at k=64, round-trip it through JSON and run it."""

import argparse
import tempfile
from pathlib import Path

import numpy as np

from swmnet.fixed_point import DCNN_12, FixedPointFormat
from swmnet.model_io import CANONICAL_SPEC, generate_random_model, load_model, run_model, save_model
from swmnet.verify import verify_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    model = generate_random_model(CANONICAL_SPEC, args.seed)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "canonical.json"
        save_model(model, path)
        print(f"model file: {path.stat().st_size} bytes")
        model = load_model(path)

    dense_total = sum(layer.in_features * layer.out_features for layer in model.layers)
    for i, layer in enumerate(model.layers):
        print(f"layer {i}: {layer.in_features}x{layer.out_features} stored {layer.stored_weights}")
    print(f"stored {model.stored_weights} of {dense_total} dense weights ({dense_total / model.stored_weights:.1f}x)")

    x = np.random.default_rng(args.seed).uniform(-1, 1, model.in_features)
    for fmt in (None, DCNN_12, FixedPointFormat(32, 20)):
        report = run_model(model, x, fmt)
        dev = "" if fmt is None else f" deviation {report.max_abs_deviation:.2e}"
        print(f"{str(fmt or 'float64'):>8}: class {report.class_index} real mults {report.total_real_mults}{dev}")

    failed = [c.name for c in verify_model(model, trials=20, seed=args.seed) if not c.passed]
    print("verify:", "all checks pass" if not failed else f"failed {failed}")


if __name__ == "__main__":
    main()
