"""Dense vs FFT matvec wall-clock over a grid of sizes and block sizes.

    python3 scripts/run_benchmark.py --sizes 512,1024,2048,4096 --k 8,16,32,64
"""

import argparse
import csv
import sys

from swmnet.perf_model import count_dense_fc, count_swm_fc, empirical_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="512,1024,2048,4096")
    ap.add_argument("--k", default="8,16,32,64")
    ap.add_argument("--reps", type=int, default=11)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--multi-thread", action="store_true")
    args = ap.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    ks = [int(k) for k in args.k.split(",")]
    rows = empirical_benchmark(sizes, ks, repetitions=args.reps, seed=args.seed, single_thread=not args.multi_thread)
    out = csv.writer(sys.stdout, delimiter="\t")
    out.writerow(["n", "k", "mult_ratio", "dense_ms", "fft_ms", "speedup", "max_rel_diff"])
    for r in rows:
        ratio = count_dense_fc(r.m, r.n).real_mults / count_swm_fc(r.m, r.n, r.k).real_mults
        out.writerow([r.n, r.k, f"{ratio:.2f}", f"{r.dense_median_s * 1e3:.3f}", f"{r.fft_median_s * 1e3:.3f}",
                      f"{r.speedup:.2f}", f"{r.max_rel_diff:.1e}"])


if __name__ == "__main__":
    main()
