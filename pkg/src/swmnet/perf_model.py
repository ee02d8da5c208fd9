"""Operation counts, a throughput roofline and a wall-clock benchmark, dense vs SWM.

Cost constants: a complex multiply is 4 real multiplies and 2 real adds; a
radix-2 butterfly is 1 complex multiply and 2 complex adds. Weight spectra
are precomputed, so weight FFTs never appear in per-inference counts.
"""

from __future__ import annotations

import math
import statistics
import time
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np

from swmnet.errors import SizeError
from swmnet.fft_core import is_power_of_two
from swmnet.structured_matrix import expand_to_dense, from_defining_vectors, matvec_fft, precompute_spectra

try:
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover
    threadpool_limits = None


@dataclass(frozen=True)
class OpCountReport:
    path: str
    m: int
    n: int
    k: int
    p: int
    q: int
    real_mults: int
    real_adds: int
    complex_mults: int = 0

    def as_row(self) -> dict:
        return {
            "path": self.path, "m": self.m, "n": self.n, "k": self.k, "p": self.p, "q": self.q,
            "complex_mults": self.complex_mults, "real_mults": self.real_mults, "real_adds": self.real_adds,
        }


def count_dense_fc(m: int, n: int) -> OpCountReport:
    if m < 1 or n < 1:
        raise ValueError(f"dimensions must be positive, got {m}x{n}")
    return OpCountReport("dense", m, n, 1, m, n, real_mults=m * n, real_adds=m * (n - 1))


def butterflies(k: int) -> int:
    """Butterflies in one radix-2 transform of size ``k``: ``(k/2) log2 k``."""
    return (k // 2) * int(math.log2(k)) if k > 1 else 0


def count_swm_fc(m: int, n: int, k: int) -> OpCountReport:
    """Closed-form counts for one SWM matvec (dimensions padded up to multiples of ``k``).

    complex_mults = q*B(k) + p*q*k + p*B(k), with B(k) the butterfly count;
    q forward transforms of the input, p*q spectrum products, p inverse transforms.
    """
    if not is_power_of_two(k):
        raise SizeError(f"block size k must be a power of two, got {k!r}")
    if m < 1 or n < 1:
        raise ValueError(f"dimensions must be positive, got {m}x{n}")
    p, q = -(-m // k), -(-n // k)
    b = butterflies(k)
    complex_mults = q * b + p * q * k + p * b
    complex_adds = 2 * b * (p + q) + p * (q - 1) * k
    real_mults = 4 * complex_mults
    real_adds = 2 * complex_mults + 2 * complex_adds
    return OpCountReport("swm", m, n, k, p, q, real_mults, real_adds, complex_mults)


def mult_ratio(m: int, n: int, k: int) -> float:
    """Dense over SWM real-multiply count."""
    return count_dense_fc(m, n).real_mults / count_swm_fc(m, n, k).real_mults


@dataclass(frozen=True)
class ThroughputEstimate:
    clock_hz: float
    ops_per_cycle: int
    cycles_per_inference: int
    inferences_per_second: float


def estimate_throughput(report: OpCountReport, clock_hz: float = 200e6, parallel_mults_per_cycle: int = 64) -> ThroughputEstimate:
    if clock_hz <= 0 or parallel_mults_per_cycle <= 0:
        raise ValueError("clock_hz and parallel_mults_per_cycle must be positive")
    cycles = max(1, -(-report.real_mults // parallel_mults_per_cycle))
    return ThroughputEstimate(clock_hz, parallel_mults_per_cycle, cycles, clock_hz / cycles)


@dataclass
class BenchRow:
    m: int
    n: int
    k: int
    stored_ratio: float
    dense_median_s: float
    fft_median_s: float
    dense_stdev_s: float
    fft_stdev_s: float
    speedup: float
    max_rel_diff: float
    threads: str

    def as_row(self) -> dict:
        return dict(self.__dict__)


def _time_calls(fn, repetitions: int, warmup: int) -> list[float]:
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return times


def empirical_benchmark(sizes, ks, repetitions: int = 11, warmup: int = 3, seed: int = 0,
                        single_thread: bool = True) -> list[BenchRow]:
    """Median wall-clock of dense ``D @ x`` vs ``matvec_fft`` for each ``(m, n)`` and ``k``.

    ``sizes`` holds ``(m, n)`` pairs or plain ints (square). Inputs come from a
    seeded generator; the dense matrix is the exact expansion of the
    structured one so both paths compute the same product.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    rows = []
    limit = threadpool_limits(limits=1) if (single_thread and threadpool_limits) else nullcontext()
    with limit:
        for size in sizes:
            m, n = (size, size) if isinstance(size, (int, np.integer)) else size
            for k in ks:
                rng = np.random.default_rng([seed, m, n, k])
                p, q = -(-m // k), -(-n // k)
                M = from_defining_vectors(rng.uniform(-1, 1, (p, q, k)), m, n, k)
                precompute_spectra(M)
                D = expand_to_dense(M)
                x = rng.uniform(-1, 1, n)
                yd, yf = D @ x, matvec_fft(M, x)
                rel = float(np.max(np.abs(yd - yf)) / max(1.0, float(np.max(np.abs(yd)))))
                td = _time_calls(lambda: D @ x, repetitions, warmup)
                tf = _time_calls(lambda: matvec_fft(M, x), repetitions, warmup)
                md, mf = statistics.median(td), statistics.median(tf)
                rows.append(BenchRow(
                    m=m, n=n, k=k,
                    stored_ratio=(m * n) / M.stored_weights,
                    dense_median_s=md, fft_median_s=mf,
                    dense_stdev_s=statistics.stdev(td) if len(td) > 1 else 0.0,
                    fft_stdev_s=statistics.stdev(tf) if len(tf) > 1 else 0.0,
                    speedup=md / mf if mf > 0 else float("inf"),
                    max_rel_diff=rel,
                    threads="single" if single_thread else "multi",
                ))
    return rows
