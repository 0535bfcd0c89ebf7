"""Compare the compiled and numpy kernel backends on representative workloads.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import math
import timeit

import numpy as np

from wvafisher import kernels
from wvafisher.protocol import Protocol
from wvafisher.quantum import SIGMA_Z, bloch_state, gaussian_meter


def workloads():
    meter = gaussian_meter(2.0, 2001)
    proto = Protocol.build(bloch_state(math.pi / 3), bloch_state(math.pi / 3, math.pi),
                           SIGMA_Z, meter)
    ev = proto._eigvals
    rows = np.repeat(proto.row[None, :], 2000, axis=0)
    counts = np.random.default_rng(0).poisson(10.0, meter.n_points).astype(np.int64)
    g = 0.05
    return {
        "projection_sums[2000 rows]":
            lambda k: k.projection_sums(ev, rows, meter.grid, meter.weights, g),
        "cell_probabilities":
            lambda k: k.cell_probabilities(ev, proto.row, meter.grid, meter.weights, g),
        "cell_amplitudes":
            lambda k: k.cell_amplitudes(ev, proto.row, meter.grid, meter.amplitudes, g),
        "loglik_counts":
            lambda k: k.loglik_counts(ev, proto.row, meter.grid, meter.weights, g, counts,
                                      1e-300),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.compiled_backend is None:
        print("compiled extension not available; timing the numpy backend only")
    print(f"{'kernel':30s} {'numpy [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in workloads().items():
        n = 3 if "projection" in name else 200
        t_py = min(timeit.repeat(lambda: fn(kernels.python_backend), number=n,
                                 repeat=args.repeat)) / n
        if kernels.compiled_backend is not None:
            t_c = min(timeit.repeat(lambda: fn(kernels.compiled_backend), number=n,
                                    repeat=args.repeat)) / n
            print(f"{name:30s} {t_py * 1e3:12.3f} {t_c * 1e3:12.3f} {t_py / t_c:8.2f}")
        else:
            print(f"{name:30s} {t_py * 1e3:12.3f} {'-':>12s} {'-':>8s}")


if __name__ == "__main__":
    main()
