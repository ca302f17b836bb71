"""Benchmark the compiled explicit-march kernel against the pure-Python one.

Runs the fine propagator on the default window-transformer system with the
switching excitation and reports wall-clock times, the speedup, and the
relative disagreement between the two backends.

Usage: python3 benchmarks/bench_kernels.py [--steps N] [--repeats R]
"""

import argparse
import time

import numpy as np

from eddypar import Materials, assemble, partition, reduce_schur, window_transformer_grid
from eddypar.excitation import ExcitationSignal
from eddypar import kernels
from eddypar.kernels import fallback


def march_timed(fn, red, a0, h, steps, sig, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(red, a0, 0.0, h, steps, sig)
        best = min(best, time.perf_counter() - t0)
    return out, best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=8000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    grid = window_transformer_grid()
    sys = assemble(grid, Materials())
    red = reduce_schur(partition(sys))
    sig = ExcitationSignal(kind="pwm", I0=10.0, f_sin=50.0, f_pwm=1000.0, m_a=0.8)
    h = 5e-6
    a0 = np.zeros(red.n_c)

    print(f"system: {sys.n_dof} dofs ({red.n_c} conducting), "
          f"{args.steps} explicit steps at h = {h:g} s")
    print(f"selected backend: {kernels.BACKEND}")

    out_py, t_py = march_timed(fallback.explicit_march, red, a0, h,
                               args.steps, sig, args.repeats)
    print(f"pure python : {t_py * 1e3:9.2f} ms")

    if kernels.BACKEND == "compiled":
        out_c, t_c = march_timed(kernels.explicit_march, red, a0, h,
                                 args.steps, sig, args.repeats)
        rel = np.linalg.norm(out_c - out_py) / max(np.linalg.norm(out_py), 1e-300)
        print(f"compiled    : {t_c * 1e3:9.2f} ms")
        print(f"speedup     : {t_py / t_c:9.1f}x")
        print(f"agreement   : {rel:.2e} relative l2 "
              f"({'OK' if rel <= 1e-12 else 'MISMATCH'})")
    else:
        print("compiled kernel unavailable; only the fallback was timed")


if __name__ == "__main__":
    main()
