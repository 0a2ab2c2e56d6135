"""Compare the compiled and numpy filter kernels on a long incubator run.

    python benchmarks/bench_kernels.py [--steps 100000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from twinwatch import _backend
from twinwatch.incubator import FaultSchedule, IncubatorParams, build_system, simulate_run
from twinwatch.kalman import FilterState, run_filter


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    p = IncubatorParams()
    sys = build_system(p)
    tr, _ = simulate_run(p, FaultSchedule(), args.steps, seed=0)
    init = FilterState([p.t_room, p.t_room], np.eye(2))
    inputs, measurements = tr.inputs, list(tr.measurements)

    t_py, ref = best_of(lambda: run_filter(sys, init, inputs, measurements, backend="python"), args.repeat)
    print(f"python   {args.steps} steps  {t_py:8.3f} s  {args.steps / t_py:12.0f} steps/s")
    if not _backend.compiled_available():
        print("compiled kernel not built; reinstall with a C compiler and Cython available")
        return
    t_c, out = best_of(lambda: run_filter(sys, init, inputs, measurements, backend="compiled"), args.repeat)
    print(f"compiled {args.steps} steps  {t_c:8.3f} s  {args.steps / t_c:12.0f} steps/s")
    diff = float(np.max(np.abs(out.means - ref.means)))
    print(f"speedup {t_py / t_c:.1f}x, max mean difference {diff:.1e}")


if __name__ == "__main__":
    main()
