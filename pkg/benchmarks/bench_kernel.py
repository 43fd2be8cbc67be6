"""Compare the compiled closed-loop kernel with the pure-Python loop.

    python benchmarks/bench_kernel.py [--duration 0.02] [--repeat 3]

Both backends run the same scenario; the script checks that their traces
are identical and reports the cost per integration step.
"""

import argparse
import time

import numpy as np

from fuzzyfoc import sim
from fuzzyfoc.config import shipped_params


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="var-speed-var-torque")
    ap.add_argument("--duration", type=float, default=0.02, help="simulated seconds")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    scenario = sim.get_scenario(args.scenario)
    params = shipped_params("tuned")
    config = sim.DriveConfig()
    steps = int(round(args.duration / config.dt))
    results = {}
    for backend in sorted(sim.BACKENDS):
        seconds, trace = best_of(
            lambda: sim.run(scenario, params, config, duration=args.duration, backend=backend),
            args.repeat)
        results[backend] = (seconds, trace)
        print(f"{backend:9s} {seconds:8.3f} s  {1e6 * seconds / steps:8.3f} us/step")

    if len(results) == 2:
        (t_c, a), (t_p, b) = results["compiled"], results["python"]
        print(f"speed-up  {t_p / t_c:8.1f} x")
        print(f"identical traces: {np.array_equal(a.data, b.data)}")
    else:
        print("compiled kernel not available; only the Python loop was timed")


if __name__ == "__main__":
    main()
