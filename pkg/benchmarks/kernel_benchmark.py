"""Compare the compiled and pure-Python simulation kernels.

Runs identical workloads through both backends, times them, and checks that
the outputs match bit for bit (they must; the fallback is a reference
implementation, not an approximation).

    python3 benchmarks/kernel_benchmark.py [--arrivals N] [--blocks N]
"""

import argparse
import math
import sys
import time

import numpy as np

from hailsim import _kernel
from hailsim.arrivals import (HeightLaw, MarkModel, RateModel, Scenario,
                              sample_stream_arrays)
from hailsim.blocks import ZigzagSpec, sample_blocks
from hailsim.geometry import ExclusionLaw, Space


def planar_scenario(mean_radius, intensity):
    return Scenario(
        space=Space.torus_2d(2.0), intensity=intensity,
        marks=MarkModel(exclusion=ExclusionLaw.exponential_ball(mean_radius),
                        height=HeightLaw.exponential(1.0)),
        scenario_id="bench-planar")


def discrete_scenario(intensity):
    return Scenario(
        space=Space.discrete_circle(20), intensity=intensity,
        marks=MarkModel(exclusion=ExclusionLaw.fixed_interval(3),
                        height=HeightLaw.exponential(1.0)),
        rate_model=RateModel.discrete_indicator(v=1.0, reach=1.0),
        scenario_id="bench-discrete")


def time_backend(fn, repeat):
    best = math.inf
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def results_match(a, b):
    for key in ("starts", "departs", "ev_time", "ev_kind", "ev_id"):
        if not np.array_equal(a[key], b[key], equal_nan=True):
            return False
    return a["final_time"] == b["final_time"]


def bench_trace(scenario, n_arrivals, repeat):
    t, x, r, h = sample_stream_arrays(scenario, n_arrivals, seed=1)
    sp, model = scenario.space, scenario.rate_model

    def run(backend):
        return _kernel.run_arrays(t, x, r, h, sp, model, backend=backend,
                                  max_events=-1, max_time=math.inf,
                                  want_events=True)

    tc, rc = time_backend(lambda: run("compiled"), repeat)
    tp, rp = time_backend(lambda: run("python"), repeat)
    return tc, tp, results_match(rc, rp)


def bench_drains(scenario, n_blocks, repeat):
    blocks = sample_blocks(scenario, ZigzagSpec.single(), n_blocks, seed=2)
    sp, model = scenario.space, scenario.rate_model

    def run(backend):
        out = 0.0
        for b in blocks:
            res = _kernel.run_arrays(None, b.xs, b.radii, b.heights, sp,
                                     model, backend=backend, saturated=True)
            out += res["final_time"]
        return out

    tc, rc = time_backend(lambda: run("compiled"), repeat)
    tp, rp = time_backend(lambda: run("python"), repeat)
    return tc, tp, rc == rp


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--arrivals", type=int, default=4000)
    parser.add_argument("--blocks", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=3,
                        help="repetitions per backend; best time is kept")
    args = parser.parse_args(argv)

    if _kernel.simulate_compiled is None:
        print("compiled kernel unavailable; nothing to compare",
              file=sys.stderr)
        return 1

    workloads = [
        ("planar trace", lambda: bench_trace(
            planar_scenario(1.0, 0.2), args.arrivals, args.repeat)),
        ("planar near-critical", lambda: bench_trace(
            planar_scenario(1.0, 0.27), args.arrivals, args.repeat)),
        ("discrete trace", lambda: bench_trace(
            discrete_scenario(0.02), args.arrivals, args.repeat)),
        ("saturated drains", lambda: bench_drains(
            planar_scenario(2.0, 1.0), args.blocks, args.repeat)),
    ]

    print(f"{'workload':<22} {'compiled':>10} {'python':>10} "
          f"{'speedup':>8}  match")
    ok = True
    for name, fn in workloads:
        tc, tp, match = fn()
        ok &= match
        print(f"{name:<22} {tc:>9.3f}s {tp:>9.3f}s {tp / tc:>7.1f}x  "
              f"{'yes' if match else 'NO'}")
    if not ok:
        print("backend outputs diverged", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
