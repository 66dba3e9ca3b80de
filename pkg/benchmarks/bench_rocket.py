"""Time one robust tube evaluation on the compiled kernel and the Python path.

Usage::

    python3 benchmarks/bench_rocket.py --n 20 --repeat 3
"""

import argparse
import time

import numpy as np

from madsnmpc import _backend
from madsnmpc.rocket import RocketParams, ThrottleSchedule, simulate_tube


def random_schedules(n: int, seed: int, params: RocketParams):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        levels = rng.uniform(0.0, params.max_thrust, 5)
        levels[0] = rng.uniform(0.8, 1.0) * params.max_thrust
        levels[-1] = 0.0
        out.append(ThrottleSchedule(levels, np.sort(rng.uniform(0.5, 20.0, 4))))
    return out


def time_backend(backend: str, schedules, params, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for s in schedules:
            simulate_tube(s, params, backend=backend)
        best = min(best, (time.perf_counter() - t0) / len(schedules))
    return best


def max_disagreement(schedules, params) -> float:
    worst = 0.0
    for s in schedules:
        a = simulate_tube(s, params, backend="compiled")
        b = simulate_tube(s, params, backend="python")
        for x, y in ((a.lower, b.lower), (a.upper, b.upper)):
            if x.ok and y.ok:
                worst = max(worst, abs(x.altitude - y.altitude))
    return worst


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=20, help="number of random schedules")
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    params = RocketParams()
    schedules = random_schedules(args.n, args.seed, params)
    py = time_backend("python", schedules, params, args.repeat)
    print(f"python    {py * 1e3:10.3f} ms per tube")
    if not _backend.HAVE_KERNEL:
        print("compiled  unavailable (build with Cython to compare)")
        return
    c = time_backend("compiled", schedules, params, args.repeat)
    print(f"compiled  {c * 1e3:10.3f} ms per tube")
    print(f"speedup   {py / c:10.1f} x")
    print(f"max |h_compiled - h_python| = {max_disagreement(schedules, params):.3e} m")


if __name__ == "__main__":
    main()
