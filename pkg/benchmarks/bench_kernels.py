"""Time the compiled and pure-Python velocity solvers on identical problems.

    python benchmarks/bench_kernels.py [--sizes 10 50 200] [--repeats 200]
"""

import argparse
import time

import numpy as np

from waamlayer.kernels import available_backends
from waamlayer.model import COLD


def problems(n, count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        t = np.linspace(1.6, 2.8, n) + rng.normal(0.0, 0.1, n)
        v0 = np.clip(np.exp((np.log(np.clip(t, 1.41, 3.12)) - COLD.b) / COLD.a), 3.0, 17.0)
        yield t, v0


def bench(impl, n, repeats, seed):
    cases = list(problems(n, repeats, seed))
    iters = 0
    start = time.perf_counter()
    for t, v0 in cases:
        _, _, it, _, _ = impl.solve(t, COLD.c, COLD.a, 0.25, 3.0, 17.0, v0, 1e-8, 200)
        iters += it
    return (time.perf_counter() - start) / repeats, iters / repeats


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[10, 50, 200])
    p.add_argument("--repeats", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    backends = available_backends()
    print(f"{'N':>5} {'backend':>8} {'s/solve':>11} {'iters':>6} {'speedup':>8}")
    for n in args.sizes:
        timings = {name: bench(impl, n, args.repeats, args.seed)
                   for name, impl in sorted(backends.items())}
        base = timings["python"][0]
        for name, (sec, it) in timings.items():
            print(f"{n:>5} {name:>8} {sec:>11.3e} {it:>6.1f} {base / sec:>7.1f}x")


if __name__ == "__main__":
    main()
