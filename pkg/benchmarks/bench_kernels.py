"""Time the compiled kernels against the pure-Python fallback.

Each workload runs on both backends from the same seed; the script also
checks that both produce identical state, then prints wall times and the
speed-up. Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]
"""
import argparse
import time

import numpy as np

from repfwd._backend import get_kernels
from repfwd.abm import Population, SimConfig, init_population, replicate_generators
from repfwd.dynamics import simplex_grid, ss_field, uss_field
from repfwd.game import REFERENCE_LINKS, GameParams


def _uss(kern, scale):
    p = GameParams(3.0, 2.0, 0.01, 0.1, N=1000)
    rng = replicate_generators(1, 1)[0]
    s = rng.integers(0, 3, p.N).astype(np.intc)
    pop = Population.from_strategies(s)
    rounds = max(1, int(20 * scale))
    kern.uss_run(*pop.arrays(), np.array([p.b, p.c, p.p_e, p.mu, p.beta]), rounds, 50, rng)
    return pop.strategy.copy(), pop.tally.copy(), rng.random()


def _ss(kern, scale):
    p = GameParams(4.0, 2.0, 0.01, 0.1, N=200, L=4)
    cfg = SimConfig(p, REFERENCE_LINKS, "ss", (0.1, 0.6, 0.3), steps=1)
    rng = replicate_generators(2, 1)[0]
    pop, net = init_population(cfg, rng)
    acc = np.zeros(6, dtype=np.int64)
    kern.ss_run(*pop.arrays(), np.array([p.b, p.c, p.p_e, p.mu, p.beta]), net.eu, net.ev,
                net.inc, net.deg, net.slot, net.typecount, acc, REFERENCE_LINKS.by_type(),
                p.omega, max(1, int(20000 * scale)), rng)
    return pop.strategy.copy(), net.eu.copy(), acc, rng.random()


def _basins(kern, scale, field):
    vec, kinv = field.packed()
    pts = simplex_grid(max(10, int(10 * scale)))
    return kern.classify_points(field.mode, vec, kinv, pts, 0.01, 200.0, 1e-3)


WORKLOADS = {
    "uss_abm": _uss,
    "ss_abm": _ss,
    "uss_basins": lambda k, s: _basins(k, s, uss_field(GameParams(3.0, 2.0, 0.01, 0.01))),
    "ss_basins": lambda k, s: _basins(k, s, ss_field(GameParams(4.0, 2.0, 0.01, 0.1), REFERENCE_LINKS)),
}


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=float, default=1.0)
    args = ap.parse_args()
    c, py = get_kernels("c"), get_kernels("python")
    print(f"{'workload':<12} {'c [s]':>10} {'python [s]':>12} {'speed-up':>9}  identical")
    for name, fn in WORKLOADS.items():
        times = {}
        outs = {}
        for label, kern in (("c", c), ("python", py)):
            best = float("inf")
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                outs[label] = fn(kern, args.scale)
                best = min(best, time.perf_counter() - t0)
            times[label] = best
        same = _same(outs["c"], outs["python"])
        print(f"{name:<12} {times['c']:>10.4f} {times['python']:>12.4f} "
              f"{times['python'] / times['c']:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
