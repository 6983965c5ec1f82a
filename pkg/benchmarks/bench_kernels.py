"""Compare the numba and numpy kernels on the time loop and the strength lookup.

    python benchmarks/bench_kernels.py [--m 256] [--steps 20000] [--repeat 3]

Both kernels are called through :func:`dryfriction.solver.run_until` with
``impl=`` so the comparison covers exactly the production code path. The
first numba call is a warm-up and excluded from the timings.
"""
import argparse
import time

import numpy as np

from dryfriction import kernels
from dryfriction.kernels import vectorized
from dryfriction.obstacle_field import ObstacleSpec, sample_field
from dryfriction.solver import ForcingSpec, SolverConfig, State, TorusGrid, run_until


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--m", type=int, default=256)
    p.add_argument("--steps", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    field = sample_field(ObstacleSpec(50.0, 0.1, 0.04, 1.0, 1, 0))
    grid = TorusGrid(1, args.m)
    cfg = SolverConfig(t_max=args.steps * grid.dt(0.9))
    start = State(grid, 0.05 * np.sin(2 * np.pi * grid.positions()[:, 0]))
    cases = {
        "creep F=0.9": ForcingSpec.constant(0.9),
        "cycle A=0.8": ForcingSpec.cycle(0.8, 20.0),
    }
    impls = {"numpy": vectorized}
    if kernels.jit is not None:
        impls = {"numba": kernels.jit, **impls}
        run_until(start, field, cases["creep F=0.9"], cfg.replace(t_max=10 * grid.dt(0.9)), impl=kernels.jit)

    print(f"m={args.m}, {args.steps} steps, best of {args.repeat}")
    print(f"{'case':<14}{'kernel':<8}{'time [s]':>10}{'us/step':>10}{'speedup':>10}")
    for name, forcing in cases.items():
        base = None
        results = {}
        for label, impl in impls.items():
            def go():
                return run_until(start, field, forcing, cfg, stop_when_stationary=False, check_escape=False, impl=impl)
            results[label] = go()
            results[label + "_t"] = _best(go, args.repeat)
        base = results["numpy_t"]
        for label in impls:
            t = results[label + "_t"]
            print(f"{name:<14}{label:<8}{t:>10.3f}{t / args.steps * 1e6:>10.2f}{base / t:>10.1f}")
        if "numba" in impls:
            same = np.array_equal(results["numba"].rows, results["numpy"].rows)
            print(f"{'':<14}identical rows: {same}")

    pts = np.column_stack([np.random.default_rng(0).random(100_000), np.random.default_rng(1).uniform(-1, 1, 100_000)])
    xs = np.zeros((pts.shape[0], 2))
    xs[:, 0] = pts[:, 0]
    out = np.empty(pts.shape[0])
    print("strength lookup, 1e5 points")
    for label, impl in impls.items():
        impl.phi_nodes(pts[:, 1].copy(), xs, *field.kernel_args, out)
        t = _best(lambda: impl.phi_nodes(pts[:, 1].copy(), xs, *field.kernel_args, out), args.repeat)
        print(f"{'phi_nodes':<14}{label:<8}{t:>10.4f}")


if __name__ == "__main__":
    main()
