"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py --n 48 --repeat 5
"""

import argparse
import logging
import timeit

import numpy as np

from vderm import _backend
from vderm.advection import cfl_timestep
from vderm.forward_map import ForwardMap
from vderm.grid import GridSpec
from vderm.presets import peaks
from vderm.solver import SolverConfig, solve


def cases(n, k):
    rho = peaks((n, n, n))
    xi0 = GridSpec((n, n, n)).identity_reference_map()
    out = np.empty_like(xi0)
    v = k.velocity(rho, 1.0, np.empty_like(xi0), 0)
    dt = cfl_timestep(v, 1.0)
    acc = np.empty_like(rho)
    coupling = 0.1
    fm = ForwardMap(solve(peaks((n, n, n)), config=SolverConfig(n_max=20), kernels=k).xi_final, kernels=k)
    pts = np.random.default_rng(0).uniform(0, n - 1, (20000, 3))
    return {
        "matvec": lambda: k.stencil_matvec(rho, coupling, acc, 0),
        "velocity": lambda: k.velocity(rho, 1.0, out, 0),
        "upwind": lambda: k.upwind_step(xi0, v, dt, 1.0, out, 0),
        "locate 20k points": lambda: fm.locate(pts),
        "solve peaks 16^3": lambda: solve(peaks((16, 16, 16)), kernels=k),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=48, help="grid size for the kernel cases")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    # the locate case uses a deliberately short, unconverged solve
    logging.getLogger("vderm").setLevel(logging.ERROR)

    names = ["python"] + (["cython"] if _backend.COMPILED else [])
    timings = {}
    for name in names:
        k = _backend.get(name)
        for case, fn in cases(args.n, k).items():
            fn()  # warm up
            timings.setdefault(case, {})[name] = min(timeit.repeat(fn, number=1, repeat=args.repeat))

    print(f"{'case':<20}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for case, row in timings.items():
        line = f"{case:<20}" + "".join(f"{row[n] * 1e3:>10.2f}ms" for n in names)
        if len(names) > 1:
            line += f"{row['python'] / row['cython']:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
