"""Compare the compiled and numpy Chambolle kernels.

    python benchmarks/bench_kernels.py [--sizes 32,64,128] [--iters 2000]

Both backends run the same number of updates from the same data; the
final energies are printed next to the timings as a sanity check.
"""
import argparse
import time

import numpy as np

from tvstokes import kernels
from tvstokes.projection import project_global


def _time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="32,64,128")
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = {"python": kernels.python_backend()}
    if kernels.BACKEND != "python":
        backends[kernels.BACKEND] = kernels
    else:
        print("compiled extension not available; timing the numpy path only")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<8}{'grid':>8}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for n in (int(s) for s in args.sizes.split(",")):
        f = rng.normal(size=(n, n))
        w = project_global(rng.normal(size=(2, n + 1, n + 1)))
        cases = {
            "ir": lambda k: k.ir_chambolle(np.zeros((2, n, n)), f, 1.0, 0.125, args.iters, 0.0),
            "tfs": lambda k: k.tfs_chambolle(np.zeros((2, 2, n + 1, n + 1)), w, 1.0, 0.125,
                                             args.iters, 0.0),
        }
        for name, run in cases.items():
            times, finals = [], []
            for k in backends.values():
                dt, (_, energies) = _time(lambda: run(k), args.repeat)
                times.append(dt)
                finals.append(energies[-1])
            speed = times[0] / times[-1]
            print(f"{name:<8}{n:>8}" + "".join(f"{t:>11.3f}s" for t in times) + f"{speed:>9.1f}x"
                  + f"   energies {' / '.join(f'{e:.10g}' for e in finals)}")


if __name__ == "__main__":
    main()
