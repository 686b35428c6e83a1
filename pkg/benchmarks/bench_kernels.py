"""Compare the numba and numpy kernel backends on batched small matrices.

    python3 benchmarks/bench_kernels.py [--points 262144] [--ranks 2 3] [--repeat 5]

Each kernel is timed on the same Hermitian positive definite batch; the
first numba call is excluded because it triggers compilation.
"""

import argparse
import time

import numpy as np

from higgshym import kernels


def _batch(m: int, r: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(m, r, r)) + 1j * rng.normal(size=(m, r, r))
    return a @ np.conj(np.swapaxes(a, -1, -2)) + r * np.eye(r)


def _best(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--points", type=int, default=32 ** 4 // 4)
    p.add_argument("--ranks", type=int, nargs="+", default=[2, 3])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    names = sorted(kernels.IMPLEMENTATIONS)
    print(f"{args.points} matrices per batch; backends: {', '.join(names)}")
    print(f"{'kernel':8s} {'r':>2s} " + " ".join(f"{n + ' [ms]':>12s}" for n in names) + "  speedup")
    for r in args.ranks:
        a, b = _batch(args.points, r, 0), _batch(args.points, r, 1)
        for kernel in ("matmul", "inv", "eigh"):
            t = {}
            for name in names:
                impl = kernels.IMPLEMENTATIONS[name]
                fn = {"matmul": lambda: impl.matmul(a, b), "inv": lambda: impl.inv(a),
                      "eigh": lambda: impl.eigh(a)}[kernel]
                t[name] = _best(fn, args.repeat)
            speed = f"{t['numpy'] / t['numba']:6.2f}x" if "numba" in t else "   n/a"
            print(f"{kernel:8s} {r:2d} " + " ".join(f"{1e3 * t[n]:12.1f}" for n in names) + "  " + speed)


if __name__ == "__main__":
    main()
