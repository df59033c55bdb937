"""Time the numba and numpy backends of the transform kernels.

Usage::

    python benchmarks/bench_kernels.py [--repeat 20] [--n-nu 128] [--side 32]

Run with ``SPFTI_DISABLE_NUMBA=1`` to time the numpy path alone. The first
numba call per kernel includes compilation (or cache loading) and is excluded.
"""

import argparse
import time

import numpy as np

from spfti._accel import HAS_NUMBA
from spfti.solver import analysis, synthesis
from spfti.transforms import haar_2d_forward, haar_2d_inverse, wht_2d_forward


def _time(fn, repeat):
    fn()  # warm-up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return 1e3 * best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--n-nu", type=int, default=128)
    ap.add_argument("--side", type=int, default=32)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    shape = (args.n_nu, args.side, args.side)
    cube = rng.standard_normal(shape)
    ccube = cube + 1j * rng.standard_normal(shape)
    flat = cube.reshape(args.n_nu, -1)
    spatial = (args.side, args.side)

    cases = {
        "wht_2d (real)": lambda be: wht_2d_forward(cube, backend=be),
        "wht_2d (complex)": lambda be: wht_2d_forward(ccube, backend=be),
        "haar_2d fwd": lambda be: haar_2d_forward(cube, backend=be),
        "haar_2d inv": lambda be: haar_2d_inverse(cube, backend=be),
        "analysis+synthesis": lambda be: synthesis(analysis(flat, spatial, be), spatial, be),
    }
    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    print(f"volume {shape}, best of {args.repeat} (ms)")
    print(f"{'kernel':<22}" + "".join(f"{b:>10}" for b in backends) + ("   speedup" if HAS_NUMBA else ""))
    for name, fn in cases.items():
        ms = [_time(lambda b=b: fn(b), args.repeat) for b in backends]
        line = f"{name:<22}" + "".join(f"{t:>10.3f}" for t in ms)
        if HAS_NUMBA:
            line += f"{ms[0] / ms[1]:>9.2f}x"
        print(line)
        if HAS_NUMBA:
            a, b = fn("numpy"), fn("numba")
            assert np.allclose(a, b, atol=1e-12), f"{name}: backends disagree"


if __name__ == "__main__":
    main()
