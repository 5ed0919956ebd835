"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_core.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from rfconc import _backend, _core_py
from rfconc.hermite import POLY5_COEFFS

try:
    from rfconc import _core
except ImportError:
    _core = None


def cases():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((1024, 2048))
    X = rng.standard_normal((256, 500))
    X /= np.linalg.norm(X, axis=0)
    gram = X.T @ X
    z2 = np.square(POLY5_COEFFS)
    return [
        ("hermite_series deg 5, 2M points", lambda impl: _backend.hermite_series(POLY5_COEFFS, x, impl)),
        ("power_series deg 5, 500x500", lambda impl: _backend.power_series(z2, gram, impl)),
        ("hadamard_power_sums l<=10, 500x500", lambda impl: _backend.hadamard_power_sums(gram, 10, impl)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = [("python", _core_py)] + ([("cython", _core)] if _core is not None else [])
    print(f"{'case':40s} " + " ".join(f"{name:>12s}" for name, _ in impls) + "     speedup")
    for label, fn in cases():
        times = []
        for _, impl in impls:
            fn(impl)
            times.append(min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat)))
        cells = " ".join(f"{t * 1e3:10.2f}ms" for t in times)
        speed = f"{times[0] / times[-1]:8.2f}x" if len(times) > 1 else "       -"
        print(f"{label:40s} {cells} {speed}")
    if _core is None:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
