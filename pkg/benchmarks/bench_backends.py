"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_backends.py [--repeat 5]

Each case is run on every available backend; outputs are compared so a
speedup is only reported for kernels that agree to 1e-12 relative.
"""

import argparse
import time

import numpy as np

from cascade_lab import _backend
from cascade_lab.cascade import fixed_point_pool, sample_Yn_batch
from cascade_lab.gaussian import XiField, branching_walk, consistent_measure
from cascade_lab.laws import TwoPoint
from cascade_lab.rng import CounterRNG


def _cases():
    law = TwoPoint(0.7)
    return {
        "uniform_block 4x1e6": lambda: _backend.kernels().uniform_block(np.arange(4, dtype=np.uint64), 0, 10**6),
        "normal_block 4x1e6": lambda: _backend.kernels().normal_block(np.arange(4, dtype=np.uint64), 0, 10**6),
        "pool P=1e5 K=20 b=3": lambda: fixed_point_pool(law, 3, 100_000, 20, CounterRNG(1)).values,
        "Y_n b=3 n=6 R=2000": lambda: sample_Yn_batch(law, 3, 6, CounterRNG(2), 2000),
        "walk b=2 n=16": lambda: branching_walk(XiField(2, 16, seed=3), 16),
        "consistent b=3 j=3 L=10": lambda: consistent_measure(3, 3, 10, XiField(3, 10, seed=4)).increments,
    }


def _time(fn, repeat):
    best, value = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - t0)
    return best, np.asarray(value)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    names = _backend.available()
    previous = _backend.backend_name()
    print(f"{'case':28s}" + "".join(f"{n:>12s}" for n in names) + "     speedup  agree")
    try:
        for label, fn in _cases().items():
            times, values = [], []
            for name in names:
                _backend.set_backend(name)
                t, v = _time(fn, args.repeat)
                times.append(t)
                values.append(v)
            agree = all(np.allclose(v, values[0], rtol=1e-12, atol=0) for v in values[1:])
            speed = f"{times[-1] / times[0]:10.1f}x" if len(times) > 1 else "         -"
            print(f"{label:28s}" + "".join(f"{t * 1e3:10.1f}ms" for t in times) + f"  {speed}  {agree}")
    finally:
        _backend.set_backend(previous)


if __name__ == "__main__":
    main()
