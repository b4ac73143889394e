"""Compare the compiled and numpy kernel backends.

Run with ``python3 benchmarks/bench_kernels.py``. Prints the median time of
each kernel per register size, then end-to-end direct-measure witness runs.
"""
import argparse
import math
import statistics
import timeit

import numpy as np

from macrowitness import kernels
from macrowitness.circuits import cat_preparation_circuit
from macrowitness.noise import FITTED_NOISE, idle_channel
from macrowitness.protocols import witness_experiment
from macrowitness.qstate import HADAMARD


def _random_state(n, rng):
    a = rng.normal(size=(1 << n, 1 << n)) + 1j * rng.normal(size=(1 << n, 1 << n))
    rho = a @ a.conj().T
    return np.ascontiguousarray(rho / np.trace(rho))


def _median(fn, repeat):
    return statistics.median(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(sizes, repeat):
    rng = np.random.default_rng(0)
    h = np.ascontiguousarray(HADAMARD.matrix)
    sup = np.ascontiguousarray(idle_channel(FITTED_NOISE, 0.4).superoperator)
    rows = []
    for n in sizes:
        rho = _random_state(n, rng)
        for name in kernels.available_backends():
            k = kernels.get_backend(name)
            work = rho.copy()
            rows.append((n, name, "apply_1q", _median(lambda: k.apply_1q(work, n, n // 2, h), repeat)))
            rows.append((n, name, "apply_cnot", _median(lambda: k.apply_cnot(work, n, 0, n - 1), repeat)))
            rows.append((n, name, "apply_1q_superop", _median(lambda: k.apply_1q_superop(work, n, n // 2, sup), repeat)))
    return rows


def bench_witness(ns, repeat):
    rows = []
    for n in ns:
        prep = cat_preparation_circuit(n, math.pi / 2)
        for name in kernels.available_backends():
            with kernels.use_backend(name):
                t = _median(lambda: witness_experiment(prep, FITTED_NOISE), repeat)
            rows.append((n, name, "direct-measure W", t))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 6, 8, 10, 12])
    ap.add_argument("--witness", type=int, nargs="+", default=[2, 3, 4, 5])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(kernels.available_backends())}")
    print(f"{'n':>3} {'backend':>8} {'operation':>18} {'median [ms]':>12}")
    rows = bench_kernels(args.sizes, args.repeat) + bench_witness(args.witness, max(1, args.repeat // 2))
    for n, name, op, t in rows:
        print(f"{n:>3} {name:>8} {op:>18} {1e3 * t:>12.3f}")
    by = {(n, op, name): t for n, name, op, t in rows}
    if "cython" in kernels.available_backends():
        print("\nspeed-up of cython over python:")
        for (n, op, name), t in sorted(by.items()):
            if name == "python" and (n, op, "cython") in by:
                print(f"{n:>3} {op:>18} {t / by[(n, op, 'cython')]:>8.2f}x")


if __name__ == "__main__":
    main()
