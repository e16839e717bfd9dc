"""Compare the numba and numpy backends of the numeric kernels.

    python3 benchmarks/bench_kernels.py [--states 20000] [--steps 200] [--repeat 5]

Times transient propagation on two random sparse chains, batch moment
accumulation and a transient curve of the or3 test chain. The first numba
call (JIT compilation) is excluded from the timings.
"""

from __future__ import annotations

import argparse
import sys
import timeit
from pathlib import Path

import numpy as np

from adrisk import _kernels
from adrisk.dtmc import expand, transient_curve
from adrisk.model import load_model

ROOT = Path(__file__).resolve().parents[1]


def random_chain(n: int, fanout: int, seed: int):
    rng = np.random.default_rng(seed)
    counts = rng.integers(1, fanout + 1, size=n)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    indices = rng.integers(0, n, size=indptr[-1])
    data = rng.random(indptr[-1])
    sums = np.add.reduceat(data, indptr[:-1])
    data /= np.repeat(sums, counts)
    return indptr, indices, data


def best_of(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--states", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--runs", type=int, default=2_000, help="rows of the moments matrix")
    ap.add_argument("--cells", type=int, default=800, help="columns of the moments matrix")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1

    indptr, indices, data = random_chain(args.states, 4, 0)
    start = np.zeros(args.states)
    start[0] = 1.0
    mask = np.random.default_rng(1).random(args.states) < 0.1
    values = (np.random.default_rng(2).random((args.runs, args.cells)) < 0.3).astype(np.float64)

    big = args.states * 10
    b_indptr, b_indices, b_data = random_chain(big, 4, 3)
    b_start = np.zeros(big)
    b_start[0] = 1.0
    b_mask = np.random.default_rng(4).random(big) < 0.1
    chain = expand(load_model(ROOT / "tests" / "fixtures" / "or3.adt"))

    cases = {
        f"propagate ({args.states} states, {args.steps} steps)":
            lambda: _kernels.propagate(indptr, indices, data, start, mask, args.steps),
        f"propagate ({big} states, {args.steps} steps)":
            lambda: _kernels.propagate(b_indptr, b_indices, b_data, b_start, b_mask, args.steps),
        f"batch_moments ({args.runs} x {args.cells})":
            lambda: _kernels.batch_moments(values),
        f"transient_curve or3 ({chain.num_states} states, {args.steps} steps)":
            lambda: transient_curve(chain, "goal", args.steps),
    }

    print(f"{'kernel':<50} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}")
    for name, fn in cases.items():
        timings = {}
        results = {}
        for backend in ("numpy", "numba"):
            _kernels.set_backend(backend)
            results[backend] = fn()  # warm-up; compiles on the numba side
            timings[backend] = best_of(fn, args.repeat)
        a, b = results["numpy"], results["numba"]
        same = all(np.allclose(x, y, atol=1e-12) for x, y in zip(a, b)) if isinstance(a, tuple) else np.allclose(a, b, atol=1e-12)
        if not same:
            print(f"{name}: backends disagree", file=sys.stderr)
            return 1
        tn, tb = timings["numpy"] * 1e3, timings["numba"] * 1e3
        print(f"{name:<50} {tn:>11.2f} {tb:>11.2f} {tn / tb:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
