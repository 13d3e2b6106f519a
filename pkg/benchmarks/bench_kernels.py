"""Benchmark the compiled loss kernels against the NumPy fallback.

Times each row-wise kernel on a grid of batch/class shapes and reports
microseconds per call plus the compiled-over-python speedup. Also
cross-checks that the two backends agree numerically (they match to
~1e-13 relative, not bit-for-bit).

Usage:
    python benchmarks/bench_kernels.py [--repeats N] [--temperature T]
"""

import argparse
import time

import numpy as np

from tempkd._kernels import available_backends

SHAPES = ((64, 10), (256, 10), (256, 100), (1024, 100), (4096, 128))


def _time_call(fn, args, repeats):
    fn(*args)  # warm up
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best * 1e6  # microseconds


def _kernel_calls(rng, n, c, temperature):
    teacher = rng.normal(0.0, 2.0, size=(n, c))
    student = rng.normal(0.0, 2.0, size=(n, c))
    labels = rng.integers(0, c, size=n)
    return (
        ("softmax_rows", (student, temperature)),
        ("cross_entropy", (student, labels)),
        ("cross_entropy_grad", (student, labels)),
        ("kd_value", (teacher, student, temperature)),
        ("kd_grad", (teacher, student, temperature)),
    )


def check_agreement(backends, rng, temperature):
    worst = 0.0
    for n, c in SHAPES[:3]:
        for name, args in _kernel_calls(rng, n, c, temperature):
            outs = [np.asarray(getattr(mod, name)(*args))
                    for mod in backends.values()]
            if len(outs) < 2:
                return None
            scale = max(1.0, float(np.max(np.abs(outs[0]))))
            worst = max(worst, float(np.max(np.abs(outs[0] - outs[1]))) / scale)
    return worst


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50,
                        help="timing repeats per kernel (default 50)")
    parser.add_argument("--temperature", type=float, default=4.0,
                        help="softening temperature (default 4.0)")
    args = parser.parse_args()

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    if len(backends) < 2:
        print("compiled extension not importable; nothing to compare")

    rng = np.random.default_rng(0)
    agreement = check_agreement(backends, rng, args.temperature)
    if agreement is not None:
        print(f"cross-backend agreement: {agreement:.2e} relative\n")

    header = f"{'kernel':<20} {'shape':<12}"
    for name in backends:
        header += f" {name + ' us':>12}"
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)
    print("-" * len(header))

    for n, c in SHAPES:
        for name, call_args in _kernel_calls(rng, n, c, args.temperature):
            times = [
                _time_call(getattr(mod, name), call_args, args.repeats)
                for mod in backends.values()
            ]
            line = f"{name:<20} {f'{n}x{c}':<12}"
            for t in times:
                line += f" {t:>12.1f}"
            if len(times) == 2:
                base = times[list(backends).index('python')]
                fast = times[list(backends).index('compiled')]
                line += f" {base / fast:>8.1f}x"
            print(line)
        print()


if __name__ == "__main__":
    main()
