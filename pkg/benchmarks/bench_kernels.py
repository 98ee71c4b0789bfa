"""Compare the compiled and pure-numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--paths 100000] [--steps 50] [--repeat 3]

Reports best-of-N wall time per kernel and backend, and the largest absolute
difference between the two backends' outputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from bdglab.kernels import available_backends, backend_module


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--fine-steps", type=int, default=10_000)
    ap.add_argument("--fine-paths", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    seed = 20240501
    sqrt_dt = np.full(args.fine_steps, np.sqrt(1.0 / args.fine_steps))
    cases = {
        f"standard_normals {args.paths}x{args.steps}": lambda m: m.standard_normals(seed, 0, 0, args.paths, args.steps),
        f"brownian_sup_abs {args.fine_paths}x{args.fine_steps}": lambda m: m.brownian_sup_abs(
            seed, 0, 0, args.fine_paths, sqrt_dt, 1
        ),
    }
    backends = available_backends()
    print(f"{'kernel':<40} " + " ".join(f"{b:>12}" for b in backends) + f" {'speedup':>9} {'max |diff|':>11}")
    for label, run in cases.items():
        times, outs = [], []
        for b in backends:
            t, out = best_of(lambda: run(backend_module(b)), args.repeat)
            times.append(t)
            outs.append(out)
        speed = times[-1] / times[0] if len(times) > 1 else 1.0
        diff = float(np.max(np.abs(outs[0] - outs[-1]))) if len(outs) > 1 else 0.0
        print(f"{label:<40} " + " ".join(f"{t:>11.4f}s" for t in times) + f" {speed:>8.1f}x {diff:>11.2e}")


if __name__ == "__main__":
    main()
