"""Compare the compiled kernels with the numpy fallback.

Times each per-pixel kernel on random inputs, then a short end-to-end
inpainting solve in a subprocess per backend.

    python3 benchmarks/bench_kernels.py [--size 256] [--repeat 20]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from fairpd import _kernels_py

try:
    from fairpd import _ckernels
except ImportError:
    _ckernels = None

SOLVE = """
import time
from fairpd.kernels import BACKEND
from fairpd.problems import build_ctv_inpaint, synth_phantom
from fairpd.solvers import make_config, run
img = synth_phantom({size})
prob, _ = build_ctv_inpaint(img, seed=0)
cfg = make_config(prob, "PDFP", True, 0.8, "ctv", max_outer={iters}, stop_tol=None)
t = time.perf_counter()
run(prob, cfg)
print(BACKEND, time.perf_counter() - t)
"""


def kernel_cases(size, rng):
    x = rng.standard_normal((size, size))
    p = np.ascontiguousarray(rng.standard_normal((2, size, size)))
    return {
        "grad2d": lambda m: m.grad2d(x),
        "grad2d_adjoint": lambda m: m.grad2d_adjoint(p),
        "soft_threshold": lambda m: m.soft_threshold(x, 0.3),
        "prox_l21": lambda m: m.prox_l21(p, 0.3),
        "project_ball21": lambda m: m.project_ball21(p, 0.3),
    }


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def end_to_end(size, iters):
    out = {}
    for name, env in (("cython", {}), ("python", {"FAIRPD_PURE_PYTHON": "1"})):
        proc = subprocess.run(
            [sys.executable, "-c", SOLVE.format(size=size, iters=iters)],
            env={**os.environ, **env}, capture_output=True, text=True, check=True,
        )
        backend, secs = proc.stdout.split()
        out[name] = (backend, float(secs))
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--iters", type=int, default=200)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"kernels on {args.size}x{args.size}, best of {args.repeat} (ms)")
    print(f"{'kernel':<16}{'cython':>10}{'python':>10}{'speedup':>9}")
    for name, call in kernel_cases(args.size, rng).items():
        tp = best_of(lambda: call(_kernels_py), args.repeat) * 1e3
        if _ckernels is None:
            print(f"{name:<16}{'n/a':>10}{tp:>10.3f}{'':>9}")
            continue
        tc = best_of(lambda: call(_ckernels), args.repeat) * 1e3
        print(f"{name:<16}{tc:>10.3f}{tp:>10.3f}{tp / tc:>8.2f}x")
    print(f"\nFPDFP inpainting, {args.size}x{args.size}, {args.iters} iterations (s)")
    for name, (backend, secs) in end_to_end(args.size, args.iters).items():
        print(f"{name:<16}{secs:>10.3f}  (backend reported: {backend})")


if __name__ == "__main__":
    main()
