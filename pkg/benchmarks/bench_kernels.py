"""Compare the compiled kernels with the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Times each kernel under both backends and a short fit run in a
subprocess per backend (the backend is fixed at import time).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from shinefs._backend import available_backends, get_backend

FIT_SNIPPET = """
import time
from shinefs import BACKEND
from shinefs.data import SynthSpec, synth_generate
from shinefs.model import HyperParams
from shinefs.optimizer import fit
from shinefs.evaluation import evaluate_selection
ds = synth_generate(SynthSpec(n={n}, seed=0))
p = HyperParams(c=4, rel_tol=0.0, max_outer_iters=5)
t0 = time.perf_counter(); res = fit(ds, p, record_steps=False); t1 = time.perf_counter()
evaluate_selection(ds, res.ranking[:30], 4, restarts=30); t2 = time.perf_counter()
print(BACKEND, t1 - t0, t2 - t1)
"""


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    cases = []
    for n in (200, 800):
        costs = rng.uniform(size=(n, n))
        ex = np.arange(n, dtype=np.intp)
        cases.append((f"ksparse_rows n={n} k=5", lambda K, c=costs, e=ex: K.ksparse_rows(c, 5, e)))
        M = rng.standard_normal((8, n))
        cases.append((f"project_simplex_columns 8x{n}", lambda K, M=M: K.project_simplex_columns(M)))
        X, C = rng.standard_normal((n, 30)), rng.standard_normal((4, 30))
        cases.append((f"lloyd_assign n={n} c=4", lambda K, X=X, C=C: K.lloyd_assign(X, C)))
    names = available_backends()
    print(f"{'kernel':34s}" + "".join(f"{b:>12s}" for b in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases:
        times = []
        for b in names:
            K = get_backend(b)
            number = 20
            times.append(min(timeit.repeat(lambda: fn(K), number=number, repeat=repeat)) / number)
        row = f"{label:34s}" + "".join(f"{t * 1e3:10.3f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[1] / times[0]:11.1f}x"
        print(row)


def bench_fit(n):
    print(f"\nfit (5 iterations) + 30 k-means restarts, n={n}")
    for b in available_backends():
        env = dict(os.environ)
        if b == "python":
            env["SHINEFS_PURE_PYTHON"] = "1"
        out = subprocess.run([sys.executable, "-c", FIT_SNIPPET.format(n=n)], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:8s} fit {float(out[1]):7.3f}s   evaluation {float(out[2]):7.3f}s")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=400)
    args = ap.parse_args()
    bench_kernels(args.repeat)
    bench_fit(args.n)
