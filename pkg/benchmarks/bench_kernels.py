"""Compiled kernels versus the numpy fallback on representative workloads.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import math
import sys
import time

import numpy as np

from gdirichlet import _kernels_py

try:
    from gdirichlet import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def _time(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def workloads(rng):
    d = 4
    B = np.triu(rng.uniform(-1, 1, (d, d)), 1) + np.diag(rng.uniform(0.2, 0.6, d))
    s = rng.uniform(-0.5, 0.5, d)
    lo, hi = -np.full(d, 3.0), np.full(d, 3.0)
    enum_args = (np.ascontiguousarray(B), s, lo, hi, 10_000_000, True, 10_000_000)

    n = 200_000
    lefts = np.sort(rng.exponential(1.0, n).cumsum())
    rights = lefts + rng.exponential(1.5, n)
    merge_args = (lefts, rights, 1e-12)

    K, G = 400, 2000
    R = rng.random((K, 1))
    Q = rng.integers(1, 10_000, (K, 1)).astype(float)
    ts = np.geomspace(1, 1e6, G)
    grid_args = (R, Q, np.ascontiguousarray(ts[:, None]), np.ascontiguousarray(1 / ts[:, None]))
    return {"enum_upper": enum_args, "merge_sorted": merge_args, "systole_grid": grid_args}


def run(repeat=5, seed=0):
    rng = np.random.default_rng(seed)
    results = []
    for name, args in workloads(rng).items():
        t_py, out_py = _time(lambda: getattr(_kernels_py, name)(*args), repeat)
        row = {"kernel": name, "python_s": t_py}
        if _compiled is not None:
            t_c, out_c = _time(lambda: getattr(_compiled, name)(*args), repeat)
            row["compiled_s"] = t_c
            row["speedup"] = t_py / t_c if t_c > 0 else math.inf
            a = out_py[0] if isinstance(out_py, tuple) else out_py
            b = out_c[0] if isinstance(out_c, tuple) else out_c
            if name == "enum_upper":
                a = a[np.lexsort(a.T[::-1])]
                b = b[np.lexsort(b.T[::-1])]
            row["agree"] = bool(np.array_equal(a, b))
        results.append(row)
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    results = run(args.repeat, args.seed)
    if _compiled is None:
        print("compiled extension not available; fallback timings only")
    for r in results:
        line = f"{r['kernel']:<14} python {r['python_s'] * 1e3:9.2f} ms"
        if "compiled_s" in r:
            line += (f"   compiled {r['compiled_s'] * 1e3:9.2f} ms   x{r['speedup']:.1f}"
                     f"   agree={r['agree']}")
        print(line)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0 if all(r.get("agree", True) for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
