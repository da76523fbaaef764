"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the three hot paths on representative workloads and verifies that the
two backends produce matching scores (the node-count loops consume RNG
streams differently, so those are compared on throughput only).

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from mps._kernels import _pyref
from mps.resampling import derive_rng

try:
    from mps._kernels import _core
except ImportError:
    _core = None


def timeit(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def scores_workload(n, p, c, m, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    y = x[:, 0] + 0.5 * x[:, 1] + rng.standard_normal(n)
    sel = np.arange(c, dtype=np.int64)
    cand = np.arange(c, p, dtype=np.int64)
    rows = np.sort(rng.choice(n, size=m, replace=False)).astype(np.int64)
    return x, y, rows, sel, cand


def bench_scores(name, py_fn, core_fn, calls, atol):
    t_py, out_py = timeit(lambda: [py_fn(*args) for args in calls])
    if core_fn is None:
        print(f"{name:<34} python {1e3 * t_py:8.2f} ms   (no compiled backend)")
        return
    t_c, out_c = timeit(lambda: [core_fn(*args) for args in calls])
    worst = 0.0
    for a, b in zip(out_py, out_c):
        finite = np.isfinite(a)
        assert np.array_equal(finite, np.isfinite(b))
        if finite.any():
            worst = max(worst, float(np.abs(a[finite] - b[finite]).max()))
    assert worst <= atol, f"{name}: backends disagree by {worst}"
    print(f"{name:<34} python {1e3 * t_py:8.2f} ms   compiled {1e3 * t_c:8.2f} ms"
          f"   speedup {t_py / t_c:6.1f}x   max diff {worst:.1e}")


def bench_node_counts(name, py_fn, core_fn):
    t_py, (counts_py, total_py) = timeit(py_fn, repeat=1)
    if core_fn is None:
        print(f"{name:<34} python {1e3 * t_py:8.2f} ms   (no compiled backend)")
        return
    t_c, (counts_c, total_c) = timeit(core_fn, repeat=1)
    print(f"{name:<34} python {1e3 * t_py:8.2f} ms   compiled {1e3 * t_c:8.2f} ms"
          f"   speedup {t_py / t_c:6.1f}x   draws {total_py}/{total_c}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args()
    scale = 0.25 if args.quick else 1.0

    print(f"compiled backend available: {_core is not None}\n")

    # candidate scoring: simulation-sized and second-order-expansion-sized
    small = [scores_workload(100, 10, 2, 10, seed=s) for s in range(int(200 * scale))]
    wide = [scores_workload(300, 64, 5, 17, seed=s) for s in range(int(50 * scale))]
    bench_scores("ols scores (n=100, p=10, m=10)", _pyref.ols_scores,
                 None if _core is None else _core.ols_scores, small, 1e-9)
    bench_scores("ols scores (n=300, p=64, m=17)", _pyref.ols_scores,
                 None if _core is None else _core.ols_scores, wide, 1e-9)

    logit = []
    for s in range(int(60 * scale)):
        x, y, rows, sel, cand = scores_workload(300, 9, 1, 26, seed=s)
        yb = (y > 0).astype(float)
        logit.append((x, yb, rows, sel, cand, 25, 1e-8))
    bench_scores("logistic scores (n=300, p=9, m=26)", _pyref.logistic_scores,
                 None if _core is None else _core.logistic_scores, logit, 1e-6)

    # full rule-R node loops
    rng = np.random.default_rng(3)
    x = rng.standard_normal((100, 10))
    y = x @ np.r_[np.ones(5), np.zeros(5)] + rng.standard_normal(100) * np.sqrt(5 / 0.25)
    sel = np.array([], dtype=np.int64)
    cand = np.arange(10, dtype=np.int64)
    r = int(200 * scale) or 10
    bench_node_counts(
        f"ols node loop (low SNR, r={r})",
        lambda: _pyref.ols_node_counts(derive_rng(0, "b"), x, y, sel, cand, 10, r),
        None if _core is None else
        lambda: _core.ols_node_counts(derive_rng(0, "b").bit_generator,
                                      x, y, sel, cand, 10, r))

    nsim = int(100_000 * scale) or 10_000
    bench_node_counts(
        f"rule-R experiments (M=10, r=200, nsim={nsim})",
        lambda: (None, _pyref.rule_r_first_cell_counts(
            derive_rng(1, "b"), 10, 200, nsim).sum()),
        None if _core is None else
        lambda: (None, _core.rule_r_first_cell_counts(
            derive_rng(1, "b").bit_generator, 10, 200, nsim).sum()))


if __name__ == "__main__":
    main()
