#!/usr/bin/env python3
"""Benchmark the Hawkes likelihood kernels: numba JIT vs pure numpy.

Usage: python benchmarks/bench_kernels.py [--cascades 500] [--years 30]
       [--docs-per-year 5] [--repeats 20]

The numba path is also what CASCADE_INFLUENCE_BACKEND=numba (the default)
selects at import time; CASCADE_INFLUENCE_BACKEND=numpy forces the fallback.
"""

import argparse
import time

import numpy as np

from cascade_influence import hawkes as H
from cascade_influence import kernels


def build_problem(n_cascades, n_years, docs_per_year, seed=7):
    rng = np.random.default_rng(seed)
    years = list(range(2000, 2000 + n_years))
    P = docs_per_year * n_years
    alpha_true = rng.uniform(0.4, 2.0, size=P)
    c_true = rng.uniform(0.4, 0.9, size=n_cascades)
    cascades = H.simulate(alpha_true, c_true, gamma=1.0,
                          docs_per_year=docs_per_year, years=years, seed=seed)
    n_counts, ev_t, ev_doc, offsets, doc_ids = H.pack_cascades(
        cascades, (years[0], years[-1]))
    alpha = rng.uniform(0.1, 2.0, size=len(doc_ids))
    c = rng.uniform(0.2, 1.5, size=n_cascades)
    decay = np.exp(-1.0 * np.arange(n_years, dtype=np.float64))
    return n_counts, ev_t, ev_doc, offsets, alpha, c, decay


def time_kernel(fn, args, grad_alpha, grad_c, repeats):
    fn(*args, grad_alpha, grad_c)  # warmup (and numba compile)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        ll = fn(*args, grad_alpha, grad_c)
        times.append(time.perf_counter() - t0)
    return ll, min(times), float(np.median(times))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--cascades", type=int, default=500)
    parser.add_argument("--years", type=int, default=30)
    parser.add_argument("--docs-per-year", type=int, default=5)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    problem = build_problem(args.cascades, args.years, args.docs_per_year)
    n_events = len(problem[1])
    print(f"problem: {args.cascades} cascades x {args.years} years, "
          f"{n_events} events, {len(problem[4])} documents")

    grad_alpha = np.zeros_like(problem[4])
    grad_c = np.zeros_like(problem[5])

    try:
        ll_numba, ll_grad_numba = kernels._build_numba_kernels()
    except ImportError:
        ll_grad_numba = None

    rows = []
    ll_np, best_np, med_np = time_kernel(
        kernels.ll_grad_numpy, problem, grad_alpha, grad_c, args.repeats)
    rows.append(("numpy", ll_np, best_np, med_np))
    if ll_grad_numba is not None:
        ll_nb, best_nb, med_nb = time_kernel(
            ll_grad_numba, problem, grad_alpha, grad_c, args.repeats)
        rows.append(("numba", ll_nb, best_nb, med_nb))

    print(f"{'backend':8s} {'loglik':>16s} {'best':>10s} {'median':>10s} {'speedup':>8s}")
    base = rows[0][3]
    for name, ll, best, med in rows:
        print(f"{name:8s} {ll:16.6f} {best * 1e3:9.2f}ms {med * 1e3:9.2f}ms "
              f"{base / med:7.1f}x")
    if len(rows) == 2:
        rel = abs(rows[0][1] - rows[1][1]) / abs(rows[0][1])
        print(f"log-likelihood agreement: {rel:.2e} relative")


if __name__ == "__main__":
    main()
