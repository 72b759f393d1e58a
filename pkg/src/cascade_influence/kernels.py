"""Hot numeric kernels for the discrete-time Hawkes likelihood.

Two interchangeable implementations: numba-jitted loops (default) and a
vectorized pure-numpy fallback. Selection is by the environment variable
``CASCADE_INFLUENCE_BACKEND`` ("numba" or "numpy"); numpy is used
automatically when numba is not importable. Both run a fixed summation
order per cascade, so repeated calls are bit-stable within a backend.

Flat cascade layout shared by all kernels:
  n_counts  (W, T) float64   event counts per cascade and year index
  ev_t      (E,)  int64      event year index (0-based within the span)
  ev_doc    (E,)  int64      event mark as dense doc index
  offsets   (W+1,) int64     event slice per cascade
  decay     (T,)  float64    exp(-gamma * dt) lookup for dt in [0, T)
"""

from __future__ import annotations

import os

import numpy as np

_REQUESTED = os.environ.get("CASCADE_INFLUENCE_BACKEND", "numba").strip().lower()
if _REQUESTED not in ("numba", "numpy"):
    raise ValueError(
        f"CASCADE_INFLUENCE_BACKEND must be 'numba' or 'numpy', got {_REQUESTED!r}")


def ll_numpy(n_counts, ev_t, ev_doc, offsets, alpha, c, decay):
    """Poisson log likelihood, dropping the ln n! constant."""
    W, T = n_counts.shape
    t_grid = np.arange(T)
    ll = 0.0
    for w in range(W):
        lo, hi = offsets[w], offsets[w + 1]
        et, ed = ev_t[lo:hi], ev_doc[lo:hi]
        dt = t_grid[:, None] - et[None, :]
        kern = np.where(dt > 0, decay[np.clip(dt, 0, T - 1)], 0.0)
        lam = c[w] + kern @ alpha[ed]
        n = n_counts[w]
        ll += float(np.sum(n * np.log(lam) - lam))
    return ll


def ll_grad_numpy(n_counts, ev_t, ev_doc, offsets, alpha, c, decay, grad_alpha, grad_c):
    """Log likelihood plus gradients w.r.t. alpha (per doc) and c (per cascade)."""
    W, T = n_counts.shape
    t_grid = np.arange(T)
    grad_alpha[:] = 0.0
    ll = 0.0
    for w in range(W):
        lo, hi = offsets[w], offsets[w + 1]
        et, ed = ev_t[lo:hi], ev_doc[lo:hi]
        dt = t_grid[:, None] - et[None, :]
        kern = np.where(dt > 0, decay[np.clip(dt, 0, T - 1)], 0.0)
        lam = c[w] + kern @ alpha[ed]
        n = n_counts[w]
        ll += float(np.sum(n * np.log(lam) - lam))
        resid = n / lam - 1.0
        grad_c[w] = resid.sum()
        np.add.at(grad_alpha, ed, kern.T @ resid)
    return ll


def _build_numba_kernels():
    from numba import njit

    @njit(cache=True)
    def ll_numba(n_counts, ev_t, ev_doc, offsets, alpha, c, decay):
        W, T = n_counts.shape
        ll = 0.0
        for w in range(W):
            lo, hi = offsets[w], offsets[w + 1]
            for t in range(T):
                lam = c[w]
                for j in range(lo, hi):
                    dt = t - ev_t[j]
                    if dt > 0:
                        lam += alpha[ev_doc[j]] * decay[dt]
                ll += n_counts[w, t] * np.log(lam) - lam
        return ll

    @njit(cache=True)
    def ll_grad_numba(n_counts, ev_t, ev_doc, offsets, alpha, c, decay,
                      grad_alpha, grad_c):
        W, T = n_counts.shape
        grad_alpha[:] = 0.0
        ll = 0.0
        for w in range(W):
            lo, hi = offsets[w], offsets[w + 1]
            gc = 0.0
            for t in range(T):
                lam = c[w]
                for j in range(lo, hi):
                    dt = t - ev_t[j]
                    if dt > 0:
                        lam += alpha[ev_doc[j]] * decay[dt]
                n = n_counts[w, t]
                ll += n * np.log(lam) - lam
                resid = n / lam - 1.0
                gc += resid
                for j in range(lo, hi):
                    dt = t - ev_t[j]
                    if dt > 0:
                        grad_alpha[ev_doc[j]] += resid * decay[dt]
            grad_c[w] = gc
        return ll

    return ll_numba, ll_grad_numba


if _REQUESTED == "numba":
    try:
        ll_numba, ll_grad_numba = _build_numba_kernels()
        poisson_ll, poisson_ll_grad = ll_numba, ll_grad_numba
        BACKEND = "numba"
    except ImportError:
        poisson_ll, poisson_ll_grad = ll_numpy, ll_grad_numpy
        BACKEND = "numpy"
else:
    poisson_ll, poisson_ll_grad = ll_numpy, ll_grad_numpy
    BACKEND = "numpy"
