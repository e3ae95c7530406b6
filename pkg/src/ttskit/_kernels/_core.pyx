# Compiled versions of the hot kernels. Semantics must match pyref.py
# exactly: same greedy tie-break order, same risk-set accumulation order.

import numpy as np

cimport cython
from libc.math cimport log


@cython.boundscheck(False)
@cython.wraparound(False)
def greedy_pairs(double[:, ::1] dist):
    """Greedy best-first matcher over a (n_ref, n_pred) distance matrix.

    Commits the globally smallest unmatched pair each round until one side
    is exhausted; ties resolved by smallest reference index then smallest
    predicted index. Returns (ref_idx, pred_idx, distances).

    Per-row minima are cached and a row is rescanned only when the column
    holding its cached minimum gets consumed, so typical rounds cost
    O(n_ref) instead of a full matrix rescan.
    """
    cdef Py_ssize_t n_ref = dist.shape[0]
    cdef Py_ssize_t n_pred = dist.shape[1]
    cdef Py_ssize_t k = n_ref if n_ref < n_pred else n_pred
    if k == 0:
        return (
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.float64),
        )

    ref_out = np.empty(k, dtype=np.int64)
    pred_out = np.empty(k, dtype=np.int64)
    dist_out = np.empty(k, dtype=np.float64)
    cdef long long[::1] ref_v = ref_out
    cdef long long[::1] pred_v = pred_out
    cdef double[::1] dist_v = dist_out

    active_r = np.ones(n_ref, dtype=np.uint8)
    active_p = np.ones(n_pred, dtype=np.uint8)
    row_min = np.empty(n_ref, dtype=np.float64)
    row_arg = np.empty(n_ref, dtype=np.int64)
    cdef unsigned char[::1] ar = active_r
    cdef unsigned char[::1] ap = active_p
    cdef double[::1] rmin = row_min
    cdef long long[::1] rarg = row_arg

    cdef Py_ssize_t step, r, p, best_r, arg
    cdef double best, d
    with nogil:
        for r in range(n_ref):
            best = dist[r, 0]
            arg = 0
            for p in range(1, n_pred):
                d = dist[r, p]
                if d < best:
                    best = d
                    arg = p
            rmin[r] = best
            rarg[r] = arg
        for step in range(k):
            best_r = -1
            best = 0.0
            for r in range(n_ref):
                if ar[r] and (best_r < 0 or rmin[r] < best):
                    best = rmin[r]
                    best_r = r
            ref_v[step] = best_r
            pred_v[step] = rarg[best_r]
            dist_v[step] = best
            ar[best_r] = 0
            ap[rarg[best_r]] = 0
            for r in range(n_ref):
                if ar[r] and rarg[r] == pred_v[step]:
                    best = 0.0
                    arg = -1
                    for p in range(n_pred):
                        if ap[p]:
                            d = dist[r, p]
                            if arg < 0 or d < best:
                                best = d
                                arg = p
                    rmin[r] = best
                    rarg[r] = arg
    return ref_out, pred_out, dist_out


@cython.boundscheck(False)
@cython.wraparound(False)
def efron_sum_log_denom(double[::1] theta,
                        long long[::1] starts,
                        long long[::1] sizes,
                        long long[::1] n_events):
    """Sum of log tie-corrected denominators; see pyref.efron_sum_log_denom."""
    cdef Py_ssize_t g, i, l, s, d, size
    cdef Py_ssize_t n_groups = starts.shape[0]
    cdef double s0 = 0.0, s0_tied, total = 0.0, f
    with nogil:
        for g in range(n_groups):
            s = starts[g]
            size = sizes[g]
            d = n_events[g]
            for i in range(s, s + size):
                s0 += theta[i]
            if d == 0:
                continue
            s0_tied = 0.0
            for i in range(s, s + d):
                s0_tied += theta[i]
            for l in range(d):
                f = <double> l / <double> d
                total += log(s0 - f * s0_tied)
    return total


@cython.boundscheck(False)
@cython.wraparound(False)
def efron_score_info(double[::1] theta,
                     double[:, ::1] x,
                     long long[::1] starts,
                     long long[::1] sizes,
                     long long[::1] n_events):
    """Accumulators for loglik/score/information; see pyref.efron_score_info."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t p = x.shape[1]
    cdef Py_ssize_t n_groups = starts.shape[0]

    grad_out = np.zeros(p, dtype=np.float64)
    info_out = np.zeros((p, p), dtype=np.float64)
    s1_risk = np.zeros(p, dtype=np.float64)
    s2_risk = np.zeros((p, p), dtype=np.float64)
    s1_tied = np.zeros(p, dtype=np.float64)
    s2_tied = np.zeros((p, p), dtype=np.float64)
    z1 = np.zeros(p, dtype=np.float64)

    cdef double[::1] grad = grad_out
    cdef double[:, ::1] info = info_out
    cdef double[::1] s1r = s1_risk
    cdef double[:, ::1] s2r = s2_risk
    cdef double[::1] s1t = s1_tied
    cdef double[:, ::1] s2t = s2_tied
    cdef double[::1] z1v = z1

    cdef Py_ssize_t g, i, l, a, b, s, d, size
    cdef double s0_risk = 0.0, s0_tied, th, f, denom, inv, inv2, z2ab
    cdef double sum_log = 0.0
    with nogil:
        for g in range(n_groups):
            s = starts[g]
            size = sizes[g]
            d = n_events[g]
            for i in range(s, s + size):
                th = theta[i]
                s0_risk += th
                for a in range(p):
                    s1r[a] += th * x[i, a]
                    for b in range(p):
                        s2r[a, b] += th * x[i, a] * x[i, b]
            if d == 0:
                continue
            s0_tied = 0.0
            for a in range(p):
                s1t[a] = 0.0
                for b in range(p):
                    s2t[a, b] = 0.0
            for i in range(s, s + d):
                th = theta[i]
                s0_tied += th
                for a in range(p):
                    s1t[a] += th * x[i, a]
                    for b in range(p):
                        s2t[a, b] += th * x[i, a] * x[i, b]
            for l in range(d):
                f = <double> l / <double> d
                denom = s0_risk - f * s0_tied
                sum_log += log(denom)
                inv = 1.0 / denom
                inv2 = inv * inv
                for a in range(p):
                    z1v[a] = s1r[a] - f * s1t[a]
                for a in range(p):
                    grad[a] += z1v[a] * inv
                    for b in range(p):
                        z2ab = s2r[a, b] - f * s2t[a, b]
                        info[a, b] += z2ab * inv - z1v[a] * z1v[b] * inv2
    return sum_log, grad_out, info_out
