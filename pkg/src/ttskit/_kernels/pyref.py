"""Pure-Python (numpy) implementations of the hot kernels.

These are the fallback used when the compiled extension is unavailable and
the reference the extension is benchmarked against.  Both backends must
implement identical semantics: the greedy matcher commits pairs in exactly
the same order (including tie-breaks), and the partial-likelihood
accumulators follow the same summation order over risk sets.
"""

from __future__ import annotations

import numpy as np

__all__ = ["greedy_pairs", "efron_sum_log_denom", "efron_score_info"]


def greedy_pairs(dist: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the greedy best-first matcher to exhaustion.

    Parameters
    ----------
    dist : (n_ref, n_pred) float64 array
        Pairwise distances, reference rows by predicted columns.  All
        entries must be finite.

    Returns
    -------
    (ref_idx, pred_idx, distances)
        The commit sequence: at each step the globally smallest distance
        among unmatched rows/columns is committed, ties broken by smallest
        reference index then smallest predicted index.  Distances are
        non-decreasing along the sequence.
    """
    d = np.array(dist, dtype=np.float64, copy=True)
    n_ref, n_pred = d.shape
    k = min(n_ref, n_pred)
    ref_out = np.empty(k, dtype=np.int64)
    pred_out = np.empty(k, dtype=np.int64)
    dist_out = np.empty(k, dtype=np.float64)
    for step in range(k):
        # argmin returns the first flat index among ties; row-major order on
        # the (ref, pred) matrix realizes the documented tie-break.
        flat = int(np.argmin(d))
        r, p = divmod(flat, n_pred)
        ref_out[step] = r
        pred_out[step] = p
        dist_out[step] = d[r, p]
        d[r, :] = np.inf
        d[:, p] = np.inf
    return ref_out, pred_out, dist_out


def _risk_set_sums(theta, starts, sizes):
    # Cumulative sums over subjects sorted by descending duration; the value
    # at the end of group g is the risk-set total for that group's time.
    ends = np.asarray(starts) + np.asarray(sizes)
    cs0 = np.cumsum(theta)
    return ends, cs0


def efron_sum_log_denom(theta, starts, sizes, n_events):
    """Sum of log tie-corrected denominators over all event groups.

    ``theta`` holds exp(linear predictor) sorted by descending duration with
    event rows first inside each tied-duration group; ``starts``/``sizes``
    delimit the groups and ``n_events[g]`` counts the event rows leading
    group ``g``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    starts = np.asarray(starts, dtype=np.int64)
    sizes = np.asarray(sizes, dtype=np.int64)
    n_events = np.asarray(n_events, dtype=np.int64)

    ends, cs0 = _risk_set_sums(theta, starts, sizes)
    total = 0.0
    for g in range(len(starts)):
        d = int(n_events[g])
        if d == 0:
            continue
        s = int(starts[g])
        s0_risk = cs0[ends[g] - 1]
        s0_tied = float(theta[s : s + d].sum())
        ls = np.arange(d, dtype=np.float64) / d
        total += float(np.log(s0_risk - ls * s0_tied).sum())
    return total


def efron_score_info(theta, x, starts, sizes, n_events):
    """Denominator-side accumulators of the tie-corrected partial likelihood.

    Returns ``(sum_log_denom, grad_denom, info)`` where the full quantities
    are recovered as::

        loglik = sum(eta[event rows]) - sum_log_denom
        score  = sum(x[event rows])   - grad_denom
        observed information = info          (Hessian = -info)
    """
    theta = np.asarray(theta, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    starts = np.asarray(starts, dtype=np.int64)
    sizes = np.asarray(sizes, dtype=np.int64)
    n_events = np.asarray(n_events, dtype=np.int64)
    n, p = x.shape

    ends = starts + sizes
    wx = theta[:, None] * x
    cs0 = np.cumsum(theta)
    cs1 = np.cumsum(wx, axis=0)
    cs2 = np.cumsum(wx[:, :, None] * x[:, None, :], axis=0)

    sum_log = 0.0
    grad = np.zeros(p)
    info = np.zeros((p, p))
    for g in range(len(starts)):
        d = int(n_events[g])
        if d == 0:
            continue
        s = int(starts[g])
        e = ends[g] - 1
        s0_risk = cs0[e]
        s1_risk = cs1[e]
        s2_risk = cs2[e]
        th_d = theta[s : s + d]
        x_d = x[s : s + d]
        s0_tied = float(th_d.sum())
        s1_tied = th_d @ x_d
        s2_tied = (x_d * th_d[:, None]).T @ x_d
        f = np.arange(d, dtype=np.float64)[:, None] / d
        denom = s0_risk - f[:, 0] * s0_tied
        z1 = s1_risk[None, :] - f * s1_tied[None, :]
        z2 = s2_risk[None, :, :] - f[:, :, None] * s2_tied[None, :, :]
        sum_log += float(np.log(denom).sum())
        grad += (z1 / denom[:, None]).sum(axis=0)
        info += (z2 / denom[:, None, None]).sum(axis=0)
        info -= np.einsum("li,lj,l->ij", z1, z1, 1.0 / denom**2)
    return sum_log, grad, info
