"""Shared test helpers: independent oracles and random-instance generators.

The oracles here deliberately re-derive every quantity from first
principles (full rescans, exhaustive enumeration, step integration) and
share no code with the package implementations they check.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from ttskit.timeline import Timeline, TimelineEvent

VOCAB = (
    "fever", "cough", "nausea", "vomiting", "chest", "pain", "dyspnea",
    "fatigue", "rash", "headache", "dizziness", "edema",
)


def random_timeline(rng: np.random.Generator, case_id: str, n_events: int) -> Timeline:
    events = []
    for _ in range(n_events):
        k = int(rng.integers(1, 4))
        text = " ".join(rng.choice(VOCAB, size=k, replace=True))
        t = float(rng.choice([-72.0, -24.0, 0.0, 0.0, 24.0, 48.0, 96.0]))
        if rng.random() < 0.3:
            t = float(np.round(rng.normal(100.0, 50.0), 3))
        events.append(TimelineEvent(text=text, time_hours=t))
    return Timeline(case_id=case_id, events=tuple(events))


def naive_greedy(dist, threshold: float):
    """Full-rescan greedy oracle over a (n_pred, n_ref) distance table.

    Re-scans every unmatched cell each round; ties resolved by smallest
    reference index, then smallest predicted index.
    """
    n_pred = len(dist)
    n_ref = len(dist[0]) if n_pred else 0
    active_p = set(range(n_pred))
    active_r = set(range(n_ref))
    pairs = []
    while active_p and active_r:
        best = None
        for r in sorted(active_r):
            for p in sorted(active_p):
                d = dist[p][r]
                if best is None or d < best[2]:
                    best = (p, r, d)
        if best[2] > threshold:
            break
        pairs.append(best)
        active_p.remove(best[0])
        active_r.remove(best[1])
    return pairs


def exhaustive_concordance(t_pred, t_ref):
    """O(k^2) pair enumeration; None when no pair is comparable."""
    k = len(t_pred)
    numerator = 0.0
    comparable = 0
    for i in range(k):
        for j in range(i + 1, k):
            if t_ref[i] == t_ref[j]:
                continue
            comparable += 1
            if t_pred[i] == t_pred[j]:
                numerator += 0.5
            elif (t_pred[i] - t_pred[j]) * (t_ref[i] - t_ref[j]) > 0:
                numerator += 1.0
    if comparable == 0:
        return None
    return numerator / comparable


def aultc_step_integration(values, cap: float) -> float:
    """Exact area under the empirical CDF of capped log errors on [0, L]."""
    big_l = math.log1p(cap)
    ys = sorted(min(math.log1p(v), big_l) for v in values)
    n = len(ys)
    breaks = sorted(set([0.0] + ys + [big_l]))
    area = 0.0
    for a, b in zip(breaks, breaks[1:]):
        f_at = sum(1 for y in ys if y <= a) / n
        area += f_at * (b - a)
    return area / big_l


def km_recount(durations, events):
    """Risk-set recount product-limit oracle: [(event_time, survival), ...]."""
    event_times = sorted({d for d, e in zip(durations, events) if e})
    surv = 1.0
    out = []
    for t in event_times:
        n_at_risk = sum(1 for d in durations if d >= t)
        d_events = sum(1 for d, e in zip(durations, events) if e and d == t)
        surv *= 1.0 - d_events / n_at_risk
        out.append((t, surv))
    return out


def naive_efron_loglik(beta, durations, events, x) -> float:
    """Direct partial log-likelihood with the tie correction, via explicit
    risk-set recomputation at every event time."""
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(x, dtype=float)
    durations = np.asarray(durations, dtype=float)
    events = np.asarray(events, dtype=bool)
    eta = x @ beta
    theta = np.exp(eta)
    ll = 0.0
    for t in sorted(set(durations[events])):
        tied = np.flatnonzero((durations == t) & events)
        risk = np.flatnonzero(durations >= t)
        d = len(tied)
        s0_tied = theta[tied].sum()
        s0_risk = theta[risk].sum()
        ll += eta[tied].sum()
        for l in range(d):
            ll -= math.log(s0_risk - (l / d) * s0_tied)
    return float(ll)


def naive_breslow_loglik(beta, durations, events, x) -> float:
    """Direct partial log-likelihood with untied denominators."""
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(x, dtype=float)
    durations = np.asarray(durations, dtype=float)
    events = np.asarray(events, dtype=bool)
    eta = x @ beta
    theta = np.exp(eta)
    ll = 0.0
    for t in sorted(set(durations[events])):
        tied = np.flatnonzero((durations == t) & events)
        risk = np.flatnonzero(durations >= t)
        ll += eta[tied].sum() - len(tied) * math.log(theta[risk].sum())
    return float(ll)


def simulate_two_group(rng, n, log_hr, base_rate=0.25, censor_scale=9.0):
    """Exponential event times with a binary group effect and uniform censoring.

    The defaults give roughly 30% censoring under a hazard ratio of 2.
    """
    group = (rng.random(n) < 0.5).astype(float)
    rate = base_rate * np.exp(log_hr * group)
    t_event = rng.exponential(1.0 / rate)
    t_censor = rng.uniform(0, censor_scale, n)
    durations = np.minimum(t_event, t_censor)
    events = t_event <= t_censor
    return durations, events, group.reshape(-1, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20250811)
