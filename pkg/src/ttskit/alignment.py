"""Greedy one-to-one alignment between predicted and reference timelines.

The matcher repeatedly commits the globally closest unmatched
predicted-reference pair while its distance stays within the threshold.
Equal distances are broken deterministically: smallest reference index
first, then smallest predicted index. Committed distances are
non-decreasing, so an unthresholded run yields every thresholded result as
a prefix; the sweep machinery relies on that.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._kernels import greedy_pairs
from .errors import AlignmentError, MetricUndefinedError
from .similarity import DistanceProvider
from .timeline import Timeline

__all__ = [
    "MatchedPair",
    "Alignment",
    "greedy_sequence",
    "align",
    "event_match_rate",
    "alignment_to_json_dict",
]


@dataclass(frozen=True)
class MatchedPair:
    pred_index: int
    ref_index: int
    distance: float


@dataclass(frozen=True)
class Alignment:
    """One-to-one pairing plus the unmatched residue on both sides."""

    pairs: tuple[MatchedPair, ...]
    unmatched_pred: frozenset[int]
    unmatched_ref: frozenset[int]
    threshold: float
    n_pred: int
    n_ref: int

    def __post_init__(self):
        matched_pred = {p.pred_index for p in self.pairs}
        matched_ref = {p.ref_index for p in self.pairs}
        if len(matched_pred) != len(self.pairs) or len(matched_ref) != len(self.pairs):
            raise AlignmentError("alignment is not one-to-one")
        if matched_pred | self.unmatched_pred != set(range(self.n_pred)):
            raise AlignmentError("predicted indices do not partition")
        if matched_ref | self.unmatched_ref != set(range(self.n_ref)):
            raise AlignmentError("reference indices do not partition")

    @property
    def n_matched(self) -> int:
        return len(self.pairs)


def _distance_matrix(pred: Timeline, ref: Timeline, provider: DistanceProvider) -> np.ndarray:
    d = provider.pairwise(ref.texts, pred.texts)
    d = np.ascontiguousarray(d, dtype=np.float64)
    if d.size and not np.all(np.isfinite(d)):
        raise AlignmentError("distance provider produced a non-finite distance")
    if d.size and d.min() < 0:
        raise AlignmentError("distance provider produced a negative distance")
    return d


def greedy_sequence(
    pred: Timeline, ref: Timeline, provider: DistanceProvider
) -> list[MatchedPair]:
    """Full commit sequence with no threshold, in non-decreasing distance order.

    ``align`` at any threshold t is the maximal prefix with distance <= t.
    """
    if len(pred) == 0 or len(ref) == 0:
        return []
    d = _distance_matrix(pred, ref, provider)
    ref_idx, pred_idx, dists = greedy_pairs(d)
    return [
        MatchedPair(pred_index=int(p), ref_index=int(r), distance=float(v))
        for r, p, v in zip(ref_idx, pred_idx, dists)
    ]


def _build_alignment(
    sequence: Sequence[MatchedPair], threshold: float, n_pred: int, n_ref: int
) -> Alignment:
    pairs = tuple(m for m in sequence if m.distance <= threshold)
    matched_pred = {m.pred_index for m in pairs}
    matched_ref = {m.ref_index for m in pairs}
    return Alignment(
        pairs=pairs,
        unmatched_pred=frozenset(range(n_pred)) - matched_pred,
        unmatched_ref=frozenset(range(n_ref)) - matched_ref,
        threshold=threshold,
        n_pred=n_pred,
        n_ref=n_ref,
    )


def align(
    pred: Timeline, ref: Timeline, provider: DistanceProvider, threshold: float
) -> Alignment:
    """Greedy best-match alignment at the given distance threshold."""
    if threshold < 0:
        raise AlignmentError(f"threshold must be >= 0, got {threshold}")
    sequence = greedy_sequence(pred, ref, provider)
    return _build_alignment(sequence, threshold, len(pred), len(ref))


def event_match_rate(a: Alignment, ref_len: int) -> float:
    """Fraction of reference events with a matched prediction."""
    if ref_len == 0:
        raise MetricUndefinedError("empty reference timeline")
    return a.n_matched / ref_len


def alignment_to_json_dict(a: Alignment, pred: Timeline, ref: Timeline) -> dict:
    """JSON-friendly export with resolved texts and times for inspection."""
    return {
        "case_id": ref.case_id,
        "threshold": a.threshold,
        "n_pred": a.n_pred,
        "n_ref": a.n_ref,
        "pairs": [
            {
                "pred_index": m.pred_index,
                "ref_index": m.ref_index,
                "distance": m.distance,
                "pred_text": pred.events[m.pred_index].text,
                "pred_time_hours": pred.events[m.pred_index].time_hours,
                "ref_text": ref.events[m.ref_index].text,
                "ref_time_hours": ref.events[m.ref_index].time_hours,
            }
            for m in a.pairs
        ],
        "unmatched_pred": [
            {"index": i, "text": pred.events[i].text, "time_hours": pred.events[i].time_hours}
            for i in sorted(a.unmatched_pred)
        ],
        "unmatched_ref": [
            {"index": i, "text": ref.events[i].text, "time_hours": ref.events[i].time_hours}
            for i in sorted(a.unmatched_ref)
        ],
    }
