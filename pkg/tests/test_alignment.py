import numpy as np
import pytest

from conftest import naive_greedy, random_timeline
from ttskit.alignment import align, event_match_rate, greedy_sequence
from ttskit.errors import AlignmentError, MetricUndefinedError, MissingEmbeddingError
from ttskit.similarity import EmbeddingProvider, EmbeddingStore, LexicalProvider
from ttskit.timeline import Timeline, TimelineEvent

LEX = LexicalProvider()


def tl(case_id, *texts, times=None):
    times = times or [float(i) for i in range(len(texts))]
    return Timeline(
        case_id=case_id,
        events=tuple(TimelineEvent(text=t, time_hours=h) for t, h in zip(texts, times)),
    )


class TestAlign:
    def test_identical_timelines_all_matched_at_zero(self):
        t = tl("c", "fever", "cough", "rash")
        a = align(t, t, LEX, threshold=0.1)
        assert a.n_matched == 3
        assert all(p.distance == 0.0 for p in a.pairs)
        assert not a.unmatched_pred and not a.unmatched_ref

    def test_disjoint_vocabulary_nothing_matched(self):
        a = align(tl("c", "fever", "cough"), tl("c", "rash", "edema"), LEX, threshold=0.1)
        assert a.n_matched == 0
        assert a.unmatched_pred == {0, 1} and a.unmatched_ref == {0, 1}

    def test_empty_sides(self):
        empty = Timeline(case_id="c", events=())
        full = tl("c", "fever")
        assert align(empty, full, LEX, 0.5).n_matched == 0
        assert align(full, empty, LEX, 0.5).n_matched == 0

    def test_negative_threshold_rejected(self):
        with pytest.raises(AlignmentError):
            align(tl("c", "a"), tl("c", "a"), LEX, -0.1)

    def test_provider_failure_propagates(self):
        p = EmbeddingProvider(EmbeddingStore(2, {"fever": [1, 0]}))
        with pytest.raises(MissingEmbeddingError):
            align(tl("c", "fever"), tl("c", "cough"), p, 0.1)

    def test_duplicate_texts_each_match_once(self):
        pred = tl("c", "fever", "fever")
        ref = tl("c", "fever", "fever", "fever")
        a = align(pred, ref, LEX, threshold=0.0)
        assert a.n_matched == 2
        assert a.unmatched_ref == {2}

    def test_handpicked_4x5_matches_oracle(self, rng):
        pred = random_timeline(rng, "p", 4)
        ref = random_timeline(rng, "r", 5)
        d = LEX.pairwise(pred.texts, ref.texts)
        expected = naive_greedy(d.tolist(), threshold=0.7)
        a = align(pred, ref, LEX, threshold=0.7)
        assert [(p.pred_index, p.ref_index) for p in a.pairs] == [
            (p, r) for p, r, _ in expected
        ]

    def test_oracle_equality_random_instances(self, rng):
        for trial in range(60):
            pred = random_timeline(rng, "p", int(rng.integers(0, 9)))
            ref = random_timeline(rng, "r", int(rng.integers(1, 9)))
            threshold = float(rng.choice([0.0, 0.1, 0.3, 0.5, 1.0]))
            d = LEX.pairwise(pred.texts, ref.texts) if len(pred) and len(ref) else np.zeros((len(pred), len(ref)))
            expected = naive_greedy(d.tolist(), threshold)
            a = align(pred, ref, LEX, threshold)
            assert [(p.pred_index, p.ref_index, p.distance) for p in a.pairs] == expected

    def test_commit_distances_non_decreasing(self, rng):
        pred = random_timeline(rng, "p", 10)
        ref = random_timeline(rng, "r", 12)
        seq = greedy_sequence(pred, ref, LEX)
        dists = [m.distance for m in seq]
        assert dists == sorted(dists)

    def test_threshold_monotonicity(self, rng):
        for _ in range(30):
            pred = random_timeline(rng, "p", int(rng.integers(1, 10)))
            ref = random_timeline(rng, "r", int(rng.integers(1, 10)))
            sizes = [
                align(pred, ref, LEX, t).n_matched for t in (0.05, 0.1, 0.2, 0.35, 0.5)
            ]
            assert sizes == sorted(sizes)

    def test_permutation_invariance_with_distinct_distances(self, rng):
        # use an embedding provider so all pairwise distances are distinct
        texts_p = [f"p{i}" for i in range(5)]
        texts_r = [f"r{i}" for i in range(6)]
        store = EmbeddingStore(
            6, {t: rng.normal(size=6) for t in texts_p + texts_r}
        )
        prov = EmbeddingProvider(store)
        pred = tl("c", *texts_p)
        ref = tl("c", *texts_r)
        base = align(pred, ref, prov, 2.0)
        perm_p = list(rng.permutation(5))
        perm_r = list(rng.permutation(6))
        pred2 = tl("c", *[texts_p[i] for i in perm_p])
        ref2 = tl("c", *[texts_r[i] for i in perm_r])
        shuffled = align(pred2, ref2, prov, 2.0)
        base_pairs = {
            (pred.events[p.pred_index].text, ref.events[p.ref_index].text) for p in base.pairs
        }
        shuffled_pairs = {
            (pred2.events[p.pred_index].text, ref2.events[p.ref_index].text)
            for p in shuffled.pairs
        }
        assert base_pairs == shuffled_pairs


class TestMatchRate:
    def test_all_matched(self):
        t = tl("c", "a b", "c d")
        assert event_match_rate(align(t, t, LEX, 0.1), len(t)) == 1.0

    def test_none_matched(self):
        a = align(tl("c", "fever"), tl("c", "rash"), LEX, 0.1)
        assert event_match_rate(a, 1) == 0.0

    def test_three_of_five(self):
        pred = tl("c", "a", "b", "c")
        ref = tl("c", "a", "b", "c", "d", "e")
        a = align(pred, ref, LEX, 0.1)
        assert event_match_rate(a, 5) == pytest.approx(0.6)

    def test_empty_reference_rejected(self):
        a = align(tl("c", "a"), Timeline(case_id="c", events=()), LEX, 0.1)
        with pytest.raises(MetricUndefinedError, match="empty reference"):
            event_match_rate(a, 0)
