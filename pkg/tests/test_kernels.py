"""Parity between the compiled kernels and the pure-Python fallback."""

import numpy as np
import pytest

from ttskit import _kernels
from ttskit._kernels import pyref

needs_ext = pytest.mark.skipif(
    not _kernels.HAVE_COMPILED, reason="compiled extension not available"
)


def random_groups(rng, n):
    """Random group layout: starts, sizes, events-per-group over n rows."""
    sizes = []
    while sum(sizes) < n:
        sizes.append(min(int(rng.integers(1, 6)), n - sum(sizes)))
    sizes = np.asarray(sizes, dtype=np.int64)
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
    n_events = np.asarray([int(rng.integers(0, s + 1)) for s in sizes], dtype=np.int64)
    return starts, sizes, n_events


@needs_ext
class TestGreedyParity:
    def test_matches_fallback_exactly(self, rng):
        for _ in range(200):
            n_ref = int(rng.integers(0, 12))
            n_pred = int(rng.integers(0, 12))
            # coarse values force plenty of exact distance ties
            d = np.ascontiguousarray(
                rng.choice([0.0, 0.1, 0.1, 0.2, 0.5, 0.9], size=(n_ref, n_pred))
            )
            got = _kernels.greedy_pairs(d)
            want = pyref.greedy_pairs(d)
            for a, b in zip(got, want):
                assert np.array_equal(a, b)

    def test_tie_break_order(self):
        d = np.ascontiguousarray(np.full((3, 3), 0.5))
        ref_idx, pred_idx, dist = _kernels.greedy_pairs(d)
        assert list(ref_idx) == [0, 1, 2]
        assert list(pred_idx) == [0, 1, 2]


@needs_ext
class TestEfronParity:
    def test_score_info_close(self, rng):
        for _ in range(50):
            n = int(rng.integers(3, 60))
            p = int(rng.integers(1, 5))
            theta = np.ascontiguousarray(rng.uniform(0.2, 3.0, size=n))
            x = np.ascontiguousarray(rng.normal(size=(n, p)))
            starts, sizes, n_events = random_groups(rng, n)
            if n_events.sum() == 0:
                continue
            a = _kernels.efron_score_info(theta, x, starts, sizes, n_events)
            b = pyref.efron_score_info(theta, x, starts, sizes, n_events)
            assert a[0] == pytest.approx(b[0], rel=1e-12)
            np.testing.assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-12)
            np.testing.assert_allclose(a[2], b[2], rtol=1e-10, atol=1e-12)

    def test_sum_log_denom_consistent_with_score_info(self, rng):
        n = 40
        theta = np.ascontiguousarray(rng.uniform(0.2, 3.0, size=n))
        x = np.ascontiguousarray(rng.normal(size=(n, 2)))
        starts, sizes, n_events = random_groups(rng, n)
        ll_only = _kernels.efron_sum_log_denom(theta, starts, sizes, n_events)
        full = _kernels.efron_score_info(theta, x, starts, sizes, n_events)
        assert ll_only == pytest.approx(full[0], rel=1e-14)


class TestBackendSelection:
    def test_exported_callables_exist(self):
        assert callable(_kernels.greedy_pairs)
        assert callable(_kernels.efron_sum_log_denom)
        assert callable(_kernels.efron_score_info)
        assert _kernels.BACKEND in ("compiled", "python")

    def test_env_var_forces_fallback(self):
        import os
        import subprocess
        import sys

        out = subprocess.run(
            [sys.executable, "-c", "from ttskit._kernels import BACKEND; print(BACKEND)"],
            env={**os.environ, "TTSKIT_NO_EXT": "1"},
            capture_output=True,
            text=True,
            check=True,
        )
        assert out.stdout.strip() == "python"
