"""Backend selection for the hot kernels.

The compiled extension is used when importable; otherwise the numpy
fallback takes over transparently. ``TTSKIT_NO_EXT=1`` forces the fallback
(useful for benchmarking and debugging).
"""

from __future__ import annotations

import importlib
import os

from . import pyref

_core = None
if not os.environ.get("TTSKIT_NO_EXT"):
    try:
        _core = importlib.import_module("ttskit._kernels._core")
    except ImportError:
        _core = None

HAVE_COMPILED = _core is not None
BACKEND = "compiled" if HAVE_COMPILED else "python"

if HAVE_COMPILED:
    greedy_pairs = _core.greedy_pairs
    efron_sum_log_denom = _core.efron_sum_log_denom
    efron_score_info = _core.efron_score_info
else:
    greedy_pairs = pyref.greedy_pairs
    efron_sum_log_denom = pyref.efron_sum_log_denom
    efron_score_info = pyref.efron_score_info

__all__ = [
    "BACKEND",
    "HAVE_COMPILED",
    "greedy_pairs",
    "efron_sum_log_denom",
    "efron_score_info",
    "pyref",
]
