"""Text-similarity providers for event matching.

Two providers are available: cosine distance over precomputed embedding
vectors ingested from JSON-lines, and a lexical token-Jaccard fallback that
needs no external data. The lexical metric is NOT equivalent to embedding
cosine distance; it exists so pipelines can run fully self-contained.
"""

from __future__ import annotations

import io
import json
import re
from typing import IO, Mapping, Sequence

import numpy as np

from .errors import EmbeddingError, MissingEmbeddingError

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def cosine_distance(u: Sequence[float], v: Sequence[float]) -> float:
    """1 - cos(u, v), clamped to [0, 2] against rounding."""
    a = np.asarray(u, dtype=float)
    b = np.asarray(v, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise EmbeddingError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise EmbeddingError("cosine distance undefined for zero-norm vector")
    d = 1.0 - float(np.dot(a, b)) / (na * nb)
    return min(max(d, 0.0), 2.0)


def lexical_distance(a: str, b: str) -> float:
    """1 - Jaccard similarity of lowercase alphanumeric token sets, in [0, 1]."""
    ta = set(_TOKEN_RE.findall(a.lower()))
    tb = set(_TOKEN_RE.findall(b.lower()))
    if not ta and not tb:
        return 0.0
    union = len(ta | tb)
    return 1.0 - len(ta & tb) / union


class EmbeddingStore:
    """Exact-text lookup table of fixed-dimension vectors (keys are trimmed)."""

    def __init__(self, dimension: int, entries: Mapping[str, Sequence[float]]):
        if dimension <= 0:
            raise EmbeddingError(f"dimension must be positive, got {dimension}")
        self._dimension = int(dimension)
        self._entries: dict[str, np.ndarray] = {}
        for text, vec in entries.items():
            arr = np.asarray(vec, dtype=float)
            if arr.shape != (self._dimension,):
                raise EmbeddingError(
                    f"vector for {text!r} has dimension {arr.shape}, expected ({dimension},)"
                )
            if not np.all(np.isfinite(arr)):
                raise EmbeddingError(f"non-finite vector for {text!r}")
            if not np.any(arr):
                raise EmbeddingError(f"zero vector for {text!r}")
            self._entries[text.strip()] = arr

    @property
    def dimension(self) -> int:
        return self._dimension

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, text: str) -> bool:
        return text.strip() in self._entries

    def vector(self, text: str) -> np.ndarray:
        key = text.strip()
        if key not in self._entries:
            raise MissingEmbeddingError(text)
        return self._entries[key]


def load_embeddings(stream: str | IO[str]) -> EmbeddingStore:
    """Load JSON-lines records ``{"text": str, "vector": [float, ...]}``.

    Later duplicates of the same text replace earlier records. Dimension
    mismatches, zero vectors, and empty inputs are hard errors.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    entries: dict[str, np.ndarray] = {}
    dimension: int | None = None
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
            text = record["text"]
            vec = np.asarray(record["vector"], dtype=float)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise EmbeddingError(f"bad embedding record: {exc}", line_no) from None
        if vec.ndim != 1 or vec.size == 0:
            raise EmbeddingError("vector must be a non-empty flat list", line_no)
        if dimension is None:
            dimension = int(vec.size)
        elif vec.size != dimension:
            raise EmbeddingError(
                f"dimension mismatch: got {vec.size}, expected {dimension}", line_no
            )
        if not np.all(np.isfinite(vec)):
            raise EmbeddingError("non-finite vector component", line_no)
        if not np.any(vec):
            raise EmbeddingError("zero vector", line_no)
        entries[str(text).strip()] = vec
    if not entries:
        raise EmbeddingError("empty embedding store")
    return EmbeddingStore(dimension=dimension, entries=entries)


class DistanceProvider:
    """Scores text pairs; distance(a, a) == 0 and distance is symmetric."""

    kind = "abstract"

    def distance(self, a: str, b: str) -> float:
        raise NotImplementedError

    def pairwise(self, texts_a: Sequence[str], texts_b: Sequence[str]) -> np.ndarray:
        """(len(texts_a), len(texts_b)) distance matrix."""
        out = np.empty((len(texts_a), len(texts_b)), dtype=float)
        for i, a in enumerate(texts_a):
            for j, b in enumerate(texts_b):
                out[i, j] = self.distance(a, b)
        return out


class LexicalProvider(DistanceProvider):
    kind = "lexical"

    def distance(self, a: str, b: str) -> float:
        return lexical_distance(a, b)


class EmbeddingProvider(DistanceProvider):
    """Cosine distance over stored vectors; missing texts raise, never fall back."""

    kind = "embedding"

    def __init__(self, store: EmbeddingStore):
        self.store = store

    def distance(self, a: str, b: str) -> float:
        return cosine_distance(self.store.vector(a), self.store.vector(b))

    def pairwise(self, texts_a: Sequence[str], texts_b: Sequence[str]) -> np.ndarray:
        va = np.stack([self.store.vector(t) for t in texts_a]) if texts_a else np.zeros((0, 1))
        vb = np.stack([self.store.vector(t) for t in texts_b]) if texts_b else np.zeros((0, 1))
        if len(texts_a) == 0 or len(texts_b) == 0:
            return np.zeros((len(texts_a), len(texts_b)))
        na = np.linalg.norm(va, axis=1)
        nb = np.linalg.norm(vb, axis=1)
        d = 1.0 - (va @ vb.T) / np.outer(na, nb)
        return np.clip(d, 0.0, 2.0)


def event_distance(a: str, b: str, provider: DistanceProvider) -> float:
    return provider.distance(a, b)


def provider_from_spec(spec: str) -> DistanceProvider:
    """Build a provider from a config string: ``lexical`` or ``embedding:<path>``."""
    if spec == "lexical":
        return LexicalProvider()
    if spec.startswith("embedding:"):
        path = spec.split(":", 1)[1]
        if not path:
            raise EmbeddingError("embedding provider spec is missing a path")
        with open(path, "r", encoding="utf-8") as fh:
            return EmbeddingProvider(load_embeddings(fh))
    raise EmbeddingError(f"unknown provider spec {spec!r} (use 'lexical' or 'embedding:<path>')")
