"""Black-box likelihood oracles with exact unique-call accounting.

The scorer behind a search is expensive, so every search run owns an
:class:`OracleSession` that memoizes scores per label and counts unique
evaluations. Re-scoring a cached label is free. Three backends are
provided: dot-product against stored phrase embeddings, replay of a
recorded score matrix, and a synthetic planted-peak landscape for
desk-scale verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import formats

NORM_TOL = 1e-6


@dataclass(frozen=True)
class QueryRepr:
    """A query embedding (unit norm). ``qid`` keys replay-backend rows; the
    vector may be omitted for replay-only runs that never touch it."""

    vector: np.ndarray | None
    qid: int | None = None

    def __post_init__(self):
        if self.vector is not None:
            v = np.asarray(self.vector, dtype=np.float64)
            if v.ndim != 1 or not np.all(np.isfinite(v)):
                raise ValueError("query vector must be a finite 1-D vector")
            if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
                raise ValueError("query vector must be unit norm")
            object.__setattr__(self, "vector", v)

    @classmethod
    def from_vector(cls, v, qid=None) -> "QueryRepr":
        v = np.asarray(v, dtype=np.float64)
        norm = np.linalg.norm(v)
        if norm <= 0 or not np.isfinite(norm):
            raise ValueError("cannot normalize a zero or non-finite vector")
        return cls(v / norm, qid=qid)


class DotProductBackend:
    """score(a) = v . phi(a) over stored unit phrase embeddings."""

    def __init__(self, vectors):
        self.vectors = np.asarray(vectors, dtype=np.float64)

    @property
    def n_labels(self) -> int:
        return self.vectors.shape[0]

    def raw_score(self, query: QueryRepr, label_id: int) -> float:
        return float(self.vectors[label_id] @ query.vector)

    def raw_all(self, query: QueryRepr) -> np.ndarray:
        return self.vectors @ query.vector


class ReplayBackend:
    """Replays a recorded dense score matrix with rows keyed by query id."""

    def __init__(self, matrix, truths=None):
        self.matrix = np.asarray(matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ValueError("replay matrix must be 2-D (queries x labels)")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("replay matrix contains non-finite scores")
        self.truths = None if truths is None else [int(t) for t in truths]

    @classmethod
    def load(cls, path, with_truths=True) -> "ReplayBackend":
        matrix = formats.read_prse(path)
        truths = None
        if with_truths and formats.truth_path(path).exists():
            truths = formats.read_truths(path, expected_rows=matrix.shape[0])
        return cls(matrix, truths)

    @property
    def n_labels(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_queries(self) -> int:
        return self.matrix.shape[0]

    def raw_score(self, query: QueryRepr, label_id: int) -> float:
        if query.qid is None:
            raise ValueError("replay backend needs a query with a qid")
        return float(self.matrix[query.qid, label_id])

    def raw_all(self, query: QueryRepr) -> np.ndarray:
        if query.qid is None:
            raise ValueError("replay backend needs a query with a qid")
        return self.matrix[query.qid].copy()


class SyntheticBackend:
    """Planted-peak landscape: exp(-sharpness * d^2) + Gaussian noise, where
    d is cosine distance between a label's embedding and the planted label's.

    Deterministic given the seed; with zero noise the planted label is the
    strict argmax.
    """

    def __init__(self, vectors, planted_id, sharpness, noise_sd=0.0, seed=0):
        vectors = np.asarray(vectors, dtype=np.float64)
        n = vectors.shape[0]
        if not 0 <= planted_id < n:
            raise ValueError(f"planted_id {planted_id} out of range [0, {n})")
        if sharpness <= 0:
            raise ValueError("sharpness must be > 0")
        if noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        d = 1.0 - vectors @ vectors[planted_id]
        scores = np.exp(-sharpness * d * d)
        if noise_sd > 0:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
            scores = scores + rng.normal(0.0, noise_sd, size=n)
        self.scores = scores
        self.planted_id = int(planted_id)

    @property
    def n_labels(self) -> int:
        return self.scores.shape[0]

    def raw_score(self, query: QueryRepr, label_id: int) -> float:
        return float(self.scores[label_id])

    def raw_all(self, query: QueryRepr) -> np.ndarray:
        return self.scores.copy()


def make_synthetic_oracle(space, planted_id, sharpness, noise_sd=0.0, seed=0):
    """Synthetic backend over a space's label embeddings."""
    return SyntheticBackend(
        space.embeddings.vectors, planted_id, sharpness, noise_sd, seed
    )


class OracleSession:
    """Per-run memoizing wrapper: unique-call ledger for one (query, search).

    ``unique_calls`` always equals the number of distinct labels scored;
    repeat evaluations hit the cache and are free.
    """

    def __init__(self, backend, query: QueryRepr):
        self.backend = backend
        self.query = query
        self._cache: dict[int, float] = {}
        self._ids: list[int] = []
        self._scores: list[float] = []

    @property
    def unique_calls(self) -> int:
        return len(self._cache)

    def is_cached(self, label_id: int) -> bool:
        return label_id in self._cache

    def score(self, label_id) -> float:
        label_id = int(label_id)
        if not 0 <= label_id < self.backend.n_labels:
            raise IndexError(
                f"label id {label_id} out of range [0, {self.backend.n_labels})"
            )
        cached = self._cache.get(label_id)
        if cached is not None:
            return cached
        value = float(self.backend.raw_score(self.query, label_id))
        if not np.isfinite(value):
            raise ValueError(f"oracle returned non-finite score for label {label_id}")
        self._cache[label_id] = value
        self._ids.append(label_id)
        self._scores.append(value)
        return value

    def score_all(self) -> np.ndarray:
        """Exhaustively score every label (diagnostic scans, brute force)."""
        for i in range(self.backend.n_labels):
            self.score(i)
        return self.scores_array()

    def ids_array(self) -> np.ndarray:
        """Evaluated label ids in first-scored order."""
        return np.asarray(self._ids, dtype=np.int64)

    def scores_array(self) -> np.ndarray:
        """Raw scores aligned with :meth:`ids_array`."""
        return np.asarray(self._scores, dtype=np.float64)


def normalize_pool(scores, temperature: float) -> np.ndarray:
    """Temperature softmax over a pool of raw scores (max-subtracted)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("empty score pool")
    if not np.all(np.isfinite(scores)):
        raise ValueError("non-finite score in pool")
    if not temperature > 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    z = np.exp((scores - scores.max()) / temperature)
    return z / z.sum()
