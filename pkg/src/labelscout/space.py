"""Structured search space: vocabulary, embeddings, prior, anchor ordering.

The space is immutable after construction and safe to share between
concurrent searches. Label embeddings live on the unit sphere and the
anchor ordering sorts them by cosine distance from a reference vector so
that nearby indices mean semantically nearby labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import formats
from .formats import FormatError, canon_token

NORM_TOL = 1e-6
ZERO_NORM_EPS = 1e-12


@dataclass(frozen=True)
class Label:
    """One activity candidate: an action concept applied to an object concept."""

    id: int
    action: str
    object: str

    @property
    def phrase(self) -> str:
        return f"{self.action} {self.object}"


def render_phrase(action: str, obj: str) -> str:
    return f"{canon_token(action)} {canon_token(obj)}"


class EmbeddingTable:
    """Unit-norm text embeddings for label phrases, plus optional per-concept
    vectors for distinct actions and objects."""

    def __init__(self, vectors, action_vectors=None, object_vectors=None):
        self.vectors = _normalize_rows(np.asarray(vectors, dtype=np.float64))
        self.action_vectors = _normalize_map(action_vectors)
        self.object_vectors = _normalize_map(object_vectors)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _normalize_rows(mat: np.ndarray) -> np.ndarray:
    if mat.ndim != 2 or mat.shape[0] == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError("non-finite embedding values")
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms < ZERO_NORM_EPS):
        bad = int(np.argmin(norms))
        raise ValueError(f"zero-norm embedding row {bad}")
    return mat / norms[:, None]


def _normalize_map(vecs):
    if vecs is None:
        return None
    out = {}
    for token, v in vecs.items():
        v = np.asarray(v, dtype=np.float64)
        norm = np.linalg.norm(v)
        if not np.all(np.isfinite(v)) or norm < ZERO_NORM_EPS:
            raise ValueError(f"bad concept embedding for token {token!r}")
        out[canon_token(token)] = v / norm
    return out


@dataclass(frozen=True)
class AffinityTable:
    """Raw knowledge-graph affinity scores per (action, object) pair.

    A missing pair is distinct from a zero-score pair: missing pairs get no
    raw mass at all. ``relation_adjustments`` maps relation names to
    multiplicative weights; ``pair_relations`` lists the relations applicable
    to each pair.
    """

    entries: dict = field(default_factory=dict)
    pair_relations: dict = field(default_factory=dict)
    relation_adjustments: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "AffinityTable":
        entries, pair_relations, adjustments = formats.parse_affinity(path)
        return cls(entries, pair_relations, adjustments)

    def raw_weight(self, action: str, obj: str):
        """Adjusted raw weight for a pair, or None if the pair is absent."""
        pair = (action, obj)
        if pair not in self.entries:
            return None
        w = self.entries[pair]
        for rel in self.pair_relations.get(pair, ()):
            w *= self.relation_adjustments[rel]
        return w


def load_vocabulary(path) -> list[Label]:
    """Load labels from a vocabulary file, ids assigned in file order."""
    pairs = formats.parse_vocabulary(path)
    return [Label(i, a, o) for i, (a, o) in enumerate(pairs)]


def build_prior(labels, affinity: AffinityTable, smoothing: float = 0.0) -> np.ndarray:
    """Per-label prior mass from affinity scores.

    Each label gets weight ``max(raw * adjustments, 0) + smoothing`` where
    missing pairs contribute no raw mass; the result is normalized to sum 1.
    """
    if not labels:
        raise ValueError("no labels")
    if not np.isfinite(smoothing) or smoothing < 0:
        raise ValueError(f"smoothing must be finite and >= 0, got {smoothing}")
    weights = np.empty(len(labels), dtype=np.float64)
    for i, label in enumerate(labels):
        raw = affinity.raw_weight(label.action, label.object)
        base = max(raw, 0.0) if raw is not None else 0.0
        weights[i] = base + smoothing
    total = weights.sum()
    if total <= 0:
        raise ValueError("degenerate prior: all weights are zero and smoothing is 0")
    return weights / total


def validate_prior(prior: np.ndarray, n: int, tol: float = 1e-9) -> None:
    prior = np.asarray(prior)
    if prior.shape != (n,):
        raise ValueError(f"prior shape {prior.shape} != ({n},)")
    if not np.all(np.isfinite(prior)) or np.any(prior < 0):
        raise ValueError("prior entries must be finite and non-negative")
    if abs(prior.sum() - 1.0) > tol:
        raise ValueError(f"prior sums to {prior.sum()!r}, not 1")


def sort_by_anchor(embeddings: EmbeddingTable, anchor) -> np.ndarray:
    """Permutation of label ids by ascending cosine distance from the anchor.

    Ties break by ascending label id. The result is invariant to positive
    rescaling of the anchor.
    """
    anchor = np.asarray(anchor, dtype=np.float64)
    if anchor.shape != (embeddings.dim,):
        raise ValueError(f"anchor shape {anchor.shape} != ({embeddings.dim},)")
    norm = np.linalg.norm(anchor)
    if not np.all(np.isfinite(anchor)) or norm < ZERO_NORM_EPS:
        raise ValueError("anchor must be finite with nonzero norm")
    distances = 1.0 - embeddings.vectors @ (anchor / norm)
    return np.argsort(distances, kind="stable")


def default_anchor(embeddings: EmbeddingTable) -> np.ndarray:
    """Normalized mean embedding; falls back to label 0's vector if the mean
    is the zero vector."""
    mean = embeddings.vectors.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < ZERO_NORM_EPS:
        return embeddings.vectors[0].copy()
    return mean / norm


@dataclass(frozen=True)
class SearchSpace:
    """Immutable bundle of labels, embeddings, prior and anchor ordering."""

    labels: tuple
    embeddings: EmbeddingTable
    prior: np.ndarray
    anchor: np.ndarray
    order: np.ndarray      # position -> label id, ascending anchor distance
    positions: np.ndarray  # label id -> position in `order`

    @classmethod
    def build(cls, labels, embeddings: EmbeddingTable, prior, anchor=None) -> "SearchSpace":
        labels = tuple(labels)
        if len(labels) != embeddings.n:
            raise ValueError(
                f"{len(labels)} labels but {embeddings.n} embedding rows"
            )
        prior = np.asarray(prior, dtype=np.float64)
        validate_prior(prior, len(labels))
        if anchor is None:
            anchor = default_anchor(embeddings)
        else:
            anchor = np.asarray(anchor, dtype=np.float64)
            anchor = anchor / np.linalg.norm(anchor)
        order = sort_by_anchor(embeddings, anchor)
        positions = np.empty_like(order)
        positions[order] = np.arange(len(order))
        return cls(labels, embeddings, prior, anchor, order, positions)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.embeddings.dim


# ---------------------------------------------------------------------------
# Space bundles on disk

VOCAB_FILE = "vocabulary.txt"
PHRASES_FILE = "phrases.prse"
ACTIONS_FILE = "actions.prse"
OBJECTS_FILE = "objects.prse"
PRIOR_FILE = "prior.npy"
ANCHOR_FILE = "anchor.npy"
ORDER_FILE = "order.npy"
META_FILE = "space.json"


def save_bundle(space: SearchSpace, out_dir) -> Path:
    """Write a search space as a directory bundle; returns the directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"{lb.action},{lb.object}\n" for lb in space.labels]
    (out / VOCAB_FILE).write_text("".join(lines), encoding="utf-8")
    formats.write_prse(out / PHRASES_FILE, space.embeddings.vectors)
    for fname, table in (
        (ACTIONS_FILE, space.embeddings.action_vectors),
        (OBJECTS_FILE, space.embeddings.object_vectors),
    ):
        if table is not None:
            tokens = sorted(table)
            formats.write_prse(out / fname, np.stack([table[t] for t in tokens]))
            formats.write_sidecar(out / fname, tokens)
    np.save(out / PRIOR_FILE, space.prior)
    np.save(out / ANCHOR_FILE, space.anchor)
    np.save(out / ORDER_FILE, space.order.astype(np.int64))
    meta = {"n_labels": space.n, "dim": space.dim}
    (out / META_FILE).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return out


def load_bundle(bundle_dir) -> SearchSpace:
    """Load a search space bundle written by :func:`save_bundle`."""
    bundle = Path(bundle_dir)
    if not bundle.is_dir():
        raise FormatError(f"space bundle directory not found: {bundle}")
    labels = load_vocabulary(bundle / VOCAB_FILE)
    vectors = formats.read_prse(bundle / PHRASES_FILE)
    action_vectors = _load_concepts(bundle / ACTIONS_FILE)
    object_vectors = _load_concepts(bundle / OBJECTS_FILE)
    table = EmbeddingTable(vectors, action_vectors, object_vectors)
    prior = np.load(bundle / PRIOR_FILE, allow_pickle=False)
    anchor = np.load(bundle / ANCHOR_FILE, allow_pickle=False)
    order = np.load(bundle / ORDER_FILE, allow_pickle=False)
    space = SearchSpace.build(labels, table, prior, anchor=anchor)
    if not np.array_equal(space.order, order):
        raise FormatError(f"{bundle}: stored anchor ordering is inconsistent")
    return space


def _load_concepts(path: Path):
    if not path.exists():
        return None
    mat = formats.read_prse(path)
    tokens = formats.read_sidecar(path, expected_rows=mat.shape[0])
    return {tok: mat[i] for i, tok in enumerate(tokens)}
