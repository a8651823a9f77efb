from __future__ import annotations

import math

import numpy as np
import pytest

from labelscout.formats import write_prse, write_truths
from labelscout.oracle import (
    DotProductBackend,
    OracleSession,
    QueryRepr,
    ReplayBackend,
    SyntheticBackend,
    make_synthetic_oracle,
    normalize_pool,
)


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


class TestQueryRepr:
    def test_requires_unit_norm(self):
        with pytest.raises(ValueError, match="unit norm"):
            QueryRepr(np.array([1.0, 1.0]))

    def test_from_vector_normalizes(self):
        q = QueryRepr.from_vector([3.0, 4.0], qid=2)
        np.testing.assert_allclose(q.vector, [0.6, 0.8])
        assert q.qid == 2

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="zero or non-finite"):
            QueryRepr.from_vector([0.0, 0.0])

    def test_vector_optional(self):
        assert QueryRepr(vector=None, qid=1).vector is None


class TestBackends:
    def test_dot_product_scores(self):
        vectors = np.array([[1.0, 0.0], [0.0, 1.0]])
        backend = DotProductBackend(vectors)
        q = QueryRepr.from_vector([1.0, 1.0])
        assert backend.raw_score(q, 0) == pytest.approx(1 / math.sqrt(2))
        np.testing.assert_allclose(backend.raw_all(q), vectors @ q.vector)
        assert backend.n_labels == 2

    def test_replay_backend(self, tmp_path):
        matrix = np.array([[0.1, 0.9], [0.8, 0.2]])
        path = tmp_path / "r.prse"
        write_prse(path, matrix)
        write_truths(path, [1, 0])
        backend = ReplayBackend.load(path)
        assert backend.n_queries == 2 and backend.n_labels == 2
        assert backend.truths == [1, 0]
        q = QueryRepr(vector=None, qid=1)
        assert backend.raw_score(q, 0) == pytest.approx(0.8, abs=1e-7)
        with pytest.raises(ValueError, match="qid"):
            backend.raw_score(QueryRepr(vector=None), 0)

    def test_replay_requires_2d_finite(self):
        with pytest.raises(ValueError, match="2-D"):
            ReplayBackend(np.zeros(3))
        with pytest.raises(ValueError, match="non-finite"):
            ReplayBackend(np.array([[np.nan]]))

    def test_synthetic_planted_is_argmax_when_noise_free(self):
        rng = np.random.default_rng(0)
        vectors = rng.standard_normal((30, 6))
        vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
        backend = SyntheticBackend(vectors, planted_id=7, sharpness=4.0)
        scores = backend.raw_all(QueryRepr(vector=None))
        assert int(np.argmax(scores)) == 7
        assert scores[7] == pytest.approx(1.0)

    def test_synthetic_noise_deterministic_per_seed(self):
        vectors = np.eye(5)
        a = SyntheticBackend(vectors, 0, 2.0, noise_sd=0.1, seed=3)
        b = SyntheticBackend(vectors, 0, 2.0, noise_sd=0.1, seed=3)
        c = SyntheticBackend(vectors, 0, 2.0, noise_sd=0.1, seed=4)
        np.testing.assert_array_equal(a.scores, b.scores)
        assert not np.array_equal(a.scores, c.scores)

    def test_synthetic_validation(self):
        with pytest.raises(ValueError, match="planted_id"):
            SyntheticBackend(np.eye(3), 5, 1.0)
        with pytest.raises(ValueError, match="sharpness"):
            SyntheticBackend(np.eye(3), 0, 0.0)
        with pytest.raises(ValueError, match="noise_sd"):
            SyntheticBackend(np.eye(3), 0, 1.0, noise_sd=-1.0)

    def test_make_synthetic_oracle(self, small_instance):
        oracle = make_synthetic_oracle(small_instance.space, 3, 5.0)
        assert oracle.n_labels == small_instance.space.n
        assert int(np.argmax(oracle.raw_all(QueryRepr(vector=None)))) == 3


class TestOracleSession:
    def test_ledger_counts_distinct_labels_only(self):
        backend = DotProductBackend(np.eye(4))
        session = OracleSession(backend, QueryRepr.from_vector([1, 0, 0, 0]))
        for label_id in [2, 0, 2, 2, 3, 0]:
            session.score(label_id)
        assert session.unique_calls == 3
        assert list(session.ids_array()) == [2, 0, 3]  # first-scored order
        assert session.is_cached(3) and not session.is_cached(1)

    def test_score_all_equals_space_size(self):
        backend = DotProductBackend(np.eye(4))
        session = OracleSession(backend, QueryRepr.from_vector([1, 0, 0, 0]))
        scores = session.score_all()
        assert session.unique_calls == 4
        np.testing.assert_allclose(scores, [1.0, 0.0, 0.0, 0.0])

    def test_repeat_score_is_cached_value(self):
        calls = []

        class Counting:
            n_labels = 2

            def raw_score(self, query, label_id):
                calls.append(label_id)
                return 0.5

        session = OracleSession(Counting(), QueryRepr(vector=None))
        assert session.score(1) == session.score(1) == 0.5
        assert calls == [1]

    def test_out_of_range_label(self):
        session = OracleSession(DotProductBackend(np.eye(2)), QueryRepr.from_vector([1, 0]))
        with pytest.raises(IndexError, match="out of range"):
            session.score(2)

    def test_non_finite_score_rejected(self):
        class Broken:
            n_labels = 1

            def raw_score(self, query, label_id):
                return float("nan")

        session = OracleSession(Broken(), QueryRepr(vector=None))
        with pytest.raises(ValueError, match="non-finite"):
            session.score(0)


class TestNormalizePool:
    def test_matches_scalar_softmax(self):
        scores = [0.3, -0.2, 0.9, 0.1]
        temperature = 0.05
        out = normalize_pool(scores, temperature)
        m = max(scores)
        z = [math.exp((s - m) / temperature) for s in scores]
        total = sum(z)
        expected = [v / total for v in z]
        np.testing.assert_allclose(out, expected, rtol=0, atol=1e-15)
        assert out.sum() == pytest.approx(1.0, abs=1e-12)

    def test_shift_invariance(self):
        scores = np.array([0.1, 0.4, 0.2])
        np.testing.assert_allclose(
            normalize_pool(scores, 0.5), normalize_pool(scores + 100.0, 0.5)
        )

    def test_errors(self):
        with pytest.raises(ValueError, match="empty"):
            normalize_pool([], 1.0)
        with pytest.raises(ValueError, match="non-finite"):
            normalize_pool([np.inf], 1.0)
        with pytest.raises(ValueError, match="temperature"):
            normalize_pool([1.0], 0.0)
