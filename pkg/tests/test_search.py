from __future__ import annotations

import math

import numpy as np
import pytest

from labelscout.oracle import OracleSession, QueryRepr, normalize_pool
from labelscout.search import (
    CdfSampler,
    PHASE_EXPLOIT,
    PHASE_EXPLORE,
    PHASE_REFINE,
    PHASE_RERANK,
    SearchConfig,
    _reflect,
    derive_query_seed,
    explore_distribution,
    guided_distribution,
    jump_propose,
    rerank_decompose,
    result_summary,
    run_search,
)
from labelscout.synth import brute_force_argmax, full_scores

PHASE_ORDER = [PHASE_EXPLORE, PHASE_EXPLOIT, PHASE_REFINE, PHASE_RERANK]


class TestSearchConfig:
    def test_refine_reserve(self):
        cfg = SearchConfig(budget_total=100, refine_top_k=5, refine_radius=2)
        assert cfg.refine_reserve() == 5 * (2 * 2 + 1)

    def test_defaults_valid(self):
        SearchConfig(budget_total=110).validate()

    @pytest.mark.parametrize(
        "kwargs, match",
        [
            (dict(budget_total=0), "budget_total"),
            (dict(budget_total=50, lambda_mix=1.5), "lambda_mix"),
            (dict(budget_total=50, temperature=0.0), "temperature"),
            (dict(budget_total=50, lambda_action=-0.1), "lambda_action"),
            (dict(budget_total=50, explore_fraction=0.0), "explore_fraction"),
            (dict(budget_total=50, explore_fraction=1.0), "explore_fraction"),
            (dict(budget_total=50, jump_prob=-0.2), "jump_prob"),
            (dict(budget_total=50, local_sigma=0.0), "local_sigma"),
            (dict(budget_total=50, refine_top_k=0), "refine_top_k"),
            (dict(budget_total=50, refine_radius=-1), "refine_radius"),
            (dict(budget_total=10), "refinement needs"),
        ],
    )
    def test_validation_errors(self, kwargs, match):
        with pytest.raises(ValueError, match=match):
            SearchConfig(**kwargs).validate()


class TestExploreDistribution:
    def test_matches_scalar_mixture(self):
        prior = [0.5, 0.3, 0.2]
        lam = 0.6
        out = explore_distribution(prior, lam)
        expected = [lam * p + (1 - lam) / 3 for p in prior]
        np.testing.assert_allclose(out, expected, rtol=0, atol=1e-15)
        assert out.sum() == pytest.approx(1.0, abs=1e-12)

    def test_lambda_extremes(self):
        prior = np.array([0.7, 0.2, 0.1])
        np.testing.assert_allclose(explore_distribution(prior, 1.0), prior)
        np.testing.assert_allclose(explore_distribution(prior, 0.0), [1 / 3] * 3)

    def test_lambda_out_of_range(self):
        with pytest.raises(ValueError, match="lambda_mix"):
            explore_distribution([1.0], 1.2)


class TestGuidedDistribution:
    def test_matches_scalar_product(self):
        prior = [0.2, 0.5, 0.3]
        lik = [0.1, 0.7, 0.2]
        out, degenerate = guided_distribution(prior, lik)
        products = [p * l for p, l in zip(prior, lik)]
        total = sum(products)
        np.testing.assert_allclose(out, [m / total for m in products],
                                   rtol=0, atol=1e-15)
        assert not degenerate

    def test_degenerate_falls_back_to_uniform(self):
        out, degenerate = guided_distribution([0.0, 0.0], [0.3, 0.7])
        assert degenerate
        np.testing.assert_array_equal(out, [0.5, 0.5])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="same shape"):
            guided_distribution([0.5, 0.5], [1.0])


class TestCdfSampler:
    def test_draws_respect_point_mass(self):
        sampler = CdfSampler([4, 7, 9], [0.0, 1.0, 0.0])
        rng = np.random.default_rng(0)
        assert all(sampler.draw(rng) == 7 for _ in range(50))

    def test_draws_match_weights(self):
        sampler = CdfSampler([0, 1], [0.25, 0.75])
        rng = np.random.default_rng(1)
        draws = np.array([sampler.draw(rng) for _ in range(4000)])
        assert abs(draws.mean() - 0.75) < 0.03

    def test_tolerates_rounding_shortfall(self):
        probs = np.full(3, 1.0 / 3) * (1 - 1e-9)
        sampler = CdfSampler([0, 1, 2], probs)

        class AlwaysOne:
            def random(self):
                return 0.9999999999999999

        assert sampler.draw(AlwaysOne()) == 2


class TestReflect:
    @pytest.mark.parametrize(
        "pos, n, expected",
        [
            (-3, 10, 3),
            (-1, 10, 1),
            (0, 10, 0),
            (9, 10, 9),
            (10, 10, 8),
            (12, 10, 6),
            (18, 10, 0),
            (19, 10, 1),
            (-19, 10, 1),
            (5, 1, 0),
        ],
    )
    def test_hand_traced_values(self, pos, n, expected):
        assert _reflect(pos, n) == expected

    def test_always_in_range(self):
        for n in (2, 3, 7):
            for pos in range(-4 * n, 4 * n):
                assert 0 <= _reflect(pos, n) <= n - 1


class TestJumpPropose:
    def test_jump_prob_one_always_global(self):
        sampler = CdfSampler([42], [1.0])
        rng = np.random.default_rng(0)
        order = np.arange(100)
        assert all(
            jump_propose(50, sampler, order, 5.0, 1.0, rng) == 42 for _ in range(20)
        )

    def test_jump_prob_zero_tiny_sigma_stays_put(self):
        sampler = CdfSampler([42], [1.0])
        rng = np.random.default_rng(0)
        order = np.arange(100) * 2  # order maps position -> label id
        assert jump_propose(7, sampler, order, 1e-12, 0.0, rng) == 14

    def test_diffusion_stays_in_range(self):
        sampler = CdfSampler([0], [1.0])
        rng = np.random.default_rng(2)
        order = np.arange(10)
        for _ in range(200):
            assert 0 <= jump_propose(9, sampler, order, 30.0, 0.0, rng) <= 9


class TestRerankDecompose:
    def test_matches_scalar_recomputation(self, small_instance):
        space = small_instance.space
        query, _ = small_instance.queries[0]
        rng = np.random.default_rng(11)
        ids = rng.choice(space.n, size=12, replace=False)
        raw = rng.normal(0.0, 0.4, size=12)
        cfg = SearchConfig(budget_total=60, temperature=0.07,
                           lambda_action=0.3, lambda_object=0.5)
        ranking = rerank_decompose(query, ids, raw, space, cfg)

        m = float(max(raw))
        z = [math.exp((s - m) / cfg.temperature) for s in raw]
        liks = [v / sum(z) for v in z]
        by_id = {}
        for k, label_id in enumerate(ids):
            label = space.labels[label_id]
            sa = float(space.embeddings.action_vectors[label.action] @ query.vector)
            so = float(space.embeddings.object_vectors[label.object] @ query.vector)
            by_id[int(label_id)] = (
                liks[k] + cfg.lambda_action * sa + cfg.lambda_object * so,
                liks[k], sa, so,
            )
        for cand in ranking:
            final, lik, sa, so = by_id[cand.label_id]
            assert cand.final_score == pytest.approx(final, abs=1e-12)
            assert cand.likelihood == pytest.approx(lik, abs=1e-12)
            assert cand.action_score == pytest.approx(sa, abs=1e-12)
            assert cand.object_score == pytest.approx(so, abs=1e-12)
        finals = [c.final_score for c in ranking]
        assert finals == sorted(finals, reverse=True)

    def test_zero_lambdas_preserve_likelihood_order(self, small_instance):
        space = small_instance.space
        query, _ = small_instance.queries[0]
        rng = np.random.default_rng(12)
        ids = rng.choice(space.n, size=15, replace=False)
        raw = rng.normal(size=15)
        cfg = SearchConfig(budget_total=60)
        ranking = rerank_decompose(query, ids, raw, space, cfg)
        liks = normalize_pool(raw, cfg.temperature)
        expected = [int(ids[k]) for k in np.lexsort((ids, -liks))]
        assert [c.label_id for c in ranking] == expected
        # alignment is still reported for inspection; it just carries no weight
        assert all(c.final_score == c.likelihood for c in ranking)

    def test_ties_break_by_ascending_id(self, small_instance):
        space = small_instance.space
        query, _ = small_instance.queries[0]
        ids = np.array([9, 4, 31])
        raw = np.zeros(3)  # identical likelihoods
        ranking = rerank_decompose(query, ids, raw, space, SearchConfig(budget_total=60))
        assert [c.label_id for c in ranking] == [4, 9, 31]

    def test_nonzero_lambda_requires_concepts(self, small_instance):
        space = small_instance.space
        cfg = SearchConfig(budget_total=60, lambda_action=0.5)
        with pytest.raises(ValueError, match="query vector"):
            rerank_decompose(QueryRepr(vector=None), [0, 1], [0.1, 0.2], space, cfg)


class TestRunSearch:
    def run(self, instance, qid=0, **kwargs):
        query, _ = instance.queries[qid]
        oracle = instance.backend(qid)
        cfg = SearchConfig(**{"budget_total": 40, "refine_top_k": 2,
                              "refine_radius": 1, "seed": 0, **kwargs})
        return run_search(query, instance.space, oracle, cfg)

    def test_phases_in_order_and_calls_non_decreasing(self, small_instance):
        result = self.run(small_instance)
        phases = [e.phase for e in result.trajectory]
        assert set(phases) <= set(PHASE_ORDER)
        indices = [PHASE_ORDER.index(p) for p in phases]
        assert indices == sorted(indices)
        calls = [e.cumulative_calls for e in result.trajectory]
        assert calls == sorted(calls)
        assert phases[0] == PHASE_EXPLORE
        assert PHASE_RERANK in phases

    def test_budget_respected_and_ranking_covers_pool(self, small_instance):
        result = self.run(small_instance)
        assert result.unique_calls <= 40
        assert len(result.ranking) == result.unique_calls

    def test_deterministic_given_seed(self, small_instance):
        a = self.run(small_instance, seed=123)
        b = self.run(small_instance, seed=123)
        assert a.trajectory == b.trajectory
        assert a.ranking == b.ranking
        c = self.run(small_instance, seed=124)
        assert c.trajectory != a.trajectory

    def test_exhaustive_scan_matches_brute_force(self, small_instance):
        n = small_instance.space.n
        query, _ = small_instance.queries[0]
        oracle = small_instance.backend(0)
        cfg = SearchConfig(budget_total=n, refine_top_k=2, refine_radius=1)
        result = run_search(query, small_instance.space, oracle, cfg, exhaustive=True)
        assert result.unique_calls == n
        best, _ = brute_force_argmax(query, small_instance.space, oracle)
        assert result.top1.label_id == best

    def test_exhaustive_needs_full_budget(self, small_instance):
        query, _ = small_instance.queries[0]
        cfg = SearchConfig(budget_total=10, refine_top_k=1, refine_radius=0)
        with pytest.raises(ValueError, match="exhaustive"):
            run_search(query, small_instance.space, small_instance.backend(0),
                       cfg, exhaustive=True)

    def test_budget_below_reserve_rejected(self, small_instance):
        query, _ = small_instance.queries[0]
        cfg = SearchConfig(budget_total=25)  # reserve is 25, needs 26
        with pytest.raises(ValueError, match="cover the refinement reserve"):
            run_search(query, small_instance.space, small_instance.backend(0), cfg)

    def test_finds_planted_label_noise_free(self, small_instance):
        # informative L1 prior plus a smooth landscape: an easy instance
        hits = 0
        for seed in range(10):
            result = self.run(small_instance, seed=seed)
            query, planted = small_instance.queries[0]
            hits += result.top1.label_id == planted
        assert hits >= 8

    def test_refinement_covers_anchor_neighbors_of_best(self, small_instance):
        space = small_instance.space
        result = self.run(small_instance, budget_total=59)
        refined = [e.label_id for e in result.trajectory if e.phase == PHASE_REFINE]
        evaluated = {e.label_id for e in result.trajectory
                     if e.phase in (PHASE_EXPLORE, PHASE_EXPLOIT)}
        scores = {e.label_id: e.raw_score for e in result.trajectory
                  if e.phase in (PHASE_EXPLORE, PHASE_EXPLOIT)}
        best = max(evaluated, key=lambda i: (scores[i], -i))
        pos = int(space.positions[best])
        window = {int(space.order[q])
                  for q in range(max(0, pos - 1), min(space.n - 1, pos + 1) + 1)}
        assert window <= set(refined) | evaluated


class TestHelpers:
    def test_derive_query_seed_stable_and_distinct(self):
        assert derive_query_seed(7, 0) == derive_query_seed(7, 0)
        seeds = {derive_query_seed(7, q) for q in range(50)}
        assert len(seeds) == 50

    def test_result_summary_shape(self, small_instance):
        query, _ = small_instance.queries[0]
        cfg = SearchConfig(budget_total=40, refine_top_k=2, refine_radius=1)
        result = run_search(query, small_instance.space,
                            small_instance.backend(0), cfg)
        summary = result_summary(result)
        assert summary["unique_calls"] == result.unique_calls
        assert len(summary["ranking_head"]) == min(10, len(result.ranking))
        assert set(summary["ranking_head"][0]) == {
            "label_id", "final_score", "likelihood", "action_score", "object_score"
        }
