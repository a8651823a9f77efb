"""Synthetic desk-scale instances with known ground truth.

Label embeddings are compositional (action vector + object vector + noise)
so the decomposition re-ranking has verifiable signal, and the prior's
sharpness is controlled per openness level: informative at L1, diluted at
L2, near-uniform at L3. Everything is a pure function of its parameters
via PCG64, so equal inputs are bit-identical on any platform.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .oracle import OracleSession, QueryRepr, SyntheticBackend
from .search import SearchConfig, run_search
from .space import EmbeddingTable, Label, SearchSpace

OPENNESS_LEVELS = ("L1", "L2", "L3")

# Temperature of the prior softmax over distance-to-planted, per level.
PRIOR_TEMPERATURE = {"L1": 0.08, "L2": 0.30, "L3": 3.0}

# Reference vocabulary sizes per level (exhaustive-scan call counts of the
# small/large benchmark regimes).
LEVEL_SIZES = {"L1": 380, "L2": 37191, "L3": 195714}


@dataclass(frozen=True)
class SyntheticInstance:
    space: SearchSpace
    queries: tuple          # (QueryRepr, planted label id) pairs
    sharpness: float
    noise_sd: float
    seed: int

    def backend(self, qid: int) -> SyntheticBackend:
        """Planted-peak oracle for one query of this instance."""
        _, planted = self.queries[qid]
        return SyntheticBackend(
            self.space.embeddings.vectors, planted, self.sharpness,
            self.noise_sd, seed=self.seed + qid,
        )


def generate(n_labels, n_actions, n_objects, dim, n_queries, seed,
             openness_level="L1", *, embed_noise=0.05, query_noise=0.02,
             sharpness=5.0, noise_sd=0.0) -> SyntheticInstance:
    """Generate a synthetic instance with planted ground-truth labels."""
    if openness_level not in OPENNESS_LEVELS:
        raise ValueError(f"openness_level must be one of {OPENNESS_LEVELS}")
    if n_actions * n_objects < n_labels:
        raise ValueError(
            f"{n_actions} actions x {n_objects} objects cannot yield"
            f" {n_labels} distinct labels"
        )
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if n_labels < 1 or n_queries < 1:
        raise ValueError("need at least one label and one query")

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    action_vecs = _unit_rows(rng.standard_normal((n_actions, dim)))
    object_vecs = _unit_rows(rng.standard_normal((n_objects, dim)))

    flat = rng.choice(n_actions * n_objects, size=n_labels, replace=False)
    a_idx, o_idx = np.divmod(flat, n_objects)
    vectors = action_vecs[a_idx] + object_vecs[o_idx]
    if embed_noise > 0:
        vectors = vectors + embed_noise * rng.standard_normal((n_labels, dim))
    vectors = _unit_rows(vectors)

    a_tokens = [f"act{i:04d}" for i in range(n_actions)]
    o_tokens = [f"obj{j:04d}" for j in range(n_objects)]
    labels = [
        Label(k, a_tokens[a_idx[k]], o_tokens[o_idx[k]]) for k in range(n_labels)
    ]
    table = EmbeddingTable(
        vectors,
        action_vectors={t: action_vecs[i] for i, t in enumerate(a_tokens)},
        object_vectors={t: object_vecs[j] for j, t in enumerate(o_tokens)},
    )

    planted = rng.choice(n_labels, size=n_queries, replace=n_queries > n_labels)
    queries = []
    for qid, p in enumerate(planted):
        qv = vectors[p]
        if query_noise > 0:
            qv = qv + query_noise * rng.standard_normal(dim)
        queries.append((QueryRepr.from_vector(qv, qid=qid), int(p)))

    prior = planted_prior(vectors, planted, PRIOR_TEMPERATURE[openness_level])
    space = SearchSpace.build(labels, table, prior)
    return SyntheticInstance(
        space=space, queries=tuple(queries),
        sharpness=float(sharpness), noise_sd=float(noise_sd), seed=int(seed),
    )


def planted_prior(vectors, planted_ids, temperature: float) -> np.ndarray:
    """Prior mass as a tempered softmax over negative cosine distance to the
    planted labels; small temperature = informative, large = near-uniform."""
    vectors = np.asarray(vectors, dtype=np.float64)
    planted_ids = np.atleast_1d(np.asarray(planted_ids, dtype=np.int64))
    dists = 1.0 - vectors @ vectors[planted_ids].T   # (n, n_planted)
    weights = np.exp(-dists / temperature).sum(axis=1)
    return weights / weights.sum()


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    return mat / np.linalg.norm(mat, axis=1, keepdims=True)


def brute_force_argmax(query: QueryRepr, space, oracle, session=None):
    """Scan every label once; returns (label id, score) with ascending-id
    tie-break. The reference answer any budgeted search is judged against."""
    if session is None:
        session = OracleSession(oracle, query)
    session.score_all()
    scores = session.scores_array()  # insertion order is label id order
    best = int(np.lexsort((np.arange(len(scores)), -scores))[0])
    return best, float(scores[best])


def full_scores(query: QueryRepr, space, oracle) -> np.ndarray:
    """All raw scores indexed by label id (diagnostic, no ledger)."""
    if hasattr(oracle, "raw_all"):
        return np.asarray(oracle.raw_all(query), dtype=np.float64)
    return np.array(
        [oracle.raw_score(query, i) for i in range(space.n)], dtype=np.float64
    )


SWEEP_HEADER = ("budget", "seed", "hit", "regret", "true_rank", "unique_calls")


def budget_sweep(instance: SyntheticInstance, budgets, n_seeds,
                 config: SearchConfig, qid: int = 0, *, on_result=None):
    """Run the search across a budget x seed grid against one query.

    Each cell records whether the search's top-1 equals the brute-force
    argmax, the likelihood regret (best score minus best found score), the
    rank of the true argmax in the returned ranking (len(ranking)+1 when it
    was never evaluated), and the unique calls spent. ``on_result(budget,
    seed, result)`` is invoked after each cell when given, e.g. to export
    trajectories.
    """
    budgets = [int(b) for b in budgets]
    if any(b < 1 or b > instance.space.n for b in budgets):
        raise ValueError(f"budgets must lie in [1, {instance.space.n}]")
    query, _ = instance.queries[qid]
    oracle = instance.backend(qid)
    scores = full_scores(query, instance.space, oracle)
    true_best = int(np.lexsort((np.arange(len(scores)), -scores))[0])
    best_score = float(scores[true_best])

    rows = []
    for budget in budgets:
        for seed in range(n_seeds):
            cfg = replace(config, budget_total=budget, seed=seed)
            result = run_search(query, instance.space, oracle, cfg)
            found = result.top1.label_id
            found_best = max(scores[c.label_id] for c in result.ranking)
            rank = next(
                (k + 1 for k, c in enumerate(result.ranking)
                 if c.label_id == true_best),
                len(result.ranking) + 1,
            )
            rows.append({
                "budget": budget,
                "seed": seed,
                "hit": int(found == true_best),
                "regret": best_score - float(found_best),
                "true_rank": rank,
                "unique_calls": result.unique_calls,
            })
            if on_result is not None:
                on_result(budget, seed, result)
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_HEADER)
        writer.writeheader()
        writer.writerows(rows)


def sweep_summary(rows):
    """Per-budget means of hit rate, regret, true rank and unique calls."""
    by_budget: dict[int, list] = {}
    for row in rows:
        by_budget.setdefault(row["budget"], []).append(row)
    summary = []
    for budget in sorted(by_budget):
        cell = by_budget[budget]
        n = len(cell)
        summary.append({
            "budget": budget,
            "hit_rate": sum(r["hit"] for r in cell) / n,
            "mean_regret": sum(r["regret"] for r in cell) / n,
            "mean_true_rank": sum(r["true_rank"] for r in cell) / n,
            "mean_unique_calls": sum(r["unique_calls"] for r in cell) / n,
        })
    return summary
