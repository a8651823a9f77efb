"""Budgeted stochastic label search.

Three call-consuming phases run under a hard unique-call budget:

1. exploration: jump-diffusion proposals against the prior/uniform mixture,
2. exploitation: proposals against the prior-times-likelihood posterior,
   recomputed over the evaluated pool after every step,
3. refinement: deterministic re-evaluation of anchor-order neighborhoods
   around the best raw scores found so far,

followed by a free re-ranking pass that decomposes each candidate into
action and object alignment scores.

Randomness comes from a single PCG64 generator seeded per run, so equal
inputs give bit-identical trajectories on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .oracle import OracleSession, QueryRepr, normalize_pool

PHASE_EXPLORE = "explore"
PHASE_EXPLOIT = "exploit"
PHASE_REFINE = "refine"
PHASE_RERANK = "rerank"

RERANK_HEAD = 10  # ranked candidates logged as rerank trajectory events


@dataclass
class SearchConfig:
    """All search tunables. ``local_sigma=None`` resolves to |S|/50 at run
    time; the refinement reserve ``refine_top_k * (2*refine_radius + 1)``
    must leave at least one exploration step inside the budget."""

    budget_total: int
    lambda_mix: float = 0.6
    temperature: float = 0.05
    lambda_action: float = 0.0
    lambda_object: float = 0.0
    explore_fraction: float = 0.4
    jump_prob: float = 0.3
    local_sigma: float | None = None
    refine_top_k: int = 5
    refine_radius: int = 2
    seed: int = 0

    def refine_reserve(self) -> int:
        return self.refine_top_k * (2 * self.refine_radius + 1)

    def validate(self) -> None:
        if self.budget_total < 1:
            raise ValueError("budget_total must be a positive integer")
        if not 0.0 <= self.lambda_mix <= 1.0:
            raise ValueError("lambda_mix must be in [0, 1]")
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        if self.lambda_action < 0 or self.lambda_object < 0:
            raise ValueError("lambda_action and lambda_object must be >= 0")
        if not 0.0 < self.explore_fraction < 1.0:
            raise ValueError("explore_fraction must be in (0, 1)")
        if not 0.0 <= self.jump_prob <= 1.0:
            raise ValueError("jump_prob must be in [0, 1]")
        if self.local_sigma is not None and not self.local_sigma > 0:
            raise ValueError("local_sigma must be > 0")
        if self.refine_top_k < 1:
            raise ValueError("refine_top_k must be a positive integer")
        if self.refine_radius < 0:
            raise ValueError("refine_radius must be >= 0")
        if self.refine_reserve() > self.budget_total:
            raise ValueError(
                f"refinement needs up to {self.refine_reserve()} calls,"
                f" exceeding budget {self.budget_total}"
            )


@dataclass(frozen=True)
class TrajectoryEvent:
    step: int
    phase: str
    label_id: int
    raw_score: float
    cumulative_calls: int

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "phase": self.phase,
            "label_id": self.label_id,
            "raw_score": self.raw_score,
            "cumulative_calls": self.cumulative_calls,
        }


@dataclass(frozen=True)
class RankedLabel:
    label_id: int
    final_score: float
    likelihood: float
    action_score: float
    object_score: float

    def to_dict(self) -> dict:
        return {
            "label_id": self.label_id,
            "final_score": self.final_score,
            "likelihood": self.likelihood,
            "action_score": self.action_score,
            "object_score": self.object_score,
        }


@dataclass(frozen=True)
class SearchResult:
    """Final ranking over every evaluated label plus the full trajectory."""

    ranking: tuple
    unique_calls: int
    trajectory: tuple
    degenerate_steps: tuple = ()

    @property
    def top1(self) -> RankedLabel:
        return self.ranking[0]


def explore_distribution(prior, lambda_mix: float) -> np.ndarray:
    """Prior/uniform mixture: lambda * prior + (1 - lambda) / |S|."""
    prior = np.asarray(prior, dtype=np.float64)
    if not 0.0 <= lambda_mix <= 1.0:
        raise ValueError("lambda_mix must be in [0, 1]")
    return lambda_mix * prior + (1.0 - lambda_mix) / prior.shape[0]


def guided_distribution(prior_pool, pool_likelihoods):
    """Posterior over an evaluated pool: prior * likelihood, renormalized.

    Returns (distribution, degenerate) where degenerate flags an all-zero
    product mass; in that case the distribution falls back to uniform over
    the pool instead of aborting the search.
    """
    prior_pool = np.asarray(prior_pool, dtype=np.float64)
    lik = np.asarray(pool_likelihoods, dtype=np.float64)
    if prior_pool.shape != lik.shape or prior_pool.size == 0:
        raise ValueError("pool prior and likelihood must be non-empty, same shape")
    mass = prior_pool * lik
    total = mass.sum()
    if total <= 0.0:
        return np.full(mass.shape[0], 1.0 / mass.shape[0]), True
    return mass / total, False


class CdfSampler:
    """Inverse-CDF sampler over a fixed discrete distribution of label ids."""

    def __init__(self, ids, probs):
        self.ids = np.asarray(ids, dtype=np.int64)
        cdf = np.cumsum(np.asarray(probs, dtype=np.float64))
        cdf[-1] = 1.0
        self.cdf = cdf

    def draw(self, rng) -> int:
        k = int(np.searchsorted(self.cdf, rng.random(), side="right"))
        return int(self.ids[min(k, len(self.ids) - 1)])


def _reflect(pos: int, n: int) -> int:
    """Reflect an index into [0, n-1] at both boundaries."""
    if n == 1:
        return 0
    period = 2 * (n - 1)
    pos %= period
    return pos if pos < n else period - pos


def jump_propose(pos, dist: CdfSampler, order, local_sigma, jump_prob, rng) -> int:
    """One proposal: a global jump from ``dist`` with probability
    ``jump_prob``, otherwise a reflected Gaussian diffusion step of
    ``local_sigma`` positions along the anchor ordering."""
    if jump_prob > 0.0 and rng.random() < jump_prob:
        return dist.draw(rng)
    offset = int(round(rng.normal(0.0, local_sigma))) if local_sigma > 0 else 0
    return int(order[_reflect(pos + offset, len(order))])


def rerank_decompose(query: QueryRepr, candidate_ids, raw_scores, space, config):
    """Final ranking: pool-softmax likelihood plus weighted action/object
    alignment, sorted descending with ascending-id tie-break.

    Concept alignment uses the space's local embedding tables and never
    touches the oracle ledger.
    """
    candidate_ids = np.asarray(candidate_ids, dtype=np.int64)
    liks = normalize_pool(raw_scores, config.temperature)
    acts = space.embeddings.action_vectors
    objs = space.embeddings.object_vectors

    need_concepts = config.lambda_action > 0 or config.lambda_object > 0
    use_concepts = acts is not None and objs is not None and query.vector is not None
    if need_concepts and not use_concepts:
        missing = "concept embeddings" if query.vector is not None else "a query vector"
        raise ValueError(
            f"re-ranking with nonzero lambda_action/lambda_object needs {missing}"
        )

    s_a = np.zeros(len(candidate_ids))
    s_o = np.zeros(len(candidate_ids))
    if use_concepts:
        for k, label_id in enumerate(candidate_ids):
            label = space.labels[label_id]
            try:
                va = acts[label.action]
            except KeyError:
                raise ValueError(f"no action embedding for token {label.action!r}")
            try:
                vo = objs[label.object]
            except KeyError:
                raise ValueError(f"no object embedding for token {label.object!r}")
            s_a[k] = va @ query.vector
            s_o[k] = vo @ query.vector

    finals = liks + config.lambda_action * s_a + config.lambda_object * s_o
    rank = np.lexsort((candidate_ids, -finals))
    return [
        RankedLabel(
            int(candidate_ids[k]),
            float(finals[k]),
            float(liks[k]),
            float(s_a[k]),
            float(s_o[k]),
        )
        for k in rank
    ]


def run_search(query: QueryRepr, space, oracle, config: SearchConfig,
               exhaustive: bool = False) -> SearchResult:
    """Run one budgeted search for the highest-likelihood label.

    Phase sizes are in proposals: exploration gets
    ``floor(explore_fraction * budget_total)`` draws, exploitation the rest
    of the pre-refinement budget (budget minus the refinement reserve).
    Proposals that would push unique calls past the budget are skipped and
    end their phase, so ``unique_calls <= budget_total`` always holds.

    With ``exhaustive=True`` the proposal scheme is bypassed and every label
    is scanned once (requires ``budget_total >= |S|``); refinement and
    re-ranking still run, at zero extra cost.
    """
    config.validate()
    n = space.n
    if n == 0:
        raise ValueError("empty search space")
    budget = config.budget_total
    reserve = config.refine_reserve()
    if not exhaustive and budget < reserve + 1:
        raise ValueError(
            f"budget {budget} cannot cover the refinement reserve {reserve}"
            " plus one exploration step"
        )
    if exhaustive and budget < n:
        raise ValueError(f"exhaustive scan of {n} labels needs budget >= {n}")

    sigma = config.local_sigma if config.local_sigma is not None else n / 50.0
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))
    session = OracleSession(oracle, query)
    trajectory: list[TrajectoryEvent] = []
    degenerate_steps: list[int] = []
    step = 0

    def log(phase, label_id, score):
        trajectory.append(
            TrajectoryEvent(step, phase, int(label_id), float(score),
                            session.unique_calls)
        )

    if exhaustive:
        for label_id in range(n):
            step += 1
            log(PHASE_EXPLORE, label_id, session.score(label_id))
    else:
        explore_steps = max(1, math.floor(config.explore_fraction * budget))
        exploit_steps = max(0, budget - reserve - explore_steps)

        p_explore = explore_distribution(space.prior, config.lambda_mix)
        explore_sampler = CdfSampler(np.arange(n), p_explore)

        pos = None
        for _ in range(explore_steps):
            step += 1
            if pos is None:
                label_id = explore_sampler.draw(rng)  # first proposal: global
            else:
                label_id = jump_propose(pos, explore_sampler, space.order,
                                        sigma, config.jump_prob, rng)
            if not session.is_cached(label_id) and session.unique_calls + 1 > budget:
                break
            log(PHASE_EXPLORE, label_id, session.score(label_id))
            pos = int(space.positions[label_id])

        for _ in range(exploit_steps):
            step += 1
            ids = session.ids_array()
            liks = normalize_pool(session.scores_array(), config.temperature)
            guided, degenerate = guided_distribution(space.prior[ids], liks)
            if degenerate:
                degenerate_steps.append(step)
            sampler = CdfSampler(ids, guided)
            if pos is None:
                label_id = sampler.draw(rng)
            else:
                label_id = jump_propose(pos, sampler, space.order,
                                        sigma, config.jump_prob, rng)
            if not session.is_cached(label_id) and session.unique_calls + 1 > budget:
                break
            log(PHASE_EXPLOIT, label_id, session.score(label_id))
            pos = int(space.positions[label_id])

    # Refinement: windows of +-refine_radius anchor positions around the
    # refine_top_k best raw scores, rank-major then position-ascending.
    ids = session.ids_array()
    scores = session.scores_array()
    if ids.size:
        top = ids[np.lexsort((ids, -scores))][: config.refine_top_k]
        refine_seq: list[int] = []
        seen: set[int] = set()
        for center in top:
            p = int(space.positions[center])
            lo = max(0, p - config.refine_radius)
            hi = min(n - 1, p + config.refine_radius)
            for q in range(lo, hi + 1):
                label_id = int(space.order[q])
                if label_id not in seen:
                    seen.add(label_id)
                    refine_seq.append(label_id)
        for label_id in refine_seq:
            if not session.is_cached(label_id) and session.unique_calls + 1 > budget:
                break
            step += 1
            log(PHASE_REFINE, label_id, session.score(label_id))

    ranking = rerank_decompose(query, session.ids_array(), session.scores_array(),
                               space, config)
    for cand in ranking[:RERANK_HEAD]:
        step += 1
        log(PHASE_RERANK, cand.label_id, cand.final_score)

    if session.unique_calls > budget:
        raise AssertionError(
            f"budget violated: {session.unique_calls} > {budget}"
        )
    return SearchResult(
        ranking=tuple(ranking),
        unique_calls=session.unique_calls,
        trajectory=tuple(trajectory),
        degenerate_steps=tuple(degenerate_steps),
    )


def derive_query_seed(base_seed: int, qid: int) -> int:
    """Independent per-query seed from a base seed, stable across platforms."""
    ss = np.random.SeedSequence(base_seed, spawn_key=(qid,))
    return int(ss.generate_state(1, np.uint64)[0])


def result_summary(result: SearchResult, head: int = RERANK_HEAD) -> dict:
    """Summary record appended as the final line of a trajectory export."""
    return {
        "ranking_head": [c.to_dict() for c in result.ranking[:head]],
        "unique_calls": result.unique_calls,
        "degenerate_steps": list(result.degenerate_steps),
    }
