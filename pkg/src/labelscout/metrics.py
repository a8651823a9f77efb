"""Open-world evaluation: Wu-Palmer similarity and exact-match accuracies.

The taxonomy is user-supplied data (an edge-list file with a declared
root); concepts missing from it fall back to exact-string scoring, since
large generated vocabularies are open-ended. All functions are pure and
safe to parallelize across queries.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from . import formats
from .formats import canon_token
from .space import Label


class Taxonomy:
    """Concept hierarchy with multiple parents allowed and a single root.

    Depth counts the root as 1 and uses the shortest root path. Every node
    must reach the root and the parent graph must be acyclic.
    """

    def __init__(self, parents: dict, root: str):
        self.root = canon_token(root)
        self.parents = {
            canon_token(c): frozenset(canon_token(p) for p in ps)
            for c, ps in parents.items()
        }
        self.parents.setdefault(self.root, frozenset())
        if self.parents[self.root]:
            raise ValueError(f"root {self.root!r} must not have parents")
        self._check_acyclic()
        self.depth = self._depths_from_root()
        unreachable = set(self.parents) - set(self.depth)
        if unreachable:
            raise ValueError(
                f"nodes cannot reach root {self.root!r}: {sorted(unreachable)}"
            )
        self._ancestors: dict[str, frozenset] = {}

    @classmethod
    def load(cls, path) -> "Taxonomy":
        parents, root = formats.parse_taxonomy(path)
        return cls(parents, root)

    def __contains__(self, concept: str) -> bool:
        return canon_token(concept) in self.parents

    def __len__(self) -> int:
        return len(self.parents)

    @property
    def nodes(self):
        return self.parents.keys()

    def _check_acyclic(self) -> None:
        # Kahn's algorithm over child -> parent edges.
        out_deg = {node: len(ps) for node, ps in self.parents.items()}
        children: dict[str, list] = {node: [] for node in self.parents}
        for child, ps in self.parents.items():
            for p in ps:
                if p not in children:
                    raise ValueError(f"parent {p!r} is not a declared node")
                children[p].append(child)
        queue = deque(node for node, d in out_deg.items() if d == 0)
        seen = 0
        while queue:
            node = queue.popleft()
            seen += 1
            for child in children[node]:
                out_deg[child] -= 1
                if out_deg[child] == 0:
                    queue.append(child)
        if seen != len(self.parents):
            raise ValueError("taxonomy contains a directed cycle")

    def _depths_from_root(self) -> dict:
        children: dict[str, list] = {node: [] for node in self.parents}
        for child, ps in self.parents.items():
            for p in ps:
                children[p].append(child)
        depth = {self.root: 1}
        queue = deque([self.root])
        while queue:
            node = queue.popleft()
            for child in children[node]:
                if child not in depth:
                    depth[child] = depth[node] + 1
                    queue.append(child)
        return depth

    def ancestors(self, concept: str) -> frozenset:
        """All ancestors of a concept, including itself."""
        concept = canon_token(concept)
        if concept not in self.parents:
            raise KeyError(f"unknown concept {concept!r}")
        cached = self._ancestors.get(concept)
        if cached is not None:
            return cached
        seen = {concept}
        queue = deque([concept])
        while queue:
            for p in self.parents[queue.popleft()]:
                if p not in seen:
                    seen.add(p)
                    queue.append(p)
        result = frozenset(seen)
        self._ancestors[concept] = result
        return result


def wu_palmer(taxonomy: Taxonomy, c1: str, c2: str) -> float:
    """Wu-Palmer similarity: 2 * depth(lcs) / (depth(c1) + depth(c2)), with
    the lcs the deepest common ancestor over all parent paths."""
    c1, c2 = canon_token(c1), canon_token(c2)
    for c in (c1, c2):
        if c not in taxonomy:
            raise KeyError(f"unknown concept {c!r}")
    common = taxonomy.ancestors(c1) & taxonomy.ancestors(c2)
    lcs_depth = max(taxonomy.depth[a] for a in common)
    return 2.0 * lcs_depth / (taxonomy.depth[c1] + taxonomy.depth[c2])


def _component_score(taxonomy, predicted: str, truth: str) -> float:
    """Wu-Palmer when both concepts are known, exact-string match otherwise.
    A missing taxonomy degrades every comparison to exact-string."""
    predicted, truth = canon_token(predicted), canon_token(truth)
    if taxonomy is not None and predicted in taxonomy and truth in taxonomy:
        return wu_palmer(taxonomy, predicted, truth)
    return 1.0 if predicted == truth else 0.0


def wups_phrase(taxonomy, predicted: Label, truth: Label):
    """(object, action, activity) similarity scores for a predicted label;
    the activity score is the mean of the two component scores."""
    object_score = _component_score(taxonomy, predicted.object, truth.object)
    action_score = _component_score(taxonomy, predicted.action, truth.action)
    return object_score, action_score, (object_score + action_score) / 2.0


@dataclass(frozen=True)
class EvalReport:
    activity_accuracy: float
    phrase_accuracy: float
    wups_object: float
    wups_action: float
    wups_activity: float
    mean_unique_calls: float
    n_queries: int

    def to_dict(self) -> dict:
        return {
            "activity_accuracy": self.activity_accuracy,
            "phrase_accuracy": self.phrase_accuracy,
            "wups_object": self.wups_object,
            "wups_action": self.wups_action,
            "wups_activity": self.wups_activity,
            "mean_unique_calls": self.mean_unique_calls,
            "n_queries": self.n_queries,
        }


def evaluate_pairs(pairs, taxonomy=None, with_detail: bool = False):
    """Aggregate metrics over (query_id, predicted Label, truth Label,
    unique_calls) records. Returns an EvalReport, or (report, detail) with
    one detail dict per query when requested."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty evaluation set")
    phrase_hits = activity_hits = 0
    wo_sum = wa_sum = wact_sum = 0.0
    calls_sum = 0.0
    detail = []
    for qid, pred, truth, calls in pairs:
        p_action, p_object = canon_token(pred.action), canon_token(pred.object)
        t_action, t_object = canon_token(truth.action), canon_token(truth.object)
        phrase_hit = pred.phrase == truth.phrase
        activity_hit = p_action == t_action and p_object == t_object
        wo, wa, wact = wups_phrase(taxonomy, pred, truth)
        phrase_hits += phrase_hit
        activity_hits += activity_hit
        wo_sum += wo
        wa_sum += wa
        wact_sum += wact
        calls_sum += calls
        if with_detail:
            detail.append({
                "query_id": qid,
                "predicted": pred.phrase,
                "truth": truth.phrase,
                "phrase_hit": bool(phrase_hit),
                "activity_hit": bool(activity_hit),
                "wups_object": wo,
                "wups_action": wa,
                "wups_activity": wact,
                "unique_calls": calls,
            })
    n = len(pairs)
    report = EvalReport(
        activity_accuracy=activity_hits / n,
        phrase_accuracy=phrase_hits / n,
        wups_object=wo_sum / n,
        wups_action=wa_sum / n,
        wups_activity=wact_sum / n,
        mean_unique_calls=calls_sum / n,
        n_queries=n,
    )
    return (report, detail) if with_detail else report


def evaluate(predictions, truths, taxonomy, labels) -> EvalReport:
    """Evaluate (query_id, SearchResult) predictions against per-query truth
    labels; ``truths`` is indexed by query id and ``labels`` resolves ranked
    label ids back to Label records."""
    if not predictions:
        raise ValueError("empty evaluation set")
    seen = set()
    pairs = []
    for qid, result in predictions:
        if qid in seen:
            raise ValueError(f"duplicate query id {qid}")
        seen.add(qid)
        if not 0 <= qid < len(truths):
            raise ValueError(f"query id {qid} has no ground truth")
        pred = labels[result.top1.label_id]
        pairs.append((qid, pred, truths[qid], result.unique_calls))
    return evaluate_pairs(pairs, taxonomy)
