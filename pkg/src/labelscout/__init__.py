"""Budget-constrained stochastic search for the best label in a large
compositional vocabulary, guided by a knowledge prior and an expensive
likelihood oracle, with taxonomy-aware evaluation metrics."""

from .formats import FormatError, read_prse, write_prse
from .metrics import EvalReport, Taxonomy, evaluate, evaluate_pairs, wu_palmer, wups_phrase
from .oracle import (
    DotProductBackend,
    OracleSession,
    QueryRepr,
    ReplayBackend,
    SyntheticBackend,
    make_synthetic_oracle,
    normalize_pool,
)
from .search import (
    RankedLabel,
    SearchConfig,
    SearchResult,
    TrajectoryEvent,
    explore_distribution,
    guided_distribution,
    rerank_decompose,
    run_search,
)
from .space import (
    AffinityTable,
    EmbeddingTable,
    Label,
    SearchSpace,
    build_prior,
    default_anchor,
    load_bundle,
    load_vocabulary,
    save_bundle,
    sort_by_anchor,
)
from .synth import SyntheticInstance, brute_force_argmax, budget_sweep, generate

__version__ = "0.1.0"

__all__ = [
    "AffinityTable",
    "DotProductBackend",
    "EmbeddingTable",
    "EvalReport",
    "FormatError",
    "Label",
    "OracleSession",
    "QueryRepr",
    "RankedLabel",
    "ReplayBackend",
    "SearchConfig",
    "SearchResult",
    "SearchSpace",
    "SyntheticBackend",
    "SyntheticInstance",
    "Taxonomy",
    "TrajectoryEvent",
    "brute_force_argmax",
    "budget_sweep",
    "build_prior",
    "default_anchor",
    "evaluate",
    "evaluate_pairs",
    "explore_distribution",
    "generate",
    "guided_distribution",
    "load_bundle",
    "load_vocabulary",
    "make_synthetic_oracle",
    "normalize_pool",
    "read_prse",
    "rerank_decompose",
    "run_search",
    "save_bundle",
    "sort_by_anchor",
    "wu_palmer",
    "wups_phrase",
    "write_prse",
    "__version__",
]
