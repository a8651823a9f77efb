"""Command line interface.

Subcommands:

* ``build-space``: assemble a label-space bundle from a vocabulary,
  embeddings, and an optional affinity file.
* ``synth``: generate a synthetic compositional instance with planted
  ground truth, saved as a bundle plus query/oracle files.
* ``search``: run budget-constrained searches for each query against a
  bundle, writing per-query result JSON and trajectory JSONL.
* ``eval``: score predictions against ground truth with exact-match and
  taxonomy-similarity metrics.
* ``sweep``: grid budgets x seeds on one query and write a CSV (and a
  rendered figure) of hit rate and regret.
* ``replay-manifest``: re-run a previous command from its manifest.

Exit codes: 0 on success, 2 for input or usage errors, 1 for anything
unexpected.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .formats import (
    FormatError,
    read_prse,
    read_sidecar,
    read_truths,
    write_prse,
    write_truths,
)
from .manifest import load_manifest, replay_argv, write_manifest
from .metrics import Taxonomy, evaluate_pairs
from .oracle import DotProductBackend, QueryRepr, ReplayBackend, SyntheticBackend
from .search import SearchConfig, derive_query_seed, result_summary, run_search
from .space import (
    AffinityTable,
    EmbeddingTable,
    SearchSpace,
    build_prior,
    default_anchor,
    load_bundle,
    load_vocabulary,
    save_bundle,
)
from .synth import SyntheticInstance, budget_sweep, generate, sweep_summary, write_sweep_csv

QUERIES_FILE = "queries.prse"
ORACLE_FILE = "oracle.json"
REPLAY_FILE = "replay.prse"


class UsageError(ValueError):
    """Bad input that should exit with status 2."""


# ---------------------------------------------------------------------------
# config file


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines into a dict of search-config overrides."""
    known = {f.name for f in dataclasses.fields(SearchConfig)}
    out: dict = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if key not in known:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            out[key] = _coerce_config_value(key, value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return out


def _coerce_config_value(key: str, value: str):
    if key in ("budget_total", "refine_top_k", "refine_radius", "seed"):
        return int(value)
    if key == "local_sigma" and value.lower() in ("none", ""):
        return None
    return float(value)


def make_config(args) -> SearchConfig:
    """Merge defaults, config file, and CLI flags into a SearchConfig."""
    overrides: dict = {}
    if getattr(args, "config", None):
        overrides.update(parse_config_file(args.config))
    flag_map = {
        "budget": "budget_total",
        "lambda_mix": "lambda_mix",
        "temperature": "temperature",
        "lambda_action": "lambda_action",
        "lambda_object": "lambda_object",
        "explore_fraction": "explore_fraction",
        "jump_prob": "jump_prob",
        "local_sigma": "local_sigma",
        "refine_top_k": "refine_top_k",
        "refine_radius": "refine_radius",
        "seed": "seed",
    }
    for attr, field in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[field] = value
    if "budget_total" not in overrides:
        raise UsageError("a search budget is required (--budget or config file)")
    config = SearchConfig(**overrides)
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return config


def add_search_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("search parameters")
    group.add_argument("--budget", type=int, help="unique oracle call budget")
    group.add_argument("--lambda-mix", type=float, dest="lambda_mix")
    group.add_argument("--temperature", type=float)
    group.add_argument("--lambda-action", type=float, dest="lambda_action")
    group.add_argument("--lambda-object", type=float, dest="lambda_object")
    group.add_argument("--explore-fraction", type=float, dest="explore_fraction")
    group.add_argument("--jump-prob", type=float, dest="jump_prob")
    group.add_argument("--local-sigma", type=float, dest="local_sigma")
    group.add_argument("--refine-top-k", type=int, dest="refine_top_k")
    group.add_argument("--refine-radius", type=int, dest="refine_radius")
    parser.add_argument("--config", help="key=value file with search parameters")


def add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="base RNG seed")
    parser.add_argument("--jobs", type=int, default=1, help="parallel query workers")
    parser.add_argument("--output", required=True, help="output directory")


# ---------------------------------------------------------------------------
# oracle wiring


def load_queries(path, expect_dim: int | None = None) -> list[QueryRepr]:
    vectors = read_prse(path)
    if expect_dim is not None and vectors.shape[1] != expect_dim:
        raise UsageError(
            f"{path}: query dim {vectors.shape[1]} does not match space dim {expect_dim}"
        )
    return [QueryRepr.from_vector(row, qid=i) for i, row in enumerate(vectors)]


def make_backend(kind: str, space, args, bundle_dir: Path, qid: int):
    """Build the oracle backend for one query."""
    if kind == "dot":
        return DotProductBackend(space.embeddings.vectors)
    if kind == "synthetic":
        oracle_file = bundle_dir / ORACLE_FILE
        if not oracle_file.exists():
            raise UsageError(f"synthetic backend needs {oracle_file}")
        params = json.loads(oracle_file.read_text(encoding="utf-8"))
        truths = read_truths(bundle_dir / QUERIES_FILE)
        if not 0 <= qid < len(truths):
            raise UsageError(f"no planted label recorded for query {qid}")
        return SyntheticBackend(
            space.embeddings.vectors,
            planted_id=truths[qid],
            sharpness=float(params["sharpness"]),
            noise_sd=float(params.get("noise_sd", 0.0)),
            seed=int(params.get("seed", 0)) + qid,
        )
    if kind == "replay":
        replay = args.replay or str(bundle_dir / REPLAY_FILE)
        if not Path(replay).exists():
            raise UsageError(f"replay matrix not found: {replay}")
        backend = ReplayBackend.load(replay)
        if backend.n_labels != space.n:
            raise UsageError(
                f"{replay}: {backend.n_labels} score columns for {space.n} labels"
            )
        return backend
    raise UsageError(f"unknown backend {kind!r}")


# ---------------------------------------------------------------------------
# build-space


def cmd_build_space(args) -> int:
    for name in ("vocab", "embeddings"):
        path = getattr(args, name)
        if not Path(path).exists():
            raise UsageError(f"missing input file: {path}")
    labels = load_vocabulary(args.vocab)
    vectors = read_prse(args.embeddings)
    if vectors.shape[0] != len(labels):
        raise UsageError(
            f"{args.embeddings}: {vectors.shape[0]} rows for {len(labels)} labels"
        )
    action_vectors = object_vectors = None
    if args.actions:
        action_vectors = _load_concept_table(args.actions)
    if args.objects:
        object_vectors = _load_concept_table(args.objects)
    embeddings = EmbeddingTable(vectors, action_vectors, object_vectors)

    warnings = 0
    if args.affinity:
        affinity = AffinityTable.load(args.affinity)
        known = {(lab.action, lab.object) for lab in labels}
        warnings = sum(1 for pair in affinity.entries if pair not in known)
        if warnings:
            print(f"warning: {warnings} affinity pairs not in vocabulary", file=sys.stderr)
        prior = build_prior(labels, affinity, smoothing=args.smoothing)
    else:
        prior = np.full(len(labels), 1.0 / len(labels))

    if args.anchor_label is not None:
        if not 0 <= args.anchor_label < len(labels):
            raise UsageError(f"anchor label {args.anchor_label} out of range")
        anchor = embeddings.vectors[args.anchor_label].copy()
    else:
        anchor = default_anchor(embeddings)

    space = SearchSpace.build(labels, embeddings, prior, anchor=anchor)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_bundle(space, out_dir)
    write_manifest(
        out_dir,
        "build-space",
        _canonical_argv(args, ["vocab", "embeddings", "actions", "objects", "affinity", "config"]),
        inputs={"vocab": args.vocab, "embeddings": args.embeddings},
        warnings=warnings,
    )
    print(f"built space with {len(labels)} labels in {out_dir}")
    return 0


def _load_concept_table(path) -> dict:
    if not Path(path).exists():
        raise UsageError(f"missing input file: {path}")
    vectors = read_prse(path)
    tokens = read_sidecar(path, expected_rows=vectors.shape[0])
    return {tokens[i]: vectors[i] for i in range(vectors.shape[0])}


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    seed = args.seed if args.seed is not None else 0
    args.seed = seed
    instance = generate(
        n_labels=args.labels,
        n_actions=args.actions,
        n_objects=args.objects,
        dim=args.dim,
        n_queries=args.queries,
        seed=seed,
        openness_level=args.level,
        embed_noise=args.embed_noise,
        query_noise=args.query_noise,
        sharpness=args.sharpness,
        noise_sd=args.noise_sd,
    )
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_bundle(instance.space, out_dir)

    qvecs = np.stack([q.vector for q, _ in instance.queries])
    write_prse(out_dir / QUERIES_FILE, qvecs)
    write_truths(out_dir / QUERIES_FILE, [p for _, p in instance.queries])
    oracle_params = {
        "kind": "synthetic",
        "sharpness": instance.sharpness,
        "noise_sd": instance.noise_sd,
        "seed": instance.seed,
    }
    (out_dir / ORACLE_FILE).write_text(
        json.dumps(oracle_params, indent=2) + "\n", encoding="utf-8"
    )

    if args.emit_replay:
        rows = [
            instance.backend(qid).raw_all(query)
            for qid, (query, _) in enumerate(instance.queries)
        ]
        write_prse(out_dir / REPLAY_FILE, np.stack(rows))
        write_truths(out_dir / REPLAY_FILE, [p for _, p in instance.queries])

    write_manifest(out_dir, "synth", _canonical_argv(args, []), seed=seed)
    print(
        f"generated {args.labels} labels, {args.queries} queries "
        f"({args.level}) in {out_dir}"
    )
    return 0


# ---------------------------------------------------------------------------
# search

_WORKER: dict = {}


def _search_one(qid: int) -> dict:
    """Run one query search. Reads shared state set up before the pool forks."""
    space = _WORKER["space"]
    args = _WORKER["args"]
    bundle_dir = _WORKER["bundle_dir"]
    queries = _WORKER["queries"]
    base_config = _WORKER["config"]

    query = queries[qid]
    backend = make_backend(args.backend, space, args, bundle_dir, qid)
    config = dataclasses.replace(
        base_config, seed=derive_query_seed(base_config.seed, qid)
    )
    result = run_search(query, space, backend, config, exhaustive=args.exhaustive)

    out_dir = Path(args.output)
    record = {
        "query_id": qid,
        "unique_calls": result.unique_calls,
        "degenerate_steps": list(result.degenerate_steps),
        "ranking": [
            dict(r.to_dict(), phrase=space.labels[r.label_id].phrase)
            for r in result.ranking[: args.top]
        ],
    }
    _atomic_write(out_dir / f"result_q{qid:04d}.json", json.dumps(record, indent=2) + "\n")
    lines = [json.dumps(e.to_dict()) for e in result.trajectory]
    lines.append(json.dumps(result_summary(result)))
    _atomic_write(out_dir / f"trajectory_q{qid:04d}.jsonl", "\n".join(lines) + "\n")
    if args.plot:
        from .plots import plot_trajectory

        plot_trajectory(
            result.trajectory,
            out_dir / f"trajectory_q{qid:04d}.png",
            title=f"query {qid}",
        )
    return {"query_id": qid, "unique_calls": result.unique_calls}


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def cmd_search(args) -> int:
    bundle_dir = Path(args.space)
    if not bundle_dir.is_dir():
        raise UsageError(f"space bundle not found: {bundle_dir}")
    space = load_bundle(bundle_dir)

    queries_path = Path(args.queries) if args.queries else bundle_dir / QUERIES_FILE
    if args.backend == "replay" and not queries_path.exists():
        # Replay runs can work from recorded scores alone.
        replay = args.replay or str(bundle_dir / REPLAY_FILE)
        if not Path(replay).exists():
            raise UsageError(f"replay matrix not found: {replay}")
        n_queries = read_prse(replay).shape[0]
        queries = [QueryRepr(vector=None, qid=i) for i in range(n_queries)]
    else:
        if not queries_path.exists():
            raise UsageError(f"query file not found: {queries_path}")
        queries = load_queries(queries_path, expect_dim=space.dim)

    args.seed = args.seed if args.seed is not None else 0
    config = make_config(args)

    qids = list(range(len(queries)))
    if args.qid is not None:
        if not 0 <= args.qid < len(queries):
            raise UsageError(f"query id {args.qid} out of range")
        qids = [args.qid]

    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    _WORKER.update(
        space=space, args=args, bundle_dir=bundle_dir, queries=queries, config=config
    )
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(_search_one, qids))
    else:
        summaries = [_search_one(qid) for qid in qids]

    write_manifest(
        out_dir,
        "search",
        _canonical_argv(args, ["space", "queries", "replay", "config"]),
        inputs={"space": str(bundle_dir)},
        config=dataclasses.asdict(config),
        seed=args.seed,
    )
    mean_calls = float(np.mean([s["unique_calls"] for s in summaries]))
    print(f"searched {len(summaries)} queries, mean unique calls {mean_calls:.1f}")
    return 0


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args) -> int:
    labels = load_vocabulary(args.vocab)
    taxonomy = Taxonomy.load(args.taxonomy) if args.taxonomy else None
    truths = read_truths(args.truths)

    pred_dir = Path(args.predictions)
    result_files = sorted(pred_dir.glob("result_q*.json"))
    if not result_files:
        raise UsageError(f"no result files found in {pred_dir}")
    pairs = []
    for path in result_files:
        record = json.loads(path.read_text(encoding="utf-8"))
        qid = int(record["query_id"])
        if not 0 <= qid < len(truths):
            raise UsageError(f"{path}: no ground truth for query {qid}")
        pred_id = int(record["ranking"][0]["label_id"])
        truth_id = truths[qid]
        for which, label_id in (("predicted", pred_id), ("truth", truth_id)):
            if not 0 <= label_id < len(labels):
                raise UsageError(
                    f"{path}: {which} label {label_id} out of vocabulary range"
                )
        pairs.append((qid, labels[pred_id], labels[truth_id], int(record["unique_calls"])))

    report = evaluate_pairs(pairs, taxonomy=taxonomy, with_detail=args.detail)
    detail = None
    if args.detail:
        report, detail = report
    payload = report.to_dict()
    if detail is not None:
        payload["detail"] = detail
    text = json.dumps(payload, indent=2) + "\n"

    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "eval.json").write_text(text, encoding="utf-8")
    write_manifest(
        out_dir,
        "eval",
        _canonical_argv(args, ["predictions", "truths", "vocab", "taxonomy"]),
        inputs={"predictions": str(pred_dir)},
    )
    print(text, end="")
    return 0


# ---------------------------------------------------------------------------
# sweep


def cmd_sweep(args) -> int:
    bundle_dir = Path(args.space)
    if not bundle_dir.is_dir():
        raise UsageError(f"space bundle not found: {bundle_dir}")
    oracle_file = bundle_dir / ORACLE_FILE
    if not oracle_file.exists():
        raise UsageError(f"sweep needs a synthetic bundle with {oracle_file}")
    space = load_bundle(bundle_dir)
    queries = load_queries(bundle_dir / QUERIES_FILE, expect_dim=space.dim)
    truths = read_truths(bundle_dir / QUERIES_FILE, expected_rows=len(queries))
    params = json.loads(oracle_file.read_text(encoding="utf-8"))
    if not 0 <= args.qid < len(queries):
        raise UsageError(f"query id {args.qid} out of range")

    try:
        budgets = [int(b) for b in args.budgets.split(",") if b.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --budgets value: {args.budgets!r}") from exc
    if not budgets:
        raise UsageError("at least one budget is required")

    args.seed = args.seed if args.seed is not None else 0
    args.budget = max(budgets)  # per-cell budgets replace this
    config = make_config(args)

    instance = SyntheticInstance(
        space=space,
        queries=tuple(zip(queries, truths)),
        sharpness=float(params["sharpness"]),
        noise_sd=float(params.get("noise_sd", 0.0)),
        seed=int(params.get("seed", 0)),
    )

    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    on_result = None
    if not args.no_trajectories:
        traj_dir = out_dir / "trajectories"
        traj_dir.mkdir(exist_ok=True)

        def on_result(budget: int, seed: int, result) -> None:
            lines = [json.dumps(e.to_dict()) for e in result.trajectory]
            lines.append(json.dumps(result_summary(result)))
            _atomic_write(
                traj_dir / f"traj_b{budget}_s{seed}.jsonl", "\n".join(lines) + "\n"
            )

    try:
        rows = budget_sweep(
            instance, budgets, n_seeds=args.n_seeds, config=config, qid=args.qid,
            on_result=on_result,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_sweep_csv(rows, out_dir / "sweep.csv")
    summary = sweep_summary(rows)
    if not args.no_plot:
        from .plots import plot_sweep

        plot_sweep(summary, out_dir / "sweep.png", title=f"query {args.qid}")
    write_manifest(
        out_dir,
        "sweep",
        _canonical_argv(args, ["space", "config"]),
        inputs={"space": str(bundle_dir)},
        config=dataclasses.asdict(config),
        seed=args.seed,
    )
    for row in summary:
        print(
            f"budget {row['budget']:>7}: hit rate {row['hit_rate']:.2f}, "
            f"mean regret {row['mean_regret']:.4f}"
        )
    return 0


# ---------------------------------------------------------------------------
# replay-manifest


def cmd_replay_manifest(args) -> int:
    manifest = load_manifest(args.manifest)
    argv = replay_argv(manifest, args.output)
    print(f"replaying: labelscout {' '.join(argv)}", file=sys.stderr)
    return main(argv)


# ---------------------------------------------------------------------------
# parser


def _canonical_argv(args, path_attrs) -> list:
    """Rebuild the command argv with input paths absolutized."""
    argv = [args.command]
    for key, value in sorted(vars(args).items()):
        if key in ("command", "func") or value is None or value is False:
            continue
        flag = "--" + key.replace("_", "-")
        if value is True:
            argv.append(flag)
            continue
        if key in path_attrs:
            value = str(Path(value).resolve())
        argv.extend([flag, str(value)])
    return argv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelscout",
        description="Budget-constrained stochastic search over compositional label spaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-space", help="assemble a label-space bundle")
    p.add_argument("--vocab", required=True, help="action,object vocabulary file")
    p.add_argument("--embeddings", required=True, help="phrase embedding matrix (.prse)")
    p.add_argument("--actions", help="action concept embeddings (.prse with sidecar)")
    p.add_argument("--objects", help="object concept embeddings (.prse with sidecar)")
    p.add_argument("--affinity", help="pairwise affinity file for the prior")
    p.add_argument("--smoothing", type=float, default=1e-6)
    p.add_argument("--anchor-label", type=int, dest="anchor_label")
    add_common(p)
    p.set_defaults(func=cmd_build_space)

    p = sub.add_parser("synth", help="generate a synthetic verification instance")
    p.add_argument("--labels", type=int, required=True)
    p.add_argument("--actions", type=int, required=True)
    p.add_argument("--objects", type=int, required=True)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--queries", type=int, default=1)
    p.add_argument("--level", default="L1", choices=("L1", "L2", "L3"))
    p.add_argument("--sharpness", type=float, default=5.0)
    p.add_argument("--noise-sd", type=float, default=0.0, dest="noise_sd")
    p.add_argument("--embed-noise", type=float, default=0.05, dest="embed_noise")
    p.add_argument("--query-noise", type=float, default=0.02, dest="query_noise")
    p.add_argument("--emit-replay", action="store_true", dest="emit_replay")
    add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("search", help="run budget-constrained searches")
    p.add_argument("--space", required=True, help="label-space bundle directory")
    p.add_argument("--queries", help="query vectors (.prse); default <space>/queries.prse")
    p.add_argument(
        "--backend", default="synthetic", choices=("synthetic", "dot", "replay")
    )
    p.add_argument("--replay", help="replay score matrix (.prse)")
    p.add_argument("--qid", type=int, help="search only this query")
    p.add_argument("--top", type=int, default=10, help="ranking entries to keep")
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--plot", action="store_true", help="render trajectory figures")
    add_search_options(p)
    add_common(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--predictions", required=True, help="search output directory")
    p.add_argument("--truths", required=True, help="ground-truth label file")
    p.add_argument("--vocab", required=True, help="action,object vocabulary file")
    p.add_argument("--taxonomy", help="child,parent taxonomy for similarity scores")
    p.add_argument("--detail", action="store_true")
    add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="budget x seed grid on one query")
    p.add_argument("--space", required=True, help="synthetic bundle directory")
    p.add_argument("--budgets", required=True, help="comma-separated budgets")
    p.add_argument("--n-seeds", type=int, default=20, dest="n_seeds")
    p.add_argument("--qid", type=int, default=0)
    p.add_argument("--no-plot", action="store_true", dest="no_plot")
    p.add_argument("--no-trajectories", action="store_true", dest="no_trajectories")
    add_search_options(p)
    add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("replay-manifest", help="re-run a command from its manifest")
    p.add_argument("manifest", help="manifest.json or directory containing one")
    p.add_argument("--output", required=True, help="fresh output directory")
    p.set_defaults(func=cmd_replay_manifest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - unexpected
        import traceback

        traceback.print_exc()
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
