"""Export jobs: populate labelscout input files from upstream sources."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .encoders import load_encoder
from .formats import (
    FormatError,
    canon_token,
    read_vocabulary,
    write_affinity,
    write_prse,
    write_sidecar,
)

SOURCE_KINDS = ("text-embedding", "video-embedding", "affinity")

PHRASES_FILE = "phrases.prse"
ACTIONS_FILE = "actions.prse"
OBJECTS_FILE = "objects.prse"


@dataclass(frozen=True)
class ExportJob:
    """One export task.

    ``model`` names the encoder backend for embedding jobs; for affinity
    jobs it is the path of the offline edge dump (there is no model).
    """

    kind: str
    model: str
    vocabulary: Path
    output: Path

    def validate(self) -> None:
        if self.kind not in SOURCE_KINDS:
            raise ValueError(
                f"unknown source kind {self.kind!r}, expected one of {SOURCE_KINDS}"
            )
        if not Path(self.vocabulary).exists():
            raise FileNotFoundError(
                f"vocabulary file not found: {self.vocabulary}"
            )


def _unique_in_order(tokens) -> list[str]:
    return list(dict.fromkeys(tokens))


def export_text_embeddings(job: ExportJob) -> dict[str, Path]:
    """Encode the vocabulary into phrase, action, and object PRSE files.

    All three matrices are L2-normalized with row order following the
    vocabulary; action/object files get ``.idx`` sidecars mapping rows back
    to tokens. Returns the written file paths by role.
    """
    job.validate()
    if job.kind != "text-embedding":
        raise ValueError(f"expected a text-embedding job, got {job.kind!r}")
    pairs = read_vocabulary(job.vocabulary)
    encoder = load_encoder(job.model)

    out_dir = Path(job.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    actions = _unique_in_order(a for a, _ in pairs)
    objects = _unique_in_order(o for _, o in pairs)

    paths = {
        "phrases": out_dir / PHRASES_FILE,
        "actions": out_dir / ACTIONS_FILE,
        "objects": out_dir / OBJECTS_FILE,
    }
    write_prse(paths["phrases"], encoder.encode([f"{a} {o}" for a, o in pairs]))
    write_prse(paths["actions"], encoder.encode(actions))
    write_sidecar(paths["actions"], actions)
    write_prse(paths["objects"], encoder.encode(objects))
    write_sidecar(paths["objects"], objects)
    return paths


def _concept_from_uri(uri: str):
    """English concept text from a ConceptNet URI, None for other languages."""
    parts = uri.split("/")
    # /c/<lang>/<term>[/...] with underscores for spaces
    if len(parts) < 4 or parts[1] != "c":
        return None
    if parts[2] != "en":
        return None
    return canon_token(parts[3].replace("_", " "))


def read_edge_dump(path) -> list[tuple[str, str, str, float]]:
    """Read a ConceptNet-style assertion dump into (start, end, relation, weight).

    Tab-separated lines: assertion URI, relation URI, start URI, end URI,
    JSON metadata carrying the edge weight (default 1.0). Edges whose
    endpoints are not both English concepts are skipped.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"edge dump not found: {path}")
    edges = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise FormatError(
                    f"{path}:{lineno}: expected 5 tab-separated fields,"
                    f" got {len(parts)}"
                )
            _, rel_uri, start_uri, end_uri, meta_s = parts
            rel_parts = rel_uri.split("/")
            if len(rel_parts) < 3 or rel_parts[1] != "r" or not rel_parts[2]:
                raise FormatError(f"{path}:{lineno}: bad relation URI {rel_uri!r}")
            relation = canon_token(rel_parts[2])
            start = _concept_from_uri(start_uri)
            end = _concept_from_uri(end_uri)
            if start is None or end is None:
                continue
            try:
                meta = json.loads(meta_s)
                weight = float(meta.get("weight", 1.0))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise FormatError(
                    f"{path}:{lineno}: bad metadata field {meta_s!r}"
                ) from exc
            if not weight > 0:
                raise FormatError(f"{path}:{lineno}: edge weight must be > 0")
            edges.append((start, end, relation, weight))
    return edges


def export_affinity(job: ExportJob) -> Path:
    """Write affinity lines for every vocabulary pair with a connecting edge.

    A pair's score sums the weights of all dump edges joining its action and
    object tokens in either orientation; the connecting relations are listed
    as neutral-weight annotations. Pairs with no edges are omitted. Output
    order follows the vocabulary.
    """
    job.validate()
    if job.kind != "affinity":
        raise ValueError(f"expected an affinity job, got {job.kind!r}")
    pairs = read_vocabulary(job.vocabulary)
    edges = read_edge_dump(job.model)

    by_pair: dict[tuple[str, str], list[tuple[str, float]]] = {}
    for start, end, relation, weight in edges:
        by_pair.setdefault((start, end), []).append((relation, weight))

    rows = []
    for action, obj in pairs:
        hits = by_pair.get((action, obj), []) + by_pair.get((obj, action), [])
        if not hits:
            continue
        score = sum(weight for _, weight in hits)
        relations = sorted({relation for relation, _ in hits})
        rows.append((action, obj, score, relations))

    out_path = Path(job.output)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_affinity(out_path, rows)
    return out_path
