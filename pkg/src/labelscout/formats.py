"""File formats shared by the toolkit.

Binary embedding files ("PRSE" container), plain-text vocabulary, affinity
and taxonomy files, and the sidecar index files that accompany embedding
matrices. All text files are UTF-8; the binary container is little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

PRSE_MAGIC = b"PRSE"
PRSE_VERSION = 1

_HEADER = struct.Struct("<4sIII")  # magic, version, rows, dim


class FormatError(ValueError):
    """Raised when an input file violates its format contract."""


def write_prse(path, matrix) -> None:
    """Write a 2-D float matrix as a PRSE file (float32, row-major)."""
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2:
        raise FormatError(f"expected a 2-D matrix, got shape {arr.shape}")
    rows, dim = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(PRSE_MAGIC, PRSE_VERSION, rows, dim))
        fh.write(arr.astype("<f4").tobytes(order="C"))


def read_prse(path) -> np.ndarray:
    """Read a PRSE file into a float64 matrix of shape (rows, dim)."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, rows, dim = _HEADER.unpack_from(data)
    if magic != PRSE_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {PRSE_MAGIC!r}")
    if version != PRSE_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + rows * dim * 4
    if len(data) != expected:
        raise FormatError(
            f"{path}: payload size mismatch, expected {expected} bytes, got {len(data)}"
        )
    flat = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    mat = flat.reshape(rows, dim).astype(np.float64)
    if not np.all(np.isfinite(mat)):
        raise FormatError(f"{path}: non-finite values in embedding matrix")
    return mat


def sidecar_path(prse_path) -> Path:
    """Path of the row->token index file that accompanies a PRSE file."""
    return Path(str(prse_path) + ".idx")


def write_sidecar(prse_path, tokens) -> None:
    sidecar_path(prse_path).write_text(
        "".join(f"{t}\n" for t in tokens), encoding="utf-8"
    )


def read_sidecar(prse_path, expected_rows=None) -> list[str]:
    path = sidecar_path(prse_path)
    if not path.exists():
        raise FormatError(f"missing sidecar index file {path}")
    tokens = path.read_text(encoding="utf-8").splitlines()
    if expected_rows is not None and len(tokens) != expected_rows:
        raise FormatError(
            f"{path}: {len(tokens)} index entries for {expected_rows} matrix rows"
        )
    return tokens


def truth_path(prse_path) -> Path:
    """Path of the row->ground-truth-label-id sidecar of a query/replay file."""
    return Path(str(prse_path) + ".truth")


def write_truths(prse_path, label_ids) -> None:
    truth_path(prse_path).write_text(
        "".join(f"{int(i)}\n" for i in label_ids), encoding="utf-8"
    )


def read_truths(prse_path, expected_rows=None) -> list[int]:
    """Read a ground-truth sidecar; accepts the PRSE path or the .truth
    path itself."""
    path = Path(prse_path)
    if path.suffix != ".truth":
        path = truth_path(path)
    if not path.exists():
        raise FormatError(f"missing ground-truth sidecar {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    try:
        ids = [int(ln) for ln in lines if ln.strip()]
    except ValueError as exc:
        raise FormatError(f"{path}: non-integer ground-truth entry") from exc
    if expected_rows is not None and len(ids) != expected_rows:
        raise FormatError(
            f"{path}: {len(ids)} truth entries for {expected_rows} query rows"
        )
    return ids


def canon_token(token: str) -> str:
    """Canonical token form: lowercase, trimmed, internal whitespace collapsed."""
    return " ".join(token.strip().lower().split())


def _content_lines(path):
    """Yield (line_number, text) for non-empty, non-comment lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def parse_vocabulary(path) -> list[tuple[str, str]]:
    """Parse a vocabulary file into canonicalized (action, object) pairs.

    One label per line as ``action,object``; ``#`` lines are ignored.
    Duplicate pairs and malformed lines raise FormatError with the line number.
    """
    pairs: list[tuple[str, str]] = []
    seen: dict[tuple[str, str], int] = {}
    for lineno, line in _content_lines(path):
        parts = line.split(",")
        if len(parts) != 2:
            raise FormatError(
                f"{path}:{lineno}: expected 'action,object', got {line!r}"
            )
        action, obj = canon_token(parts[0]), canon_token(parts[1])
        if not action or not obj:
            raise FormatError(f"{path}:{lineno}: empty action or object token")
        pair = (action, obj)
        if pair in seen:
            raise FormatError(
                f"{path}:{lineno}: duplicate pair {action!r},{obj!r}"
                f" (first seen on line {seen[pair]})"
            )
        seen[pair] = lineno
        pairs.append(pair)
    if not pairs:
        raise FormatError(f"{path}: empty vocabulary")
    return pairs


def parse_affinity(path):
    """Parse an affinity file.

    Lines are ``action,object,score[,relation:weight;relation:weight...]``.
    Returns (entries, pair_relations, relation_adjustments) where entries maps
    the pair to its raw score, pair_relations maps the pair to the relation
    names listed on its line, and relation_adjustments maps relation names to
    their multiplicative weight. A relation declared with two different
    weights is a format error.
    """
    entries: dict[tuple[str, str], float] = {}
    pair_relations: dict[tuple[str, str], tuple[str, ...]] = {}
    adjustments: dict[str, float] = {}
    for lineno, line in _content_lines(path):
        parts = line.split(",")
        if len(parts) not in (3, 4):
            raise FormatError(
                f"{path}:{lineno}: expected 3 or 4 comma-separated fields"
            )
        action, obj = canon_token(parts[0]), canon_token(parts[1])
        if not action or not obj:
            raise FormatError(f"{path}:{lineno}: empty action or object token")
        try:
            score = float(parts[2])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: bad score {parts[2]!r}") from exc
        if not np.isfinite(score):
            raise FormatError(f"{path}:{lineno}: non-finite score")
        pair = (action, obj)
        if pair in entries:
            raise FormatError(f"{path}:{lineno}: duplicate affinity pair {pair}")
        relations: list[str] = []
        if len(parts) == 4:
            for token in parts[3].split(";"):
                token = token.strip()
                if not token:
                    continue
                if ":" not in token:
                    raise FormatError(
                        f"{path}:{lineno}: bad relation token {token!r},"
                        " expected 'name:weight'"
                    )
                name, _, weight_s = token.partition(":")
                name = canon_token(name)
                try:
                    weight = float(weight_s)
                except ValueError as exc:
                    raise FormatError(
                        f"{path}:{lineno}: bad relation weight {weight_s!r}"
                    ) from exc
                if not np.isfinite(weight) or weight <= 0:
                    raise FormatError(
                        f"{path}:{lineno}: relation weight must be > 0"
                    )
                if name in adjustments and adjustments[name] != weight:
                    raise FormatError(
                        f"{path}:{lineno}: relation {name!r} redeclared with"
                        f" weight {weight} (was {adjustments[name]})"
                    )
                adjustments[name] = weight
                relations.append(name)
        entries[pair] = score
        pair_relations[pair] = tuple(relations)
    return entries, pair_relations, adjustments


def parse_taxonomy(path):
    """Parse a taxonomy edge list.

    Lines are ``child,parent``; the root is declared by ``!root,<node>``.
    Returns (parents, root) where parents maps each node to a set of parents.
    """
    parents: dict[str, set[str]] = {}
    root = None
    for lineno, line in _content_lines(path):
        parts = line.split(",")
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'child,parent'")
        left, right = parts[0].strip(), canon_token(parts[1])
        if left == "!root":
            if root is not None:
                raise FormatError(f"{path}:{lineno}: root declared twice")
            root = right
            parents.setdefault(root, set())
            continue
        child = canon_token(left)
        if not child or not right:
            raise FormatError(f"{path}:{lineno}: empty node name")
        parents.setdefault(child, set()).add(right)
        parents.setdefault(right, set())
    if root is None:
        raise FormatError(f"{path}: no '!root,<node>' declaration")
    return parents, root
