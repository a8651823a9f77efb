"""Writers and readers for the file formats shared with labelscout.

This package talks to labelscout only through files, so the format code here
is an independent implementation of the same contracts: the PRSE binary
embedding container, `.idx` row-index sidecars, the `action,object`
vocabulary text format, and the `action,object,score[,relation:weight;...]`
affinity text format.
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
    if not np.all(np.isfinite(arr)):
        raise FormatError("matrix contains non-finite values")
    rows, dim = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(PRSE_MAGIC, PRSE_VERSION, rows, dim))
        fh.write(arr.astype("<f4").tobytes(order="C"))


def write_sidecar(prse_path, tokens) -> None:
    """Write the row->token index file that accompanies a PRSE file."""
    Path(str(prse_path) + ".idx").write_text(
        "".join(f"{t}\n" for t in tokens), encoding="utf-8"
    )


def canon_token(token: str) -> str:
    """Canonical token form: lowercase, trimmed, internal whitespace collapsed."""
    return " ".join(token.strip().lower().split())


def read_vocabulary(path) -> list[tuple[str, str]]:
    """Read an ``action,object`` vocabulary file into canonical pairs."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"vocabulary file not found: {path}")
    pairs: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise FormatError(
                    f"{path}:{lineno}: expected 'action,object', got {line!r}"
                )
            pair = (canon_token(parts[0]), canon_token(parts[1]))
            if not pair[0] or not pair[1]:
                raise FormatError(f"{path}:{lineno}: empty action or object token")
            if pair in seen:
                raise FormatError(f"{path}:{lineno}: duplicate label {pair}")
            seen.add(pair)
            pairs.append(pair)
    if not pairs:
        raise FormatError(f"{path}: no labels found")
    return pairs


def write_affinity(path, rows) -> None:
    """Write affinity rows as ``action,object,score[,relation:1.0;...]`` lines.

    ``rows`` holds (action, object, score, relations) tuples. Relations are
    annotated with the neutral weight 1.0: they record which edges connect
    the pair without overriding the consumer's global relation adjustments.
    """
    lines = []
    for action, obj, score, relations in rows:
        line = f"{action},{obj},{float(score)!r}"
        if relations:
            line += "," + ";".join(f"{rel}:1.0" for rel in sorted(relations))
        lines.append(line + "\n")
    Path(path).write_text("".join(lines), encoding="utf-8")
