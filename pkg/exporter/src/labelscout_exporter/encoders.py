"""Text encoder backends.

Real deployments plug a vision-language text encoder into ``ENCODERS``. The
bundled ``stub`` backend exists so that export pipelines, file formats, and
round-trips can be exercised without model weights: it derives each vector
from a stable hash of the input text, so exports are reproducible across
processes and machines.
"""
from __future__ import annotations

import hashlib

import numpy as np


class EncoderError(RuntimeError):
    """Raised when an encoder backend cannot be loaded."""


class StubEncoder:
    """Deterministic stand-in encoder: hash-seeded unit vectors."""

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise EncoderError(f"encoder dim must be >= 1, got {dim}")
        self.dim = dim

    def encode(self, texts) -> np.ndarray:
        out = np.empty((len(texts), self.dim))
        for k, text in enumerate(texts):
            digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
            rng = np.random.Generator(
                np.random.PCG64(int.from_bytes(digest, "little"))
            )
            row = rng.standard_normal(self.dim)
            out[k] = row / np.linalg.norm(row)
        return out


def load_encoder(model: str):
    """Resolve a model identifier, e.g. ``stub`` or ``stub:32``.

    Identifiers name a backend, optionally followed by ``:<dim>``. Unknown
    backends raise EncoderError; the CLI turns that into a nonzero exit.
    """
    name, _, dim_s = model.partition(":")
    if name != "stub":
        raise EncoderError(
            f"encoder backend {name!r} is not available; only 'stub' is bundled"
        )
    if dim_s:
        try:
            dim = int(dim_s)
        except ValueError as exc:
            raise EncoderError(f"bad encoder dim {dim_s!r}") from exc
        return StubEncoder(dim)
    return StubEncoder()
