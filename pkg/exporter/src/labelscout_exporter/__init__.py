"""Adapters that populate labelscout's input file formats."""

from .encoders import EncoderError, StubEncoder, load_encoder
from .export import (
    ExportJob,
    SOURCE_KINDS,
    export_affinity,
    export_text_embeddings,
    read_edge_dump,
)
from .formats import (
    FormatError,
    canon_token,
    read_vocabulary,
    write_affinity,
    write_prse,
    write_sidecar,
)

__version__ = "0.1.0"

__all__ = [
    "EncoderError",
    "ExportJob",
    "FormatError",
    "SOURCE_KINDS",
    "StubEncoder",
    "canon_token",
    "export_affinity",
    "export_text_embeddings",
    "load_encoder",
    "read_edge_dump",
    "read_vocabulary",
    "write_affinity",
    "write_prse",
    "write_sidecar",
]
