"""Run manifests: enough provenance to re-run any command bit-identically.

Every CLI command writes a ``manifest.json`` next to its outputs holding
the tool version, a timestamp, and the canonical argument vector with
input paths made absolute. ``replay-manifest`` re-dispatches that argv
(with a fresh output directory) to reproduce the run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

MANIFEST_FILE = "manifest.json"


@dataclass
class RunManifest:
    command: str
    argv: list
    inputs: dict = field(default_factory=dict)
    config: dict | None = None
    seed: int | None = None
    warnings: int = 0
    version: str = ""
    created: str = ""

    def to_dict(self) -> dict:
        return {
            "tool": "labelscout",
            "version": self.version,
            "created": self.created,
            "command": self.command,
            "argv": self.argv,
            "inputs": self.inputs,
            "config": self.config,
            "seed": self.seed,
            "warnings": self.warnings,
        }


def write_manifest(out_dir, command, argv, inputs=None, config=None,
                   seed=None, warnings=0) -> Path:
    from . import __version__

    manifest = RunManifest(
        command=command,
        argv=[str(a) for a in argv],
        inputs={k: str(Path(v).resolve()) for k, v in (inputs or {}).items()},
        config=config,
        seed=seed,
        warnings=warnings,
        version=__version__,
        created=datetime.now(timezone.utc).isoformat(),
    )
    path = Path(out_dir) / MANIFEST_FILE
    path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def load_manifest(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILE
    data = json.loads(path.read_text(encoding="utf-8"))
    if "argv" not in data or "command" not in data:
        raise ValueError(f"{path}: not a run manifest")
    return data


def replay_argv(manifest: dict, output_dir) -> list:
    """The manifest's argv with its --output value replaced."""
    argv = [str(a) for a in manifest["argv"]]
    if "--output" in argv:
        k = argv.index("--output")
        argv[k + 1] = str(output_dir)
    else:
        argv += ["--output", str(output_dir)]
    return argv
