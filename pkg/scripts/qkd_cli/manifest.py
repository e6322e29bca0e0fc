"""
Run manifests: everything needed to reproduce a CLI run.

A manifest holds the resolved configuration (canonical units), the seed, the
subcommand with its arguments and the tool version. It carries no wall-clock
data, so the same inputs always produce the same bytes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from scripts.qkd import __version__

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record of one run.

    Attributes:
        command: Subcommand name.
        config_path: Configuration file given on the command line, if any.
        config: Resolved configuration as produced by config_to_mapping.
        seed: Master seed actually used.
        output_dir: Directory the outputs were written to.
        arguments: Remaining subcommand arguments.
        outputs: Files written next to the manifest.
        tool_version: Version of the simulator.
    """

    command: str
    config_path: str | None
    config: dict[str, Any]
    seed: int
    output_dir: str
    arguments: dict[str, Any] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    tool_version: str = __version__


def dump_json(data: Any, path: str | Path) -> None:
    """Write JSON deterministically (sorted keys, fixed indentation, trailing newline)."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def write_manifest(out_dir: str | Path, manifest: RunManifest) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    dump_json(asdict(manifest), path)
    return path


def read_manifest(path: str | Path) -> RunManifest:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    return RunManifest(**data)
