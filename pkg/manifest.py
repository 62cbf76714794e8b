"""
RunManifest: the record that travels with every CLI output.

A manifest holds the subcommand, the fully resolved inputs (paths, ε, method,
seed, tolerances) and the tool version; replaying those inputs reproduces the
output byte for byte. It carries no timestamps.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, TextIO

import settings
import store

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"


@dataclass(frozen=True)
class RunManifest:
    subcommand: str
    inputs: Dict[str, Any] = field(default_factory=dict)
    tool: str = settings.TOOL_NAME
    version: str = settings.TOOL_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return {
            "subcommand": self.subcommand,
            "inputs": dict(self.inputs),
            "tool": self.tool,
            "version": self.version,
        }

    def write_next_to(self, output_path: str) -> str:
        """Persist as `<output_path>.manifest.json`; returns the manifest path."""
        path = f"{output_path}{MANIFEST_SUFFIX}"
        store.write_json_atomic(path, self.to_dict())
        logger.info("manifest for %s written to %s", self.subcommand, path)
        return path

    def emit(self, stream: TextIO) -> None:
        """Single-line JSON form, used when the output itself went to stdout."""
        stream.write(json.dumps(self.to_dict(), sort_keys=True) + "\n")
