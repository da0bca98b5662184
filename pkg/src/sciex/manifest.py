"""Run manifests: config snapshot plus content hashes of inputs and outputs.

Every CLI command writes one manifest next to its primary output so a stage
can be audited and re-run; output files themselves never contain timestamps,
which keeps re-runs byte-identical.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from pathlib import Path


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


class RunManifest:
    def __init__(self, command: str, config: dict):
        from . import __version__

        self.data = {
            "command": command,
            "tool_version": __version__,
            "config": config,
            "inputs": {},
            "outputs": {},
            "stats": {},
            "started": utcnow(),
            "finished": None,
        }

    def add_input(self, path: str | Path) -> None:
        self.data["inputs"][str(path)] = sha256_file(path)

    def add_output(self, path: str | Path) -> None:
        self.data["outputs"][str(path)] = sha256_file(path)

    def add_stats(self, **stats) -> None:
        self.data["stats"].update(stats)

    def write(self, path: str | Path) -> Path:
        self.data["finished"] = utcnow()
        path = Path(path)
        path.write_text(
            json.dumps(self.data, indent=2, ensure_ascii=False) + "\n", "utf-8"
        )
        return path

    def write_for(self, output_path: str | Path) -> Path:
        output_path = Path(output_path)
        return self.write(output_path.with_name(output_path.name + ".manifest.json"))
