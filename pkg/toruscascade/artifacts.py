"""
Artifact store.

Owns the output directory of a run and reads/writes its JSON and CSV files.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict

import pandas as pd

from toruscascade.errors import ArtifactError

FLOAT_FORMAT = "%.17g"

# Which subcommand writes each file
PRODUCERS = {
    "family.json": "family",
    "certification.json": "family",
    "schedule.json": "schedule",
    "potential_norms.csv": "schedule",
    "chain_exact.csv": "simulate",
    "rfs.csv": "simulate",
    "fs.csv": "simulate",
    "fs_deviation.csv": "simulate",
    "simulate_meta.json": "simulate",
    "report.json": "report",
    "report.txt": "report",
    "bounds.csv": "report",
}


class ArtifactStore:
    """Reads and writes the files of one run directory."""

    def __init__(self, out_dir: str, verbose: bool = True):
        """
        Initialize artifact store.

        Args:
            out_dir: Output directory, created if needed and kept afterwards
            verbose: Whether to print file paths as they are written

        Raises:
            ArtifactError: If out_dir is empty
        """
        if not out_dir:
            raise ArtifactError("An output directory is required (--out or the out setting)")
        self.verbose = verbose
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written = []

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def _record(self, path: Path):
        self.written.append(path)
        if self.verbose:
            print(f"  wrote {path}")

    def write_text(self, name: str, text: str) -> Path:
        path = self.path(name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        self._record(path)
        return path

    def write_json(self, name: str, data: Any) -> Path:
        """Stable key order so reruns are byte-identical."""
        return self.write_text(name, json.dumps(data, indent=2, sort_keys=True) + "\n")

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.path(name)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        self._record(path)
        return path

    def _require(self, name: str) -> Path:
        path = self.path(name)
        if not path.exists():
            producer = PRODUCERS.get(name, "simulate" if name.startswith("pert_N") else "family")
            raise ArtifactError(
                f"Missing artifact {path}; run `toruscascade {producer} --out {self.out_dir}` first"
            )
        return path

    def read_text(self, name: str) -> str:
        path = self._require(name)
        try:
            with open(path, "r", encoding="utf-8") as f:
                return f.read()
        except OSError as e:
            raise ArtifactError(f"Failed to read artifact {path}: {str(e)}")

    def read_json(self, name: str) -> Dict[str, Any]:
        text = self.read_text(name)
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ArtifactError(f"Artifact {self.path(name)} is not valid JSON: {str(e)}")

    def read_csv(self, name: str) -> pd.DataFrame:
        return pd.read_csv(self._require(name), float_precision="round_trip")

    def checksum(self, name: str) -> str:
        """sha256 of an artifact."""
        digest = hashlib.sha256()
        with open(self._require(name), "rb") as f:
            for block in iter(lambda: f.read(65536), b""):
                digest.update(block)
        return digest.hexdigest()
