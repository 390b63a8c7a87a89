# persistence.py
# File-based persistence for run artifacts: JSON/CSV writers with content
# hashes, the run manifest, and the single-instance lock on an output directory.

import csv
import io
import logging
import os
import time
from pathlib import Path
from threading import Lock

import numpy as np

from src.config import LOCK_FILE_NAME, MANIFEST_FILE_NAME, TOOLKIT_VERSION
from src.errors import ConfigError
from src.utils import sha256_file, sha256_text, stable_json_dumps


class ArtifactStore:
    """
    Writes every artifact of one run under `output_dir` and remembers its
    sha256, so the manifest lists each file with its content hash.

    Use as a context manager: entering takes the directory lock (a `.lock`
    file created exclusively), leaving releases it.
    """

    def __init__(self, output_dir):
        self.output_dir = Path(output_dir)
        self.lock = Lock()
        self.artifacts: dict[str, dict] = {}
        self.timings: dict[str, float] = {}
        self.metrics: dict = {}
        self._lock_path = self.output_dir / LOCK_FILE_NAME
        self._locked = False

    def __enter__(self):
        self.output_dir.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError as e:
            raise ConfigError(
                "output_dir", f"{self.output_dir} is locked by another run (remove {self._lock_path} if stale)"
            ) from e
        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))
        self._locked = True
        return self

    def __exit__(self, exc_type, exc, tb):
        if self._locked:
            self._lock_path.unlink(missing_ok=True)
            self._locked = False
        return False

    def path(self, name: str) -> Path:
        return self.output_dir / name

    def _register(self, name: str, kind: str, digest: str) -> Path:
        with self.lock:
            self.artifacts[name] = {"path": name, "kind": kind, "sha256": digest}
        logging.info(f"Wrote {kind} artifact {self.path(name)}")
        return self.path(name)

    def write_text(self, name: str, text: str, kind: str = "text") -> Path:
        target = self.path(name)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        return self._register(name, kind, sha256_text(text))

    def write_json(self, name: str, data, kind: str = "json") -> Path:
        return self.write_text(name, stable_json_dumps(data) + "\n", kind)

    def write_csv(self, name: str, header, rows, kind: str = "csv") -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
        return self.write_text(name, buffer.getvalue(), kind)

    def adopt(self, name: str, kind: str) -> Path:
        """Register a file some other writer produced inside the output directory."""
        return self._register(name, kind, sha256_file(self.path(name)))

    def timed(self, stage: str):
        return _StageTimer(self, stage)

    def write_manifest(self, run_config: dict, summary: dict | None = None) -> Path:
        config_text = stable_json_dumps(run_config)
        manifest = {
            "toolkit_version": TOOLKIT_VERSION,
            "config_hash": sha256_text(config_text),
            "config": run_config,
            "artifacts": [self.artifacts[name] for name in sorted(self.artifacts)],
            "timings_s": dict(self.timings),
            "summary": summary if summary is not None else self.metrics,
        }
        target = self.path(MANIFEST_FILE_NAME)
        with open(target, "w", encoding="utf-8") as f:
            f.write(stable_json_dumps(manifest) + "\n")
        logging.info(f"Manifest with {len(self.artifacts)} artifacts saved to {target}")
        return target


class _StageTimer:
    def __init__(self, store: ArtifactStore, stage: str):
        self.store = store
        self.stage = stage

    def __enter__(self):
        logging.info(f"----- Running {self.stage} -----")
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        with self.store.lock:
            self.store.timings[self.stage] = round(elapsed, 3)
        logging.info(f"----- Finished {self.stage} in {elapsed:.2f} s -----")
        return False


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value
