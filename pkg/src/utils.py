# utils.py
# Utility functions for logging, seeded random streams and stable serialization.

import hashlib
import json
import logging
import zlib
from pathlib import Path

import numpy as np


def setup_logging(log_file=None, level=logging.INFO):
    """
    Configures logging to both console and a file in a robust way.
    """
    # Get the root logger
    logger = logging.getLogger()
    logger.setLevel(logging.DEBUG)

    # Clear any existing handlers to avoid duplicate logs
    if logger.hasHandlers():
        logger.handlers.clear()

    formatter = logging.Formatter("%(asctime)s - %(levelname)s - %(message)s")

    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, mode="w")
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)


def close_log_file() -> None:
    """Detach and close the file handlers so the finished log can be hashed."""
    logger = logging.getLogger()
    for handler in [h for h in logger.handlers if isinstance(h, logging.FileHandler)]:
        logger.removeHandler(handler)
        handler.close()


def _stream_key(name) -> int:
    if isinstance(name, (int, np.integer)):
        return int(name)
    return zlib.crc32(str(name).encode("utf-8"))


def substream(seed: int, *names) -> np.random.Generator:
    """
    Named, counter-based random stream derived from the run seed.

    The same (seed, names) always yields the same Philox generator, whatever
    thread asks for it and in whatever order.
    """
    if seed is None:
        raise ValueError("a seed is required; there is no wall-clock default")
    spawn_key = tuple(_stream_key(n) for n in names)
    sequence = np.random.SeedSequence(int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(sequence))


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def stable_json_dumps(data) -> str:
    """JSON with repr floats (17 significant digits) and sorted keys."""
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=True, default=_json_default)


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def wrap_phase(phase):
    """Reduce angles to (-pi, pi]."""
    wrapped = np.angle(np.exp(1j * np.asarray(phase, dtype=float)))
    wrapped = np.where(np.isclose(wrapped, -np.pi, atol=1e-15), np.pi, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped
