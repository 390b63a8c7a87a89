import json

import numpy as np
import pytest

from src.core.fock import DensityMatrix, FockDim
from src.services.persistence import ArtifactStore


@pytest.fixture
def store(tmp_path):
    with ArtifactStore(tmp_path / "run") as artifact_store:
        yield artifact_store


@pytest.fixture
def write_config(tmp_path):
    def write(data, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return write


def random_density_matrix(n_max: int, seed: int = 0) -> DensityMatrix:
    """Full-rank mixed state from a Ginibre matrix."""
    rng = np.random.default_rng(seed)
    size = n_max + 1
    g = rng.normal(size=(size, size)) + 1j * rng.normal(size=(size, size))
    return DensityMatrix.from_matrix(FockDim(n_max), g @ g.conj().T)
