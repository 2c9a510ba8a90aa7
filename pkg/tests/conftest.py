import numpy as np
import pytest

from fscvpipe.dataset import synthesize_dataset
from fscvpipe.imaging.raster import ImageMatrix


def rand_image(rng: np.random.Generator, h: int, w: int, channels: int = 3) -> ImageMatrix:
    return ImageMatrix(rng.random((h, w, channels) if channels == 3 else (h, w, 1)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """Small synthetic tree shared by pipeline/CLI tests: 3 experiments,
    2+2 recordings each, all three backgrounds, fifth-scale geometry."""
    root = tmp_path_factory.mktemp("tinyset")
    summary = synthesize_dataset(root, experiments=3, per_exp=2, seed=11, scale=0.2)
    return root, summary
