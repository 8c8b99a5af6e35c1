import numpy as np
import pytest

from pointdet.data import GeneratorConfig, generate_scene
from pointdet.model import ModelConfig, PointPromptedDetector


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def micro_model():
    """Smallest usable detector; shared across read-only tests."""
    cfg = ModelConfig(channels=8, hidden=16, heads=2, decoder_layers=1,
                      ffn_mult=1, seed=7)
    return PointPromptedDetector(cfg)


@pytest.fixture(scope="session")
def small_scene():
    return generate_scene(
        GeneratorConfig(n_categories=2, count_range=(6, 10), size_range=(4, 12),
                        image_size=(64, 64)), seed=11)
