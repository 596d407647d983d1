import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from facecraft import GeneratorConfig, GeneratorWeights

# Numerical tests run torch graphs; wall-clock deadlines only cause flakes.
settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

TINY = GeneratorConfig(latent_dim=16, mapping_depth=2, channels=8)


@pytest.fixture(scope="session")
def tiny_config() -> GeneratorConfig:
    return TINY


@pytest.fixture(scope="session")
def tiny_weights() -> GeneratorWeights:
    return GeneratorWeights.initialize(TINY, seed=0)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def random_face_array(rng: np.random.Generator) -> np.ndarray:
    return rng.random((8, 8, 3))


def random_skin_array(rng: np.random.Generator, variant: str = "modern") -> np.ndarray:
    height = 64 if variant == "modern" else 32
    return rng.integers(0, 256, size=(height, 64, 4), dtype=np.uint8)
