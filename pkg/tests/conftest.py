import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from opsin_evo.scenes import SceneConfig, SpectrumTemplate, synth_scene
from opsin_evo.spectral import SpectralGrid

settings.register_profile(
    "default", deadline=None, max_examples=40, derandomize=True, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def grid():
    return SpectralGrid.regular()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def two_class_cube(grid):
    classes = [
        SpectrumTemplate("a", ((500, 30, 2.0),), baseline=0.5),
        SpectrumTemplate("b", ((600, 30, 2.0),), baseline=0.5),
    ]
    return synth_scene(SceneConfig(8, 8, grid, classes, layout="stripes", seed=0))
