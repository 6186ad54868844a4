import functools

import pytest
from hypothesis import settings

from etchprobe import pipeline
from etchprobe.config import RunConfig

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def default_cfg():
    return RunConfig()


@pytest.fixture(scope="session")
def simulated(default_cfg):
    """Cached default-device simulations keyed by (etch fraction, drive)."""

    @functools.lru_cache(maxsize=None)
    def run(f: float, drive: str = "upper"):
        return pipeline.simulate(default_cfg, f, drive=drive)

    return run
