import time

import pytest

from etcsim.engine import simulate
from etcsim.presets import build_preset


class PresetRunner:
    """Session cache of simulated presets with wall-clock accounting."""

    def __init__(self):
        self.cache = {}
        self.elapsed = {}

    def __call__(self, name):
        if name not in self.cache:
            t0 = time.perf_counter()
            self.cache[name] = [(sub, sc, simulate(sc)) for sub, sc in build_preset(name)]
            self.elapsed[name] = time.perf_counter() - t0
        return self.cache[name]


@pytest.fixture(scope="session")
def preset_runs():
    return PresetRunner()
