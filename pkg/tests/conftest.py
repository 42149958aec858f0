import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from uavstab.synth_eval import textured_image

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def texture():
    """A 200x200 multi-scale texture shared by tracking tests."""
    return textured_image(200, 200, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)



ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
