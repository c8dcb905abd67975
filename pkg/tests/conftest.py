import pytest

from frontlab.wave import compute_wave


@pytest.fixture(scope="session")
def wave():
    return compute_wave(40.0, 0.005)
