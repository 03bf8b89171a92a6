import numpy as np
import pytest

from network.graph import CHANNELS
from tools.edf_reader import Channel, Recording


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow experiment checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def sinusoid(frequency, duration, sample_rate, amplitude=1.0, phase=0.0):
    t = np.arange(int(round(duration * sample_rate))) / sample_rate
    return amplitude * np.sin(2 * np.pi * frequency * t + phase)


def make_recording(rng, subject_id="s01", class_label="control", duration=20.0, sample_rate=250.0,
                   labels=CHANNELS):
    n = int(round(duration * sample_rate))
    channels = tuple(Channel(label, sample_rate, rng.standard_normal(n)) for label in labels)
    return Recording(subject_id=subject_id, class_label=class_label, channels=channels)


@pytest.fixture
def recording_250(rng):
    """Five graph channels of white noise, 20 s at 250 Hz"""
    return make_recording(rng)
