import os

import numpy as np
import pytest

os.environ.setdefault('AWVA_ENV', 'testing')

from awva.models import CircuitParams, PointerParams, TrialConfig  # noqa: E402
from awva.utils.settings import invalidate_cache  # noqa: E402
from awva.weak_measurement import render_channels  # noqa: E402

SAMPLE_RATE = 1e6


@pytest.fixture
def pointer():
    """Measured 200 Hz pointer"""
    return PointerParams.reference(200.0)


@pytest.fixture
def bare_pointer():
    """Same pulse without the baseline offset"""
    return PointerParams(amplitude=0.248, width=3.88e-4, center=1.71e-4, offset=0.0, frequency=200.0)


@pytest.fixture
def channels(pointer):
    """(I1 shifted by 50 us, I2) at 1 MHz"""
    return render_channels(pointer, 5e-5, SAMPLE_RATE)


@pytest.fixture
def circuit():
    return CircuitParams()


@pytest.fixture
def trial_config(pointer, circuit):
    def make(noise_amplitude=0.0, delta_t=5e-5, sample_rate=2e5, **kwargs):
        return TrialConfig(
            pointer=pointer,
            circuit=circuit,
            delta_t=delta_t,
            noise_amplitude=noise_amplitude,
            sample_rate=sample_rate,
            **kwargs,
        )
    return make


@pytest.fixture(autouse=True)
def clean_settings_cache():
    invalidate_cache()
    yield
    invalidate_cache()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
