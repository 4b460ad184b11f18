import numpy as np
import pytest

from breathauth import synth
from breathauth.signal import TimeSeries, normalize_zscore


@pytest.fixture(scope="session")
def cascade_075():
    """Normalized binomial cascade, a=0.75, 2**14 points, seed 0."""
    return normalize_zscore(synth.binomial_cascade(2**14, 0.75, seed=0))


@pytest.fixture(scope="session")
def white_noise_16k():
    rng = np.random.default_rng(7)
    return normalize_zscore(TimeSeries(rng.standard_normal(2**14)))


@pytest.fixture(scope="session")
def breath_like_recording():
    """One 15000-sample cascade-modulated recording (no jitter)."""
    spec = synth.UserGeneratorSpec(
        user_id="u000", cascade_a=0.75, hurst=0.7, seed=3, a_jitter=0.0, h_jitter=0.0
    )
    return synth.synth_recording(spec)
