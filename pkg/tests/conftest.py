import numpy as np
import pytest

from cyclospeech import (
    AudioBuffer,
    HarmonicNoiseParams,
    default_stft_config,
    synth_harmonic_cs_noise,
    synth_speech_like,
)

FS = 16000


@pytest.fixture(scope="session")
def cfg16k():
    return default_stft_config(FS)


@pytest.fixture(scope="session")
def speech_4s():
    return synth_speech_like(4.0, FS, seed=42)


@pytest.fixture(scope="session")
def cs_noise_10s():
    return synth_harmonic_cs_noise(
        10.0, FS, HarmonicNoiseParams(f0=100.0, seed=7)
    )


@pytest.fixture(scope="session")
def white_10s():
    rng = np.random.default_rng(1234)
    return AudioBuffer(rng.standard_normal(10 * FS), FS)
