import numpy as np
import pytest

from cyclospeech import (
    AudioBuffer,
    HarmonicNoiseParams,
    ModulationSet,
    build_augmented,
    modulate,
    stft,
    synth_harmonic_cs_noise,
)

FS = 16000


def test_modset_validation():
    ModulationSet((0.0, 100.0, 250.0))
    with pytest.raises(ValueError, match="first shift"):
        ModulationSet((100.0, 0.0))
    with pytest.raises(ValueError, match="distinct"):
        ModulationSet((0.0, 100.0, 100.0))
    with pytest.raises(ValueError, match="at least"):
        ModulationSet(())
    with pytest.raises(ValueError, match="Nyquist"):
        ModulationSet((0.0, 9000.0)).validate_for_rate(FS)


def test_zero_shift_is_identity():
    rng = np.random.default_rng(0)
    x = AudioBuffer(rng.standard_normal(1000), FS)
    y = modulate(x, 0.0)
    assert np.iscomplexobj(y.samples)
    assert np.array_equal(y.samples, x.samples.astype(complex))


def test_cosine_shift_moves_spectral_lines():
    # 100 Hz cosine shifted by +50 Hz: lines move from +-100 to 150 and -50
    n = 4 * FS
    t = np.arange(n) / FS
    x = AudioBuffer(np.cos(2 * np.pi * 100.0 * t), FS)
    y = modulate(x, 50.0)
    spectrum = np.abs(np.fft.fft(y.samples))
    freqs = np.fft.fftfreq(n, 1.0 / FS)
    order = np.argsort(spectrum)[::-1][:2]
    found = sorted(freqs[order])
    assert abs(found[0] - (-50.0)) < FS / n + 1e-9
    assert abs(found[1] - 150.0) < FS / n + 1e-9


def test_modulation_preserves_magnitude():
    rng = np.random.default_rng(1)
    x = AudioBuffer(rng.standard_normal(5000), FS)
    y = modulate(x, 333.3)
    assert np.allclose(np.abs(y.samples), np.abs(x.samples), atol=1e-12)


def test_shift_beyond_nyquist_rejected():
    x = AudioBuffer(np.ones(100), FS)
    with pytest.raises(ValueError, match="Nyquist"):
        modulate(x, 8000.0)
    with pytest.raises(ValueError, match="Nyquist"):
        modulate(x, -8123.0)


def test_off_grid_shift_matches_directly_synthesized_tone(cfg16k):
    # modulating a tone must equal synthesizing the shifted tone directly
    n = np.arange(4000)
    f1, alpha = 1000.0, 73.3  # alpha far from any multiple of fs/K = 31.25
    tone = AudioBuffer(np.exp(2j * np.pi * f1 * n / FS), FS)
    shifted_tone = AudioBuffer(np.exp(2j * np.pi * (f1 + alpha) * n / FS), FS)
    via_mod = stft(modulate(tone, alpha), cfg16k).data
    direct = stft(shifted_tone, cfg16k).data
    assert np.abs(via_mod - direct).max() <= 1e-9 * np.abs(direct).max()


def test_energy_preserved_per_channel(cfg16k):
    rng = np.random.default_rng(2)
    sig = AudioBuffer(rng.standard_normal(8000), FS)
    aug = build_augmented(sig, ModulationSet((0.0, 87.1, 311.7)), cfg16k)
    energies = [np.sum(np.abs(aug.channels[c]) ** 2) for c in range(3)]
    for e in energies[1:]:
        assert abs(e - energies[0]) <= 1e-9 * energies[0]


def test_channel_zero_bit_identical(cfg16k):
    rng = np.random.default_rng(3)
    sig = AudioBuffer(rng.standard_normal(6000), FS)
    aug = build_augmented(sig, ModulationSet((0.0, 120.0)), cfg16k)
    assert np.array_equal(aug.channels[0], stft(sig, cfg16k).data)


def test_trivial_modset_single_channel(cfg16k):
    sig = AudioBuffer(np.sin(np.arange(4000) * 0.02), FS)
    aug = build_augmented(sig, ModulationSet.trivial(), cfg16k)
    assert aug.num_channels == 1
    assert np.array_equal(aug.channels[0], stft(sig, cfg16k).data)


def test_three_shifts_three_channels(cfg16k):
    sig = AudioBuffer(np.sin(np.arange(4000) * 0.02), FS)
    aug = build_augmented(sig, ModulationSet((0.0, 50.0, 100.0)), cfg16k)
    assert aug.channels.shape[0] == 3
    assert aug.channel(1).shape == aug.channel(0).shape


def test_on_grid_shift_rolls_magnitudes(cfg16k):
    # f0 = 125 Hz is exactly 4 grid bins, so the shifted channel's magnitudes
    # are a circular roll of the unshifted ones: harmonic bins carry the
    # next-lower harmonic's energy
    f0 = 125.0
    g = round(f0 * cfg16k.fft_size / FS)
    noise = synth_harmonic_cs_noise(
        2.0, FS, HarmonicNoiseParams(f0=f0, num_harmonics=6, seed=5)
    )
    aug = build_augmented(noise, ModulationSet((0.0, f0)), cfg16k)
    mag0 = np.abs(aug.channels[0])
    mag1 = np.abs(aug.channels[1])
    assert np.abs(mag1 - np.roll(mag0, g, axis=0)).max() <= 1e-9 * mag0.max()
