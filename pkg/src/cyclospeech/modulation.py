"""Frequency shifting by time-domain complex modulation, applied before STFT
analysis so that off-grid shifts are realized exactly.

Sign convention: ``modulate(x, alpha)`` multiplies by exp(+j*2*pi*alpha*n/fs),
so content originally at frequency f appears at f + alpha, and bin k of the
modulated spectrogram reads the input spectrum at (bin k) - alpha.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stft import AudioBuffer, ComplexSpectrogram, StftConfig, stft

__all__ = ["ModulationSet", "AugmentedSpectrogram", "modulate", "build_augmented"]


@dataclass
class ModulationSet:
    """Ordered frequency shifts in Hz; the zero shift always comes first."""

    shifts: tuple[float, ...]

    def __post_init__(self):
        shifts = tuple(float(s) for s in self.shifts)
        if not shifts:
            raise ValueError("modulation set must contain at least the zero shift")
        if shifts[0] != 0.0:
            raise ValueError("first shift must be 0 Hz")
        if not all(np.isfinite(shifts)):
            raise ValueError("shifts must be finite")
        if len(set(shifts)) != len(shifts):
            raise ValueError("shifts must be distinct")
        self.shifts = shifts

    def __len__(self) -> int:
        return len(self.shifts)

    @property
    def num_channels(self) -> int:
        return len(self.shifts)

    def validate_for_rate(self, sample_rate: int) -> None:
        for s in self.shifts:
            if abs(s) >= sample_rate / 2:
                raise ValueError(
                    f"shift {s} Hz is not below the Nyquist frequency "
                    f"{sample_rate / 2} Hz"
                )

    @classmethod
    def trivial(cls) -> "ModulationSet":
        return cls((0.0,))


def modulate(signal: AudioBuffer, alpha: float) -> AudioBuffer:
    """Multiply by a complex exponential of frequency ``alpha`` Hz."""
    alpha = float(alpha)
    if abs(alpha) >= signal.sample_rate / 2:
        raise ValueError(
            f"shift {alpha} Hz is not below the Nyquist frequency "
            f"{signal.sample_rate / 2} Hz"
        )
    n = np.arange(len(signal))
    rotator = np.exp(2j * np.pi * alpha * n / signal.sample_rate)
    return AudioBuffer(signal.samples * rotator, signal.sample_rate)


@dataclass
class AugmentedSpectrogram:
    """C-channel stack of spectrograms of frequency-shifted signal copies.

    Channel 0 is the plain STFT of the unmodulated input; channel c is the
    STFT of the input modulated by ``modset.shifts[c]``.
    """

    channels: np.ndarray  # (C, K, L) complex
    modset: ModulationSet
    config: StftConfig
    num_samples: int | None = None

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.complex128)
        if self.channels.ndim != 3:
            raise ValueError("channels must be 3-D (channels x bins x frames)")
        if self.channels.shape[0] != self.modset.num_channels:
            raise ValueError(
                f"{self.channels.shape[0]} channels do not match "
                f"{self.modset.num_channels} shifts"
            )
        if self.channels.shape[1] != self.config.fft_size:
            raise ValueError("bin count does not match fft_size")

    @property
    def num_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def num_bins(self) -> int:
        return self.channels.shape[1]

    @property
    def num_frames(self) -> int:
        return self.channels.shape[2]

    def channel(self, c: int) -> ComplexSpectrogram:
        return ComplexSpectrogram(
            data=self.channels[c], config=self.config, num_samples=self.num_samples
        )


def build_augmented(
    signal: AudioBuffer, modset: ModulationSet, cfg: StftConfig
) -> AugmentedSpectrogram:
    """Stack the STFTs of modulated signal copies, one channel per shift."""
    modset.validate_for_rate(signal.sample_rate)
    channels = []
    for alpha in modset.shifts:
        if alpha == 0.0:
            channels.append(stft(signal, cfg).data)
        else:
            channels.append(stft(modulate(signal, alpha), cfg).data)
    return AugmentedSpectrogram(
        channels=np.stack(channels, axis=0),
        modset=modset,
        config=cfg,
        num_samples=len(signal),
    )
