"""Objective evaluation: SI-SDR, STOI, and SNR-bucketed aggregation.

The per-file CSV schema is
    file,input_snr_db,preproc,mask,si_sdr_db,stoi
written UTF-8 with LF line endings and six decimal places. The aggregate
table reserves empty ``dnsmos`` and ``pesq`` columns so externally computed
values can be merged.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import resample_poly

from .stft import AudioBuffer

__all__ = [
    "MetricRecord",
    "si_sdr",
    "stoi",
    "aggregate",
    "curve_points",
    "write_records_csv",
    "write_table_csv",
]

SI_SDR_CAP_DB = 100.0

# STOI constants (10 kHz analysis rate)
_STOI_FS = 10000
_STOI_FRAME = 256
_STOI_HOP = 128
_STOI_NFFT = 512
_STOI_NUM_BANDS = 15
_STOI_LOWEST_CF = 150.0
_STOI_SEG_FRAMES = 30  # 384 ms at 12.8 ms per hop
_STOI_CLIP_DB = -15.0
_STOI_VAD_RANGE_DB = 40.0


@dataclass
class MetricRecord:
    file: str
    input_snr_db: float
    preproc: str
    mask: str
    si_sdr_db: float
    stoi: float

    def __post_init__(self):
        # correlation-based score can dip below zero; report clamped
        self.stoi = min(max(float(self.stoi), 0.0), 1.0)


def si_sdr(estimate: AudioBuffer, reference: AudioBuffer) -> float:
    """Scale-invariant signal-to-distortion ratio in dB, capped at +100 dB."""
    e = np.real(estimate.samples)
    r = np.real(reference.samples)
    if e.shape != r.shape:
        raise ValueError(f"length mismatch: {e.shape[0]} vs {r.shape[0]}")
    r_energy = float(np.dot(r, r))
    if r_energy == 0.0:
        raise ValueError("reference signal has zero energy")
    target = (np.dot(e, r) / r_energy) * r
    target_energy = float(np.dot(target, target))
    residual = e - target
    residual_energy = float(np.dot(residual, residual))
    if residual_energy <= target_energy * 10.0 ** (-SI_SDR_CAP_DB / 10.0):
        return SI_SDR_CAP_DB
    return min(10.0 * math.log10(target_energy / residual_energy), SI_SDR_CAP_DB)


def _third_octave_bands(nfft: int, fs: int) -> np.ndarray:
    """Boolean (bands x bins) membership matrix for the one-sided spectrum."""
    bin_freqs = np.arange(nfft // 2 + 1) * fs / nfft
    centers = _STOI_LOWEST_CF * 2.0 ** (np.arange(_STOI_NUM_BANDS) / 3.0)
    lo = centers / 2.0 ** (1.0 / 6.0)
    hi = centers * 2.0 ** (1.0 / 6.0)
    return (bin_freqs[None, :] >= lo[:, None]) & (bin_freqs[None, :] < hi[:, None])


def _frame(x: np.ndarray, window: np.ndarray, hop: int) -> np.ndarray:
    n_frames = 1 + (len(x) - len(window)) // hop
    idx = hop * np.arange(n_frames)[:, None] + np.arange(len(window))[None, :]
    return x[idx] * window


def _remove_silent_frames(
    x: np.ndarray, y: np.ndarray, window: np.ndarray, hop: int
) -> tuple[np.ndarray, np.ndarray]:
    """Drop frames where the reference is more than 40 dB below its loudest
    frame, and overlap-add the survivors back to signals."""
    xf = _frame(x, window, hop)
    yf = _frame(y, window, hop)
    energies = 20.0 * np.log10(np.linalg.norm(xf, axis=1) + np.finfo(float).eps)
    keep = energies > energies.max() - _STOI_VAD_RANGE_DB
    xf, yf = xf[keep], yf[keep]
    if len(xf) == 0:
        raise ValueError("reference contains no active frames")
    n_out = (len(xf) - 1) * hop + len(window)
    x_out = np.zeros(n_out)
    y_out = np.zeros(n_out)
    for i in range(len(xf)):
        start = i * hop
        x_out[start : start + len(window)] += xf[i]
        y_out[start : start + len(window)] += yf[i]
    return x_out, y_out


def stoi(estimate: AudioBuffer, reference: AudioBuffer, fs: int | None = None) -> float:
    """Short-time objective intelligibility of the estimate given the clean
    reference.

    Both signals are resampled to 10 kHz, silent reference frames are
    removed, band envelopes over 15 one-third-octave bands are compared in
    384 ms segments with per-segment normalization and clipping, and the
    band/segment correlations are averaged.
    """
    e = np.real(estimate.samples)
    r = np.real(reference.samples)
    if e.shape != r.shape:
        raise ValueError(f"length mismatch: {e.shape[0]} vs {r.shape[0]}")
    fs = int(fs) if fs is not None else reference.sample_rate
    if fs != estimate.sample_rate or fs != reference.sample_rate:
        raise ValueError("sample-rate mismatch between signals and fs argument")
    if fs != _STOI_FS:
        g = math.gcd(fs, _STOI_FS)
        e = resample_poly(e, _STOI_FS // g, fs // g)
        r = resample_poly(r, _STOI_FS // g, fs // g)

    min_samples = (_STOI_SEG_FRAMES - 1) * _STOI_HOP + _STOI_FRAME
    if len(r) < min_samples:
        raise ValueError(
            f"need at least {min_samples / _STOI_FS * 1e3:.0f} ms of signal"
        )
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(_STOI_FRAME) / _STOI_FRAME)
    r, e = _remove_silent_frames(r, e, window, _STOI_HOP)
    if len(r) < min_samples:
        raise ValueError("less than one 384 ms segment of active signal")

    rf = np.fft.rfft(_frame(r, window, _STOI_HOP), n=_STOI_NFFT, axis=1)
    ef = np.fft.rfft(_frame(e, window, _STOI_HOP), n=_STOI_NFFT, axis=1)
    bands = _third_octave_bands(_STOI_NFFT, _STOI_FS)
    # band envelopes, shape (bands, frames)
    x_env = np.sqrt(bands.astype(float) @ (np.abs(rf.T) ** 2))
    y_env = np.sqrt(bands.astype(float) @ (np.abs(ef.T) ** 2))

    n = _STOI_SEG_FRAMES
    # -15 dB lower SDR bound: normalized estimate may exceed the clean
    # envelope by at most 1 + 10^(15/20)
    clip_factor = 1.0 + 10.0 ** (-_STOI_CLIP_DB / 20.0)
    eps = np.finfo(float).eps
    scores = []
    for m in range(n, x_env.shape[1] + 1):
        x_seg = x_env[:, m - n : m]
        y_seg = y_env[:, m - n : m]
        alpha = np.linalg.norm(x_seg, axis=1, keepdims=True) / (
            np.linalg.norm(y_seg, axis=1, keepdims=True) + eps
        )
        y_seg = np.minimum(alpha * y_seg, clip_factor * x_seg)
        xc = x_seg - x_seg.mean(axis=1, keepdims=True)
        yc = y_seg - y_seg.mean(axis=1, keepdims=True)
        denom = np.linalg.norm(xc, axis=1) * np.linalg.norm(yc, axis=1) + eps
        scores.append(np.sum(xc * yc, axis=1) / denom)
    return float(np.mean(scores))


def _bucket_label(lo: float, hi: float, closed: bool) -> str:
    return f"[{lo:g},{hi:g}{']' if closed else ')'}"


def aggregate(
    records: list[MetricRecord],
    buckets: tuple[tuple[float, float], ...] = ((-20.0, -10.0), (-10.0, 0.0)),
) -> list[dict]:
    """Mean metrics per (SNR bucket x preprocessor x mask).

    The final bucket includes its upper edge. Records outside every bucket
    land in an "other" row rather than being dropped.
    """
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict[tuple[str, str, str], list[MetricRecord]] = {}
    labels = [
        _bucket_label(lo, hi, closed=(i == len(buckets) - 1))
        for i, (lo, hi) in enumerate(buckets)
    ]
    for rec in records:
        label = "other"
        for i, (lo, hi) in enumerate(buckets):
            last = i == len(buckets) - 1
            if lo <= rec.input_snr_db < hi or (last and rec.input_snr_db == hi):
                label = labels[i]
                break
        groups.setdefault((label, rec.preproc, rec.mask), []).append(rec)

    order = {label: i for i, label in enumerate([*labels, "other"])}
    rows = []
    for (label, preproc, mask) in sorted(
        groups, key=lambda k: (order[k[0]], k[1], k[2])
    ):
        recs = groups[(label, preproc, mask)]
        rows.append(
            {
                "snr_bucket": label,
                "preproc": preproc,
                "mask": mask,
                "count": len(recs),
                "si_sdr_db": float(np.mean([r.si_sdr_db for r in recs])),
                "stoi": float(np.mean([r.stoi for r in recs])),
                "dnsmos": "",
                "pesq": "",
            }
        )
    return rows


def curve_points(records: list[MetricRecord], bin_width: float = 5.0) -> list[dict]:
    """Metric-vs-SNR curve samples: means over fixed-width SNR bins."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    groups: dict[tuple[str, str, float], list[MetricRecord]] = {}
    for rec in records:
        center = (math.floor(rec.input_snr_db / bin_width) + 0.5) * bin_width
        groups.setdefault((rec.preproc, rec.mask, center), []).append(rec)
    rows = []
    for (preproc, mask, center) in sorted(groups):
        recs = groups[(preproc, mask, center)]
        rows.append(
            {
                "preproc": preproc,
                "mask": mask,
                "snr_bin_db": center,
                "count": len(recs),
                "si_sdr_db": float(np.mean([r.si_sdr_db for r in recs])),
                "stoi": float(np.mean([r.stoi for r in recs])),
            }
        )
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_records_csv(path, records: list[MetricRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["file", "input_snr_db", "preproc", "mask", "si_sdr_db", "stoi"])
        for r in records:
            writer.writerow(
                [
                    r.file,
                    _fmt(r.input_snr_db),
                    r.preproc,
                    r.mask,
                    _fmt(r.si_sdr_db),
                    _fmt(r.stoi),
                ]
            )


def write_table_csv(path, rows: list[dict]) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(rows[0].keys())
        for row in rows:
            writer.writerow([_fmt(v) for v in row.values()])
