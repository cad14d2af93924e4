"""Cyclic MPDR spectral beamformer.

Per frequency bin, a C x C spectral covariance of the augmented
(frequency-shifted) observation vector is tracked by recursive averaging,

    S <- beta_x * S + (1 - beta_x) * x x^H,

and the minimum-power weights with unit gain on the unshifted channel are
solved in closed form each frame,

    w = S^-1 e1 / (e1^H S^-1 e1),      y = w^H x.

The inverse is realized as a Hermitian linear solve of (S + lambda I) a = e1
with trace-relative diagonal loading; weights are never formed from an
explicit inverse.

Diagnostic sidecar layout (binary, little-endian):
    bytes 0..7    magic b"CYCBFDG1"
    3 x uint32    K (bins), C (channels), L (frames)
    complex64     final covariance, K*C*C values, row-major (K, C, C)
    complex64     weight trajectories, K*L*C values, row-major (K, L, C)
"""

from __future__ import annotations

import numpy as np

from .modulation import AugmentedSpectrogram
from .stft import ComplexSpectrogram

__all__ = [
    "update_covariance",
    "solve_weights",
    "process",
    "read_diagnostics",
]

DIAGNOSTICS_MAGIC = b"CYCBFDG1"

# Floor applied to the diagonal loading so an all-zero covariance still
# yields the pass-through weights e1 instead of a singular solve.
_ABS_LOAD_FLOOR = 1e-30


def update_covariance(
    s_prev: np.ndarray, x_vec: np.ndarray, beta_x: float = 0.95
) -> np.ndarray:
    """One recursive-averaging step; Hermitian by construction."""
    if not 0.0 < beta_x < 1.0:
        raise ValueError("beta_x must lie strictly between 0 and 1")
    s_prev = np.asarray(s_prev, dtype=np.complex128)
    x_vec = np.asarray(x_vec, dtype=np.complex128)
    if x_vec.ndim != 1:
        raise ValueError("x_vec must be a vector")
    c = x_vec.shape[0]
    if s_prev.shape != (c, c):
        raise ValueError(
            f"covariance shape {s_prev.shape} does not match vector length {c}"
        )
    return beta_x * s_prev + (1.0 - beta_x) * np.outer(x_vec, np.conj(x_vec))


def _solve_weights_batch(
    cov: np.ndarray, diag_load: float
) -> tuple[np.ndarray, np.ndarray]:
    """Distortionless weights for a (K, C, C) covariance batch.

    Returns (weights (K, C), fallback mask (K,)); fallback bins get w = e1.
    """
    k, c, _ = cov.shape
    trace = np.einsum("kcc->k", cov).real
    lam = np.maximum(diag_load * trace / c, _ABS_LOAD_FLOOR)
    loaded = cov + lam[:, None, None] * np.eye(c)
    e1 = np.zeros((k, c), dtype=np.complex128)
    e1[:, 0] = 1.0
    fallback = np.zeros(k, dtype=bool)
    try:
        a = np.linalg.solve(loaded, e1[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        a = np.empty_like(e1)
        for i in range(k):
            try:
                a[i] = np.linalg.solve(loaded[i], e1[i])
            except np.linalg.LinAlgError:
                a[i] = e1[i]
                fallback[i] = True
    bad = ~np.isfinite(a).all(axis=1) | (np.abs(a[:, 0]) < _ABS_LOAD_FLOOR)
    if np.any(bad):
        fallback |= bad
        a[fallback] = e1[fallback]
    w = a / a[:, :1]
    return w, fallback


def solve_weights(
    cov: np.ndarray, diag_load: float = 1e-6
) -> tuple[np.ndarray, bool]:
    """Closed-form minimum-power weights with w^H e1 = 1.

    ``cov`` is a C x C Hermitian matrix; the solve uses a diagonally loaded
    copy. Returns (w, fallback); a numerically singular matrix falls back to
    the pass-through weights e1 with the flag set.
    """
    cov = np.asarray(cov, dtype=np.complex128)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be a square matrix")
    w, fb = _solve_weights_batch(cov[None, :, :], diag_load)
    return w[0], bool(fb[0])


def process(
    aug: AugmentedSpectrogram,
    beta_x: float = 0.95,
    diag_load: float = 1e-6,
    weight_stride: int = 1,
    companion: AugmentedSpectrogram | None = None,
    diagnostics_path=None,
):
    """Run the per-bin covariance recursion and beamform every frame.

    ``companion`` co-filters a second augmented spectrogram with the weights
    computed from ``aug`` (the filter is linear given its weights), which is
    how a known clean signal is passed through the identical preprocessor.
    ``weight_stride`` > 1 reuses weights for that many frames (the covariance
    still updates every frame). Returns the beamformed spectrogram, or a
    (main, companion) pair when a companion is given.
    """
    if not 0.0 < beta_x < 1.0:
        raise ValueError("beta_x must lie strictly between 0 and 1")
    if weight_stride < 1:
        raise ValueError("weight_stride must be at least 1")
    if companion is not None and companion.channels.shape != aug.channels.shape:
        raise ValueError("companion must match the main spectrogram's shape")

    chans = aug.channels  # (C, K, L)
    c, k, l = chans.shape
    if c == 1:
        main = ComplexSpectrogram(
            data=chans[0].copy(), config=aug.config, num_samples=aug.num_samples
        )
        if diagnostics_path is not None:
            ones = np.ones((k, l, 1), dtype=np.complex64)
            final_cov = np.zeros((k, 1, 1), dtype=np.complex64)
            _write_diagnostics(diagnostics_path, final_cov, ones)
        if companion is None:
            return main
        comp = ComplexSpectrogram(
            data=companion.channels[0].copy(),
            config=companion.config,
            num_samples=companion.num_samples,
        )
        return main, comp

    # warm-start at a small multiple of the early per-bin input power
    warm = min(10, l)
    delta = 1e-3 * np.mean(np.abs(chans[0, :, :warm]) ** 2, axis=1)
    cov = delta[:, None, None] * np.eye(c)[None, :, :].astype(np.complex128)

    out = np.empty((k, l), dtype=np.complex128)
    out_comp = np.empty((k, l), dtype=np.complex128) if companion is not None else None
    weights_log = (
        np.empty((k, l, c), dtype=np.complex64) if diagnostics_path is not None else None
    )
    w = None
    for frame in range(l):
        x = chans[:, :, frame].T  # (K, C)
        cov = beta_x * cov + (1.0 - beta_x) * (
            x[:, :, None] * np.conj(x[:, None, :])
        )
        if frame % weight_stride == 0 or w is None:
            w, _ = _solve_weights_batch(cov, diag_load)
        out[:, frame] = np.sum(np.conj(w) * x, axis=1)
        if out_comp is not None:
            xc = companion.channels[:, :, frame].T
            out_comp[:, frame] = np.sum(np.conj(w) * xc, axis=1)
        if weights_log is not None:
            weights_log[:, frame, :] = w.astype(np.complex64)

    if diagnostics_path is not None:
        _write_diagnostics(diagnostics_path, cov.astype(np.complex64), weights_log)

    main = ComplexSpectrogram(data=out, config=aug.config, num_samples=aug.num_samples)
    if companion is None:
        return main
    comp = ComplexSpectrogram(
        data=out_comp, config=companion.config, num_samples=companion.num_samples
    )
    return main, comp


def _write_diagnostics(path, final_cov: np.ndarray, weights: np.ndarray) -> None:
    k, l, c = weights.shape
    with open(path, "wb") as fh:
        fh.write(DIAGNOSTICS_MAGIC)
        np.array([k, c, l], dtype=np.uint32).tofile(fh)
        np.ascontiguousarray(final_cov, dtype=np.complex64).tofile(fh)
        np.ascontiguousarray(weights, dtype=np.complex64).tofile(fh)


def read_diagnostics(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a diagnostic sidecar; returns (final covariance (K,C,C), weights (K,L,C))."""
    with open(path, "rb") as fh:
        magic = fh.read(len(DIAGNOSTICS_MAGIC))
        if magic != DIAGNOSTICS_MAGIC:
            raise ValueError(f"not a beamformer diagnostics file: {path}")
        k, c, l = (int(v) for v in np.fromfile(fh, dtype=np.uint32, count=3))
        final_cov = np.fromfile(fh, dtype=np.complex64, count=k * c * c).reshape(k, c, c)
        weights = np.fromfile(fh, dtype=np.complex64, count=k * l * c).reshape(k, l, c)
    return final_cov, weights
