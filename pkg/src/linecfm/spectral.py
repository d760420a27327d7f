"""STFT utilities and the two speech-domain line constructors.

Scaling a waveform by ``s`` adds ``log |s|`` to every log-magnitude bin, and
delaying it by ``tau`` samples subtracts the ramp ``2 pi k tau / N`` from the
phase of bin ``k``.  Both facts turn a spectrogram into a line of equivalent
variants: slope all-ones for the log-magnitude block and slope ``-ramp`` for
the phase block.  This module computes the spectrograms, builds those lines,
and ships numerical verifiers for the two properties.

Magnitudes are floored at ``MAG_FLOOR`` before the log; bins at or below the
floor are excluded from property verification and get phase 0 by convention.
"""

from __future__ import annotations

import csv
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .geometry import VariantLine
from .validation import as_float_array, as_vector

__all__ = [
    "MAG_FLOOR",
    "StftConfig",
    "Spectrogram",
    "dft",
    "idft",
    "stft",
    "istft",
    "phase_ramp",
    "scaling_line",
    "shifting_line",
    "verify_scaling",
    "verify_shifting",
    "windowed_shift_error",
    "wrap_phase",
    "read_wav",
    "write_wav",
    "spectrogram_to_csv",
]

MAG_FLOOR = 1e-7

_WINDOWS = ("hann", "rectangular")


@dataclass(frozen=True)
class StftConfig:
    """Frame size, hop, and analysis window of an STFT.

    ``center=True`` zero-pads the signal by half a frame on both sides so
    every sample is covered by a window and the round trip is exact; with
    ``center=False`` frames start at sample 0 and a single exact-length frame
    is transformed as-is.
    """

    n_fft: int = 1024
    hop: int = 256
    window: str = "hann"
    center: bool = True

    def __post_init__(self):
        if self.n_fft <= 0 or self.n_fft % 2 != 0:
            raise ValueError(f"n_fft must be a positive even number, got {self.n_fft}")
        if not 0 < self.hop <= self.n_fft:
            raise ValueError(f"hop must be in 1..n_fft, got {self.hop}")
        if self.window not in _WINDOWS:
            raise ValueError(f"window must be one of {_WINDOWS}, got {self.window!r}")

    @property
    def bins(self) -> int:
        return self.n_fft // 2 + 1

    def window_values(self) -> np.ndarray:
        if self.window == "rectangular":
            return np.ones(self.n_fft)
        # periodic hann, the DFT-friendly variant
        n = np.arange(self.n_fft)
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / self.n_fft)


@dataclass
class Spectrogram:
    """Log-magnitude and phase, frames by bins, plus the STFT that made them."""

    log_mag: np.ndarray
    phase: np.ndarray
    config: StftConfig
    n_samples: int

    def __post_init__(self):
        self.log_mag = as_float_array(self.log_mag, "log_mag")
        self.phase = as_float_array(self.phase, "phase")
        if self.log_mag.ndim != 2 or self.log_mag.shape != self.phase.shape:
            raise ValueError("log_mag and phase must be equal-shape 2-D arrays")
        if self.log_mag.shape[1] != self.config.bins:
            raise ValueError(
                f"expected {self.config.bins} bins, got {self.log_mag.shape[1]}"
            )
        if not np.all(np.isfinite(self.log_mag)):
            raise ValueError("log_mag must be finite (magnitudes are floored)")
        if np.any(self.phase <= -np.pi) or np.any(self.phase > np.pi):
            raise ValueError("phase must lie in (-pi, pi]")

    @property
    def n_frames(self) -> int:
        return self.log_mag.shape[0]

    @property
    def dim(self) -> int:
        """Flattened size of one block (frames * bins)."""
        return self.log_mag.size


def dft(frame) -> np.ndarray:
    """One-sided DFT of a real frame: bins k = 0..N/2."""
    frame = as_vector(frame, "frame")
    return np.fft.rfft(frame)


def idft(spectrum, n_fft: int) -> np.ndarray:
    """Inverse of :func:`dft` back to an ``n_fft``-sample real frame."""
    spectrum = np.asarray(spectrum)
    if spectrum.ndim != 1 or spectrum.size != n_fft // 2 + 1:
        raise ValueError(f"spectrum must have {n_fft // 2 + 1} bins")
    return np.fft.irfft(spectrum, n=n_fft)


def wrap_phase(x) -> np.ndarray:
    """Wrap angles into (-pi, pi]."""
    x = as_float_array(x, "x")
    wrapped = np.mod(x + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def stft(signal, config: StftConfig) -> Spectrogram:
    """Windowed frame-by-frame DFT with the configured hop."""
    signal = as_vector(signal, "signal")
    if signal.size < config.n_fft:
        raise ValueError(
            f"signal has {signal.size} samples but one frame needs {config.n_fft}"
        )
    n_samples = signal.size
    if config.center:
        pad = config.n_fft // 2
        signal = np.concatenate([np.zeros(pad), signal, np.zeros(pad)])
    frames = sliding_window_view(signal, config.n_fft)[:: config.hop]
    spectra = np.fft.rfft(frames * config.window_values(), axis=1)
    mag = np.abs(spectra)
    log_mag = np.log(np.maximum(mag, MAG_FLOOR))
    phase = np.angle(spectra)
    phase[mag <= MAG_FLOOR] = 0.0
    phase = np.where(phase == -np.pi, np.pi, phase)
    return Spectrogram(log_mag=log_mag, phase=phase, config=config, n_samples=n_samples)


def istft(spec: Spectrogram) -> np.ndarray:
    """Overlap-add resynthesis with window-sum normalization.

    Exact (to float roundoff) wherever the accumulated squared window is
    nonzero, which with ``center=True`` is every sample of the original
    signal.
    """
    config = spec.config
    win = config.window_values()
    spectra = np.exp(spec.log_mag) * np.exp(1j * spec.phase)
    frames = np.fft.irfft(spectra, n=config.n_fft, axis=1) * win
    padded_len = (spec.n_frames - 1) * config.hop + config.n_fft
    out = np.zeros(padded_len)
    weight = np.zeros(padded_len)
    win_sq = win * win
    for i in range(spec.n_frames):
        start = i * config.hop
        out[start : start + config.n_fft] += frames[i]
        weight[start : start + config.n_fft] += win_sq
    covered = weight > 1e-12
    out[covered] /= weight[covered]
    if config.center:
        pad = config.n_fft // 2
        return out[pad : pad + spec.n_samples]
    return out[: spec.n_samples]


def phase_ramp(n_fft: int) -> np.ndarray:
    """Per-bin phase advance of a one-sample delay: ``2 pi k / N`` for k = 0..N/2."""
    return 2.0 * np.pi * np.arange(n_fft // 2 + 1) / n_fft


def scaling_line(spec: Spectrogram) -> VariantLine:
    """Amplitude-scaling variants of the log-magnitude block.

    Scaling the waveform moves every log-magnitude bin by the same additive
    constant, so the direction is all-ones over the flattened block and the
    offset is the spectrogram itself.
    """
    return VariantLine(direction=np.ones(spec.dim), offset=spec.log_mag.ravel())


def shifting_line(spec: Spectrogram) -> VariantLine:
    """Time-shift variants of the phase block.

    A delay of ``tau`` samples subtracts ``tau`` times the per-bin ramp from
    every frame, so the direction is the negated ramp tiled across frames and
    the offset is the flattened phase.
    """
    ramp = phase_ramp(spec.config.n_fft)
    return VariantLine(
        direction=-np.tile(ramp, spec.n_frames), offset=spec.phase.ravel()
    )


def verify_scaling(signal, s: float, config: StftConfig) -> float:
    """Max log-magnitude error of the amplitude-scaling relation.

    Compares ``stft(s * signal)`` against ``stft(signal)`` shifted by
    ``log |s|``, over bins above the floor in both spectrograms.  The relation
    is analytically exact, so the result is pure floating-point noise.
    """
    s = float(s)
    if s == 0.0:
        raise ValueError("scale factor must be nonzero")
    signal = as_vector(signal, "signal")
    base = stft(signal, config)
    scaled = stft(s * signal, config)
    log_floor = np.log(MAG_FLOOR)
    mask = (base.log_mag > log_floor) & (scaled.log_mag > log_floor)
    if not mask.any():
        return 0.0
    err = scaled.log_mag[mask] - base.log_mag[mask] - np.log(abs(s))
    return float(np.max(np.abs(err)))


def verify_shifting(frame, tau: int, config: StftConfig) -> float:
    """Max wrapped phase error of the circular-shift relation on one frame.

    Circularly delays the frame by ``tau`` samples (any integer; shifts are
    taken modulo the frame length) and compares the DFT phases against the
    predicted per-bin ramp, over bins above the magnitude floor.
    """
    frame = as_vector(frame, "frame", length=config.n_fft)
    tau = int(tau) % config.n_fft  # circular semantics; tau = N is the identity
    base = dft(frame)
    shifted = dft(np.roll(frame, tau))
    mask = (np.abs(base) > MAG_FLOOR) & (np.abs(shifted) > MAG_FLOOR)
    if not mask.any():
        return 0.0
    predicted = np.angle(base) - phase_ramp(config.n_fft) * tau
    err = wrap_phase(np.angle(shifted) - predicted)
    return float(np.max(np.abs(err[mask])))


def windowed_shift_error(signal, tau: int, config: StftConfig) -> float:
    """Median wrapped phase error of the ramp relation for a *linear* shift.

    For overlapping windowed frames of a linearly delayed long signal the
    ramp relation is only approximate and hop-dependent; this measures the
    error (median over bins above floor, frames common to both spectrograms)
    without asserting any bound.
    """
    signal = as_vector(signal, "signal")
    tau = int(tau)
    if tau < 0:
        raise ValueError("linear shift measurement expects tau >= 0")
    delayed = np.concatenate([np.zeros(tau), signal])[: signal.size]
    base = stft(signal, config)
    shifted = stft(delayed, config)
    n_frames = min(base.n_frames, shifted.n_frames)
    log_floor = np.log(MAG_FLOOR)
    mask = (base.log_mag[:n_frames] > log_floor) & (shifted.log_mag[:n_frames] > log_floor)
    if not mask.any():
        return 0.0
    predicted = base.phase[:n_frames] - phase_ramp(config.n_fft)[np.newaxis, :] * tau
    err = wrap_phase(shifted.phase[:n_frames] - predicted)
    return float(np.median(np.abs(err[mask])))


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a 16-bit PCM mono WAV as floats in [-1, 1], skipping extra chunks.

    Returns ``(samples, sample_rate)``.
    """
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1:
            raise ValueError(f"expected mono audio, got {fh.getnchannels()} channels")
        if fh.getsampwidth() != 2:
            raise ValueError(f"expected 16-bit samples, got {8 * fh.getsampwidth()}-bit")
        if fh.getcomptype() != "NONE":
            raise ValueError(f"expected PCM data, got {fh.getcomptype()}")
        raw = fh.readframes(fh.getnframes())
        rate = fh.getframerate()
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def write_wav(path, samples, rate: int) -> None:
    """Write floats in [-1, 1] as a 16-bit PCM mono WAV (test/demo helper)."""
    samples = as_vector(samples, "samples")
    pcm = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(int(rate))
        fh.writeframes(pcm.tobytes())


def spectrogram_to_csv(spec: Spectrogram, path) -> Path:
    """Dump a spectrogram as ``frame,bin,log_mag,phase`` rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "bin", "log_mag", "phase"])
        for f in range(spec.n_frames):
            for b in range(spec.config.bins):
                writer.writerow(
                    [f, b, f"{spec.log_mag[f, b]:.12g}", f"{spec.phase[f, b]:.12g}"]
                )
    return path
