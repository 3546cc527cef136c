"""Time-averaged log-mel features from WAV audio.

All extraction parameters are pinned in :class:`DspConfig` so the front end is
self-describing: 22.05 kHz target rate, 2048/512 STFT with a periodic Hann
window and centered reflect padding, 128 slaney-normalized mel bands, power
spectrogram, and a 1e-10 dB floor against a unity reference.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DspConfig:
    target_sample_rate: int = 22050
    fft_size: int = 2048
    hop: int = 512
    n_mels: int = 128
    mel_scale: str = "slaney"  # or "htk"
    f_min: float = 0.0
    f_max: float | None = None  # None -> Nyquist of target_sample_rate
    power: float = 2.0
    log_floor: float = 1e-10
    db_ref: str = "unity"  # or "max"
    window: str = "hann"

    def __post_init__(self) -> None:
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1):
            raise DataError(f"fft_size must be a power of two, got {self.fft_size}")
        if not 1 <= self.hop <= self.fft_size:
            raise DataError(f"hop must be in 1..fft_size, got {self.hop}")
        if self.n_mels < 1:
            raise DataError(f"n_mels must be >= 1, got {self.n_mels}")
        nyquist = self.target_sample_rate / 2
        f_max = self.resolved_f_max()
        if not 0 <= self.f_min < f_max <= nyquist:
            raise DataError(
                f"need 0 <= f_min < f_max <= Nyquist, got f_min={self.f_min}, "
                f"f_max={f_max}, Nyquist={nyquist}"
            )
        if self.mel_scale not in ("slaney", "htk"):
            raise DataError(f"mel_scale must be 'slaney' or 'htk', got {self.mel_scale!r}")
        if self.db_ref not in ("unity", "max"):
            raise DataError(f"db_ref must be 'unity' or 'max', got {self.db_ref!r}")
        if self.window not in ("hann", "hamming", "rect"):
            raise DataError(f"unsupported window {self.window!r}")

    def resolved_f_max(self) -> float:
        return self.target_sample_rate / 2 if self.f_max is None else self.f_max


def decode_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Decode a PCM WAV file to a mono float64 signal in [-1, 1] plus its rate.

    Integer PCM is scaled by its full-scale value (16-bit: 32768, 24/32-bit:
    2^31, 8-bit unsigned: offset then 128); float PCM passes through.
    Multichannel audio is averaged to mono.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise DataError(f"{path}: not a decodable WAV file ({exc})") from None
    if data.dtype == np.int16:
        signal = data / 32768.0
    elif data.dtype == np.int32:
        # scipy widens 24-bit PCM into the int32 high bytes, so one scale fits both
        signal = data / 2147483648.0
    elif data.dtype == np.uint8:
        signal = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        signal = data.astype(np.float64)
    else:
        raise DataError(f"{path}: unsupported WAV sample format {data.dtype}")
    if signal.ndim == 2:
        signal = signal.mean(axis=1)
    return np.asarray(signal, dtype=np.float64), int(rate)


def resample(signal: np.ndarray, from_rate: int, to_rate: int) -> np.ndarray:
    """Band-limited polyphase resampling (windowed-sinc, Kaiser beta=5).

    Output length is round(n * to_rate / from_rate), half away from zero.
    """
    if from_rate <= 0 or to_rate <= 0:
        raise DataError(f"rates must be positive, got {from_rate} -> {to_rate}")
    if from_rate != int(from_rate) or to_rate != int(to_rate):
        raise DataError(f"rates must be integer Hz, got {from_rate} -> {to_rate}")
    from_rate, to_rate = int(from_rate), int(to_rate)
    signal = np.asarray(signal, dtype=np.float64)
    if from_rate == to_rate:
        return signal.copy()
    g = math.gcd(from_rate, to_rate)
    out = resample_poly(signal, to_rate // g, from_rate // g, window=("kaiser", 5.0))
    target_len = int(math.floor(len(signal) * to_rate / from_rate + 0.5))
    if len(out) > target_len:
        out = out[:target_len]
    elif len(out) < target_len:
        out = np.pad(out, (0, target_len - len(out)))
    return out


def hz_to_mel(freq, scale: str = "slaney"):
    freq = np.asarray(freq, dtype=np.float64)
    if scale == "htk":
        return 2595.0 * np.log10(1.0 + freq / 700.0)
    # slaney: linear below 1 kHz, logarithmic above
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    mels = freq / f_sp
    above = freq >= min_log_hz
    mels = np.where(above, min_log_mel + np.log(np.maximum(freq, min_log_hz) / min_log_hz) / logstep, mels)
    return mels


def mel_to_hz(mels, scale: str = "slaney"):
    mels = np.asarray(mels, dtype=np.float64)
    if scale == "htk":
        return 700.0 * (10.0 ** (mels / 2595.0) - 1.0)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    freqs = mels * f_sp
    above = mels >= min_log_mel
    freqs = np.where(above, min_log_hz * np.exp(logstep * (mels - min_log_mel)), freqs)
    return freqs


def mel_band_edges(cfg: DspConfig) -> np.ndarray:
    """The n_mels + 2 band edge frequencies in Hz (lower, centers..., upper)."""
    m_lo = hz_to_mel(cfg.f_min, cfg.mel_scale)
    m_hi = hz_to_mel(cfg.resolved_f_max(), cfg.mel_scale)
    return mel_to_hz(np.linspace(m_lo, m_hi, cfg.n_mels + 2), cfg.mel_scale)


def mel_filterbank(cfg: DspConfig) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, fft_size // 2 + 1).

    Each triangle spans edge[i]..edge[i+2] peaking at edge[i+1]; slaney
    normalization scales each row by 2 / bandwidth so band energy is
    comparable across the spectrum.
    """
    edges = mel_band_edges(cfg)
    n_bins = cfg.fft_size // 2 + 1
    fft_freqs = np.arange(n_bins) * (cfg.target_sample_rate / cfg.fft_size)
    lower = edges[:-2, None]
    center = edges[1:-1, None]
    upper = edges[2:, None]
    up = (fft_freqs - lower) / np.maximum(center - lower, 1e-30)
    down = (upper - fft_freqs) / np.maximum(upper - center, 1e-30)
    weights = np.maximum(0.0, np.minimum(up, down))
    weights *= 2.0 / (upper - lower)
    empty = ~np.any(weights > 0, axis=1)
    if empty.any():
        log.warning("%d mel bands have no FFT bin support (fft_size too small)", empty.sum())
    return weights


def _window(cfg: DspConfig) -> np.ndarray:
    n = cfg.fft_size
    if cfg.window == "hann":
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    if cfg.window == "hamming":
        return 0.54 - 0.46 * np.cos(2.0 * np.pi * np.arange(n) / n)
    return np.ones(n)


def power_spectrogram(signal: np.ndarray, cfg: DspConfig) -> np.ndarray:
    """|STFT|^power with centered frames, shape (fft_size//2 + 1, n_frames).

    Frames are centered by reflect-padding fft_size//2 samples on each side,
    giving n_frames = 1 + floor(len(signal) / hop).
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.size < 1:
        raise DataError("power_spectrogram expects a nonempty 1-D signal")
    half = cfg.fft_size // 2
    pad_mode = "reflect" if signal.size > 1 else "edge"
    padded = np.pad(signal, (half, half), mode=pad_mode)
    n_frames = 1 + signal.size // cfg.hop
    offsets = np.arange(n_frames) * cfg.hop
    frames = padded[offsets[:, None] + np.arange(cfg.fft_size)[None, :]]
    spectrum = np.fft.rfft(frames * _window(cfg)[None, :], axis=1)
    return (np.abs(spectrum).T) ** cfg.power


def log_mel(signal: np.ndarray, cfg: DspConfig) -> np.ndarray:
    """Log-mel spectrogram in dB, shape (n_mels, n_frames).

    The signal must already be at ``cfg.target_sample_rate``. dB conversion is
    10*log10(max(x, log_floor)); with ``db_ref="max"`` the per-clip maximum is
    subtracted.
    """
    spec = power_spectrogram(signal, cfg)
    mel = mel_filterbank(cfg) @ spec
    db = 10.0 * np.log10(np.maximum(mel, cfg.log_floor))
    if cfg.db_ref == "max":
        db -= db.max()
    return db


def temporal_mean(matrix: np.ndarray) -> np.ndarray:
    """Per-row arithmetic mean over time frames."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] < 1:
        raise DataError("temporal_mean expects a matrix with at least one frame")
    return matrix.mean(axis=1)


def logmel_feature(signal: np.ndarray, rate: int, cfg: DspConfig | None = None) -> np.ndarray:
    """Resample + log-mel + temporal mean: the n_mels-dim clip feature."""
    cfg = cfg or DspConfig()
    if rate != cfg.target_sample_rate:
        signal = resample(signal, rate, cfg.target_sample_rate)
    return temporal_mean(log_mel(signal, cfg))


def logmel_feature_from_file(path: str | Path, cfg: DspConfig | None = None) -> np.ndarray:
    signal, rate = decode_wav(path)
    return logmel_feature(signal, rate, cfg)
