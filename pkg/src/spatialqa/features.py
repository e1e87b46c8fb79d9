"""Stereo spatial front end: STFT, log-mel power and IPD features.

The output tensor stacks four ``T x M`` planes::

    [log-mel(left); log-mel(right); cos(IPD) @ melW.T; sin(IPD) @ melW.T]
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.io import wavfile

from .errors import BitDepthError, ChannelCountError, DimensionError, ValidationError, WavFormatError


@dataclass(frozen=True)
class FrontendConfig:
    sample_rate_hz: int = 24000
    win_len: int = 1024
    hop_len: int = 480
    nfft: int = 1024
    n_mels: int = 64
    log_floor: float = 1e-10
    fmin_hz: float = 0.0
    fmax_hz: float | None = None


@dataclass
class StereoClip:
    samples_left: np.ndarray
    samples_right: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        self.samples_left = np.asarray(self.samples_left, dtype=np.float64)
        self.samples_right = np.asarray(self.samples_right, dtype=np.float64)
        if self.samples_left.ndim != 1 or self.samples_right.ndim != 1:
            raise DimensionError("stereo channels must be 1-D sample sequences")
        if self.samples_left.shape != self.samples_right.shape:
            raise DimensionError(
                f"channel lengths differ: {self.samples_left.size} vs {self.samples_right.size}"
            )
        if int(self.sample_rate_hz) <= 0:
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if not (np.all(np.isfinite(self.samples_left)) and np.all(np.isfinite(self.samples_right))):
            raise ValidationError("non-finite sample values")

    def __len__(self) -> int:
        return self.samples_left.size

    def swapped(self) -> StereoClip:
        return StereoClip(self.samples_right, self.samples_left, self.sample_rate_hz)


@dataclass
class ComplexSpectrogram:
    frames: np.ndarray  # T x F complex
    hop_s: float

    @property
    def freq_bins(self) -> int:
        return self.frames.shape[1]

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


@dataclass
class FeatureTensor:
    data: np.ndarray  # 4 x T x M
    mel_row_sums: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 3 or self.data.shape[0] != 4:
            raise DimensionError(f"feature tensor must be 4 x T x M, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("feature tensor contains non-finite values")

    @property
    def num_frames(self) -> int:
        return self.data.shape[1]

    @property
    def n_mels(self) -> int:
        return self.data.shape[2]


_INT_SCALE = {np.dtype(np.int16): 32768.0, np.dtype(np.int32): 2147483648.0}


def load_stereo_wav(path: str | os.PathLike) -> StereoClip:
    """Read a 2-channel PCM WAV (16/24/32-bit int or 32-bit float) into [-1, 1].

    Integer samples are divided by the full-scale magnitude (2**15 for 16-bit,
    2**31 for 24/32-bit, which scipy left-justifies into int32).
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise WavFormatError(f"{path}: not a readable WAV file ({exc})") from exc
    channels = 1 if data.ndim == 1 else data.shape[1]
    if channels != 2:
        raise ChannelCountError(f"expected 2 channels, got {channels}")
    if data.dtype in _INT_SCALE:
        samples = data.astype(np.float64) / _INT_SCALE[data.dtype]
    elif data.dtype == np.float32:
        samples = np.clip(data.astype(np.float64), -1.0, 1.0)
    else:
        raise BitDepthError(f"unsupported sample format {data.dtype} ({8 * data.dtype.itemsize}-bit)")
    return StereoClip(samples[:, 0], samples[:, 1], int(rate))


def write_stereo_wav(path: str | os.PathLike, clip: StereoClip) -> None:
    """Write ``clip`` as 16-bit PCM. Used by scripts and fixtures."""
    stacked = np.stack([clip.samples_left, clip.samples_right], axis=1)
    pcm = np.clip(np.round(stacked * 32768.0), -32768, 32767).astype(np.int16)
    wavfile.write(os.fspath(path), clip.sample_rate_hz, pcm)


def hann_window(n: int) -> np.ndarray:
    # periodic form, as used for spectral analysis
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft(channel, sample_rate_hz: int, win_len: int, hop_len: int, nfft: int, window: str = "hann") -> ComplexSpectrogram:
    x = np.asarray(channel, dtype=np.float64)
    if hop_len < 1:
        raise ValidationError("hop length must be >= 1")
    if win_len > nfft:
        raise ValidationError(f"window ({win_len}) longer than nfft ({nfft})")
    if x.size < win_len:
        raise ValidationError(f"signal of {x.size} samples is shorter than one window ({win_len})")
    if window == "hann":
        w = hann_window(win_len)
    elif window in ("rect", "boxcar"):
        w = np.ones(win_len)
    else:
        raise ValidationError(f"unknown window {window!r}")

    n_frames = 1 + (x.size - win_len) // hop_len
    idx = np.arange(win_len)[None, :] + hop_len * np.arange(n_frames)[:, None]
    frames = np.fft.rfft(x[idx] * w, n=nfft, axis=1)
    return ComplexSpectrogram(frames=frames, hop_s=hop_len / sample_rate_hz)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate_hz: int, nfft: int, n_mels: int, fmin_hz: float = 0.0, fmax_hz: float | None = None) -> np.ndarray:
    """Triangular HTK-scale filterbank, ``n_mels x (nfft // 2 + 1)``, peak height 1."""
    fmax_hz = sample_rate_hz / 2.0 if fmax_hz is None else fmax_hz
    bin_hz = np.arange(nfft // 2 + 1) * sample_rate_hz / nfft
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2))
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_hz[None, :] - lo) / (mid - lo)
    falling = (hi - bin_hz[None, :]) / (hi - mid)
    melW = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(melW.sum(axis=1) <= 0)
    if empty.size:
        raise ValidationError(
            f"mel filters {empty.tolist()} cover no FFT bin; use fewer mels or a larger nfft"
        )
    return melW


def mel_power(spec: ComplexSpectrogram, melW: np.ndarray, log_floor: float = 1e-10) -> np.ndarray:
    melW = np.asarray(melW, dtype=np.float64)
    if melW.ndim != 2 or melW.shape[1] != spec.freq_bins:
        raise DimensionError(f"melW shape {melW.shape} incompatible with {spec.freq_bins} frequency bins")
    if log_floor <= 0:
        raise ValidationError("log_floor must be positive")
    power = np.abs(spec.frames) ** 2
    return np.log(power @ melW.T + log_floor)


def wrap_phase(phi):
    """Wrap angles to the half-open interval (-pi, pi]."""
    phi = np.asarray(phi, dtype=np.float64)
    # odd-symmetric and exact for values already in range
    out = phi - 2.0 * np.pi * np.round(phi / (2.0 * np.pi))
    return np.where(out <= -np.pi, out + 2.0 * np.pi, out)


def ipd(spec_left: ComplexSpectrogram, spec_right: ComplexSpectrogram) -> np.ndarray:
    L, R = spec_left.frames, spec_right.frames
    if L.shape != R.shape:
        raise DimensionError(f"spectrogram shapes differ: {L.shape} vs {R.shape}")
    phase = wrap_phase(np.angle(L) - np.angle(R))
    return np.where((np.abs(L) == 0) | (np.abs(R) == 0), 0.0, phase)


def assemble_features(S1, S2, ipd_grid, melW) -> FeatureTensor:
    S1, S2 = np.asarray(S1, dtype=np.float64), np.asarray(S2, dtype=np.float64)
    ipd_grid, melW = np.asarray(ipd_grid, dtype=np.float64), np.asarray(melW, dtype=np.float64)
    if S1.shape != S2.shape or S1.ndim != 2:
        raise DimensionError(f"S1/S2 shapes differ or are not 2-D: {S1.shape} vs {S2.shape}")
    T, M = S1.shape
    if melW.shape[0] != M or ipd_grid.shape != (T, melW.shape[1]):
        raise DimensionError(
            f"inconsistent dims: S {S1.shape}, ipd {ipd_grid.shape}, melW {melW.shape}"
        )
    cos_ch = np.cos(ipd_grid) @ melW.T
    sin_ch = np.sin(ipd_grid) @ melW.T
    return FeatureTensor(np.stack([S1, S2, cos_ch, sin_ch]), mel_row_sums=melW.sum(axis=1))


def extract_features(clip: StereoClip, cfg: FrontendConfig = FrontendConfig()) -> FeatureTensor:
    if clip.sample_rate_hz != cfg.sample_rate_hz:
        raise ValidationError(
            f"sample rate {clip.sample_rate_hz} Hz does not match configured {cfg.sample_rate_hz} Hz"
        )
    melW = mel_filterbank(cfg.sample_rate_hz, cfg.nfft, cfg.n_mels, cfg.fmin_hz, cfg.fmax_hz)
    left = stft(clip.samples_left, cfg.sample_rate_hz, cfg.win_len, cfg.hop_len, cfg.nfft)
    right = stft(clip.samples_right, cfg.sample_rate_hz, cfg.win_len, cfg.hop_len, cfg.nfft)
    return assemble_features(
        mel_power(left, melW, cfg.log_floor),
        mel_power(right, melW, cfg.log_floor),
        ipd(left, right),
        melW,
    )
