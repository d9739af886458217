"""FOA feature extraction: four log-mel channels plus three intensity-vector channels."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import N_FEATURE_CHANNELS, N_MELS, SAMPLE_RATE, STFT_HOP, STFT_WINDOW, W, X, Y, Z
from .errors import DomainError, FormatError

CHANNEL_NAMES = ("logmel_W", "logmel_Y", "logmel_Z", "logmel_X", "iv_x", "iv_y", "iv_z")
FMIN = 50.0
FMAX = 12000.0
LOG_EPS = 1e-10
IV_EPS = 1e-10
STD_FLOOR = 1e-6
HOP_MS = 1000.0 * STFT_HOP / SAMPLE_RATE
N_BINS = STFT_WINDOW // 2 + 1


@dataclass(frozen=True)
class Spectrogram:
    values: np.ndarray  # complex (4, T, 513)
    win: int = STFT_WINDOW
    hop: int = STFT_HOP

    @property
    def n_frames(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class FeatureTensor:
    values: np.ndarray  # (7, T, 64)
    channel_names: tuple = CHANNEL_NAMES
    hop_ms: float = HOP_MS

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3 or v.shape[0] != N_FEATURE_CHANNELS or v.shape[2] != N_MELS:
            raise DomainError(f"feature tensor must be (7, T, 64), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("feature tensor contains non-finite values")

    @property
    def n_frames(self):
        return self.values.shape[1]

    def header(self):
        return {"sample_rate": SAMPLE_RATE, "hop_ms": self.hop_ms,
                "channel_names": list(self.channel_names)}


def hann_window(n=STFT_WINDOW):
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def n_stft_frames(n_samples, win=STFT_WINDOW, hop=STFT_HOP):
    if n_samples < win:
        return 0
    return (n_samples - win) // hop + 1


def stft(clip):
    """Hann-windowed, non-centred STFT of all four channels."""
    x = clip.samples
    n = x.shape[1]
    if n < STFT_WINDOW:
        raise DomainError(f"clip has {n} samples, shorter than one {STFT_WINDOW}-sample window")
    t = n_stft_frames(n)
    frames = np.lib.stride_tricks.sliding_window_view(x, STFT_WINDOW, axis=1)[:, ::STFT_HOP][:, :t]
    spec = np.fft.rfft(frames * hann_window(), axis=-1)
    return Spectrogram(spec)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_band_edges(n_mels=N_MELS, fmin=FMIN, fmax=FMAX):
    """The ``n_mels + 2`` triangle corner frequencies in Hz."""
    return mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))


@lru_cache(maxsize=None)
def _filterbank(n_mels, fmin, fmax):
    edges = mel_band_edges(n_mels, fmin, fmax)
    freqs = np.arange(N_BINS) * SAMPLE_RATE / STFT_WINDOW
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    sums = fb.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise AssertionError("empty mel filter; FFT resolution too coarse for fmin")
    fb = fb / sums
    fb.setflags(write=False)
    return fb


def mel_filterbank(n_mels=N_MELS, fmin=FMIN, fmax=FMAX):
    """Triangular HTK-mel filterbank of shape (n_mels, 513), each row summing to 1."""
    return _filterbank(n_mels, float(fmin), float(fmax))


def logmel(spec):
    """10*log10(mel power + 1e-10) for each channel, shape (4, T, 64)."""
    power = spec.values.real ** 2 + spec.values.imag ** 2
    mel = power @ mel_filterbank().T
    return 10.0 * np.log10(mel + LOG_EPS)


def intensity_vectors(spec):
    """Unit-normalised mel-band intensity vectors ``Re(conj(W) * (X, Y, Z))``, (3, T, 64)."""
    v = spec.values
    w_conj = np.conj(v[W])
    iv = np.stack([np.real(w_conj * v[X]), np.real(w_conj * v[Y]), np.real(w_conj * v[Z])])
    iv = iv @ mel_filterbank().T
    norm = np.sqrt(np.sum(iv * iv, axis=0, keepdims=True))
    return iv / (norm + IV_EPS)


def extract_features(clip):
    """Seven-channel (4 log-mel + 3 intensity) feature tensor for a clip."""
    spec = stft(clip)
    values = np.concatenate([logmel(spec), intensity_vectors(spec)], axis=0)
    return FeatureTensor(values.astype(np.float32))


@dataclass(frozen=True)
class FeatureStats:
    mean: np.ndarray  # (7, 64)
    std: np.ndarray  # (7, 64)

    def to_json(self):
        return json.dumps({"mean": self.mean.tolist(), "std": self.std.tolist()})

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
            mean = np.asarray(d["mean"], dtype=np.float64)
            std = np.asarray(d["std"], dtype=np.float64)
        except (ValueError, KeyError, TypeError) as exc:
            raise FormatError(f"invalid feature stats ({exc})") from None
        shape = (N_FEATURE_CHANNELS, N_MELS)
        if mean.shape != shape or std.shape != shape or np.any(~(std > 0)):
            raise FormatError("feature stats must hold (7, 64) mean and positive std")
        return cls(mean, std)


def _as_array(x):
    return np.asarray(x.values if isinstance(x, FeatureTensor) else x)


def compute_stats(tensors):
    """Per channel-mel mean and std over every frame of every tensor."""
    arrays = [_as_array(t).astype(np.float64) for t in tensors]
    if not arrays:
        raise DomainError("need at least one feature tensor to compute stats")
    stacked = np.concatenate(arrays, axis=1)
    if stacked.shape[1] == 0:
        raise DomainError("feature tensors contain no frames")
    mean = stacked.mean(axis=1)
    std = np.maximum(stacked.std(axis=1), STD_FLOOR)
    return FeatureStats(mean, std)


def standardize(tensor, stats):
    x = _as_array(tensor).astype(np.float64)
    out = (x - stats.mean[:, None, :]) / stats.std[:, None, :]
    if isinstance(tensor, FeatureTensor):
        return FeatureTensor(out, tensor.channel_names, tensor.hop_ms)
    return FeatureTensor(out)
