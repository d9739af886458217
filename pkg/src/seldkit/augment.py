"""Seedable data augmentation for FOA clips and feature tensors.

Randomness comes from numpy's PCG64 bit generator (``numpy.random.PCG64``)
seeded with a 64-bit integer, so a given ``(input, seed)`` always produces the
same output. Feature-domain masks fill with 0.0, the mean of standardised
features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import LABEL_HOP, EventAnnotation, FoaClip, W, X, Y, Z, wrap_azimuth
from .errors import DomainError
from .features import FeatureTensor
from .io import MetadataTable

SPECAUG_TIME_MASKS = 2
SPECAUG_FREQ_MASKS = 2
SPECAUG_MAX_FREQ_WIDTH = 8
CUTOUT_MAX_HEIGHT = 16
CUTOUT_MAX_WIDTH = 20
FREQ_SHIFT_MAX = 4
NOISE_SNR_RANGE = (6.0, 30.0)
MIX_WEIGHT_RANGE = (0.25, 0.75)


def make_rng(seed):
    """PCG64 generator for a non-negative 64-bit seed."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DomainError(f"seed {seed} is not an unsigned 64-bit integer")
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(seed, *keys):
    """Child seed for a sub-task, stable for a given (seed, keys)."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------- ACS


@dataclass(frozen=True)
class AcsTransform:
    """Azimuth rotation by ``k * 90`` degrees, optionally followed by an elevation flip."""

    id: int

    def __post_init__(self):
        if not 0 <= int(self.id) < 8:
            raise DomainError(f"ACS transform id {self.id} outside 0..7")

    @classmethod
    def from_parts(cls, k, flip):
        return cls(k % 4 + 4 * int(bool(flip)))

    @property
    def k(self):
        return self.id % 4

    @property
    def flip(self):
        return self.id >= 4

    def compose(self, other):
        """Transform equal to applying ``other`` first, then ``self``."""
        return AcsTransform.from_parts(self.k + other.k, self.flip != other.flip)

    def inverse(self):
        return AcsTransform.from_parts(-self.k, self.flip)


ACS_TRANSFORMS = tuple(AcsTransform(i) for i in range(8))


def acs_channels(samples, t):
    """Apply the channel swap/negation of transform ``t`` to (4, n) WYZX samples."""
    t = t if isinstance(t, AcsTransform) else AcsTransform(t)
    x, y = samples[X], samples[Y]
    if t.k == 0:
        nx, ny = x, y
    elif t.k == 1:
        nx, ny = -y, x
    elif t.k == 2:
        nx, ny = -x, -y
    else:
        nx, ny = y, -x
    out = np.empty_like(samples)
    out[W] = samples[W]
    out[X] = nx
    out[Y] = ny
    out[Z] = -samples[Z] if t.flip else samples[Z]
    return out


def acs_angles(azimuth, elevation, t):
    t = t if isinstance(t, AcsTransform) else AcsTransform(t)
    az = wrap_azimuth(azimuth + 90.0 * t.k)
    el = -elevation if t.flip else elevation
    return az, el + 0.0


def acs_table(table, t):
    rows = []
    for r in table:
        az, el = acs_angles(r.azimuth, r.elevation, t)
        rows.append(EventAnnotation(r.frame, r.class_id, r.source_id, az, el, r.distance))
    return MetadataTable(tuple(rows))


def acs_transform(clip, anns, t):
    """Rotate/flip a clip and its labels consistently. Returns ``(clip, table)``."""
    t = t if isinstance(t, AcsTransform) else AcsTransform(t)
    return FoaClip(acs_channels(clip.samples, t)), acs_table(anns, t)


# ---------------------------------------------------------------- feature masks


def _mask_values(x, fill_cells):
    v = np.array(x.values, copy=True)
    for t0, t1, f0, f1 in fill_cells:
        v[:, t0:t1, f0:f1] = 0.0
    return FeatureTensor(v, x.channel_names, x.hop_ms)


def draw_spec_augment(n_frames, n_mels, rng, max_time_width=None,
                      max_freq_width=SPECAUG_MAX_FREQ_WIDTH,
                      n_time=SPECAUG_TIME_MASKS, n_freq=SPECAUG_FREQ_MASKS):
    """Mask rectangles ``(t0, t1, f0, f1)`` for SpecAugment."""
    if max_time_width is None:
        max_time_width = n_frames // 10
    rects = []
    for _ in range(n_time):
        w = int(rng.integers(0, max_time_width + 1))
        t0 = int(rng.integers(0, n_frames - w + 1))
        rects.append((t0, t0 + w, 0, n_mels))
    for _ in range(n_freq):
        w = int(rng.integers(0, max_freq_width + 1))
        f0 = int(rng.integers(0, n_mels - w + 1))
        rects.append((0, n_frames, f0, f0 + w))
    return rects


def spec_augment(x, seed, max_time_width=None, max_freq_width=SPECAUG_MAX_FREQ_WIDTH):
    """Two time masks and two frequency masks, zeroed across all channels."""
    rects = draw_spec_augment(x.n_frames, x.values.shape[2], make_rng(seed),
                              max_time_width, max_freq_width)
    return _mask_values(x, rects)


def draw_cutout(n_frames, n_mels, rng, max_height=CUTOUT_MAX_HEIGHT, max_width=CUTOUT_MAX_WIDTH):
    """One rectangle ``(t0, t1, f0, f1)`` with uniform size and position."""
    h = int(rng.integers(0, min(max_height, n_mels) + 1))
    w = int(rng.integers(0, min(max_width, n_frames) + 1))
    f0 = int(rng.integers(0, n_mels - h + 1))
    t0 = int(rng.integers(0, n_frames - w + 1))
    return t0, t0 + w, f0, f0 + h


def random_cutout(x, seed, max_height=CUTOUT_MAX_HEIGHT, max_width=CUTOUT_MAX_WIDTH):
    rect = draw_cutout(x.n_frames, x.values.shape[2], make_rng(seed), max_height, max_width)
    return _mask_values(x, [rect])


def shift_mel(values, s):
    """Shift along the last (mel) axis by ``s`` bins, zero-filling the vacated bins."""
    out = np.zeros_like(values)
    n = values.shape[-1]
    if s >= 0:
        out[..., s:] = values[..., :n - s]
    else:
        out[..., :n + s] = values[..., -s:]
    return out


def freq_shift(x, seed=None, shift=None):
    """Shift all channels by ``shift`` mel bins, drawn from U{-4..4} when not given."""
    if shift is None:
        shift = int(make_rng(seed).integers(-FREQ_SHIFT_MAX, FREQ_SHIFT_MAX + 1))
    if abs(shift) > x.values.shape[2]:
        raise DomainError(f"shift {shift} exceeds the number of mel bins")
    return FeatureTensor(shift_mel(np.asarray(x.values), shift), x.channel_names, x.hop_ms)


# ---------------------------------------------------------------- waveform


def signal_power(samples):
    return float(np.mean(np.square(samples)))


def add_noise(clip, snr_db, seed):
    """Add white Gaussian noise to all channels at exactly ``snr_db`` over the clip."""
    lo, hi = NOISE_SNR_RANGE
    if not lo <= snr_db <= hi:
        raise DomainError(f"SNR {snr_db} dB outside [{lo}, {hi}]")
    p_sig = signal_power(clip.samples)
    if p_sig <= 0.0:
        raise DomainError("SNR is undefined for a silent clip")
    noise = make_rng(seed).standard_normal(clip.samples.shape)
    noise *= np.sqrt(p_sig / 10.0 ** (snr_db / 10.0) / signal_power(noise))
    return FoaClip(clip.samples + noise)


def random_mix(a, b, w=None, seed=None):
    """Blend ``w * a + (1 - w) * b`` and merge both annotation tables.

    ``a`` and ``b`` are ``(FoaClip, MetadataTable)`` pairs. Clips are trimmed to
    the shorter length; ``b``'s source ids are offset past ``a``'s.
    """
    (clip_a, tab_a), (clip_b, tab_b) = a, b
    if w is None:
        w = float(make_rng(seed).uniform(*MIX_WEIGHT_RANGE))
    lo, hi = MIX_WEIGHT_RANGE
    if not lo <= w <= hi:
        raise DomainError(f"mix weight {w} outside [{lo}, {hi}]")
    n = min(clip_a.n_samples, clip_b.n_samples)
    if n == 0:
        raise DomainError("cannot mix an empty clip")
    mixed = w * clip_a.samples[:, :n] + (1.0 - w) * clip_b.samples[:, :n]
    n_frames = -(-n // LABEL_HOP)
    offset = max((r.source_id for r in tab_a), default=-1) + 1
    rows = [r for r in tab_a if r.frame < n_frames]
    rows += [EventAnnotation(r.frame, r.class_id, r.source_id + offset,
                             r.azimuth, r.elevation, r.distance)
             for r in tab_b if r.frame < n_frames]
    return FoaClip(mixed), MetadataTable(tuple(rows))
