"""Constants, geometry helpers and the value types shared across seldkit.

Angles follow the DCASE convention: azimuth counter-clockwise from +x in
(-180, 180], elevation up from the horizontal plane in [-90, 90]. FOA
channels are stored in ACN order (W, Y, Z, X).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

SAMPLE_RATE = 24000
N_CLASSES = 13
N_TRACKS = 3
N_MELS = 64
N_FEATURE_CHANNELS = 7
STFT_WINDOW = 1024
STFT_HOP = 480
LABEL_HOP = 2400  # samples per 100 ms label frame
FRAMES_PER_LABEL = LABEL_HOP // STFT_HOP
SEGMENT_FRAMES = 10  # label frames per 1 s scoring segment
OUTPUT_NEURONS = N_TRACKS * N_CLASSES * 4

CHANNEL_ORDER = ("W", "Y", "Z", "X")
W, Y, Z, X = range(4)

assert OUTPUT_NEURONS == 156, OUTPUT_NEURONS
assert LABEL_HOP % STFT_HOP == 0


def check_constants():
    """Startup invariant: the output head has N*C*4 == 156 neurons."""
    if N_TRACKS * N_CLASSES * 4 != 156 or OUTPUT_NEURONS != 156:
        raise AssertionError("output head must have 156 neurons")
    if LABEL_HOP % STFT_HOP:
        raise AssertionError("label frame must be a whole number of hops")
    return OUTPUT_NEURONS


def wrap_azimuth(az):
    """Wrap degrees into (-180, 180]."""
    a = math.fmod(az, 360.0)
    if a <= -180.0:
        a += 360.0
    elif a > 180.0:
        a -= 360.0
    return a + 0.0


def _check_angles(az, el):
    if not (math.isfinite(az) and math.isfinite(el)):
        raise DomainError(f"non-finite angle ({az}, {el})")
    if not -180.0 < az <= 180.0:
        raise DomainError(f"azimuth {az} outside (-180, 180]")
    if not -90.0 <= el <= 90.0:
        raise DomainError(f"elevation {el} outside [-90, 90]")


def sph_to_cart(azimuth, elevation):
    """Unit DOA vector ``(x, y, z)`` for an azimuth/elevation pair in degrees."""
    _check_angles(azimuth, elevation)
    az = math.radians(azimuth)
    el = math.radians(elevation)
    cos_el = math.cos(el)
    return np.array([cos_el * math.cos(az), cos_el * math.sin(az), math.sin(el)])


def sph_to_cart_array(azimuth, elevation):
    """Vectorised :func:`sph_to_cart` without range checks; returns (..., 3)."""
    az = np.radians(np.asarray(azimuth, dtype=np.float64))
    el = np.radians(np.asarray(elevation, dtype=np.float64))
    return np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1)


def cart_to_sph(v):
    """Azimuth and elevation in degrees of a non-zero vector.

    Pole vectors get azimuth 0.
    """
    x, y, z = (float(c) for c in np.asarray(v, dtype=np.float64).reshape(3))
    norm = math.sqrt(x * x + y * y + z * z)
    if not norm > 0.0 or not math.isfinite(norm):
        raise DomainError("cannot convert a zero or non-finite vector to angles")
    horiz = math.hypot(x, y)
    el = math.degrees(math.atan2(z, horiz))
    if horiz <= 1e-12 * norm:
        return 0.0, el
    az = math.degrees(math.atan2(y, x))
    if az <= -180.0:
        az = 180.0
    return az + 0.0, el + 0.0


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if not n > 0.0:
        raise DomainError("zero vector has no direction")
    return v / n


def angular_distance(u, v):
    """Great-circle angle in degrees between two non-zero vectors.

    Evaluated as ``atan2(|u x v|, u . v)``, which equals
    ``arccos(clamp(u_hat . v_hat))`` but keeps full precision near 0 and 180.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    if np.any(~(nu > 0)) or np.any(~(nv > 0)):
        raise DomainError("angular distance undefined for a zero vector")
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    dot = np.sum(u * v, axis=-1)
    out = np.degrees(np.arctan2(cross, dot))
    return float(out) if np.ndim(out) == 0 else out


def angular_distance_matrix(a, b):
    """Pairwise angles (degrees) between rows of ``a`` (m, 3) and ``b`` (n, 3)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    return np.asarray(angular_distance(a[:, None, :], b[None, :, :])).reshape(len(a), len(b))


@dataclass(frozen=True)
class FoaClip:
    """Four-channel first-order ambisonics audio, channels in WYZX order."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    channel_order: tuple = CHANNEL_ORDER

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] != 4:
            raise DomainError(f"FOA clip needs shape (4, n), got {s.shape}")
        if self.sample_rate != SAMPLE_RATE:
            raise DomainError(f"sample rate must be {SAMPLE_RATE}, got {self.sample_rate}")
        if tuple(self.channel_order) != CHANNEL_ORDER:
            raise DomainError(f"unsupported channel order {self.channel_order}")
        if not np.all(np.isfinite(s)):
            raise DomainError("FOA clip contains non-finite samples")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n_samples(self):
        return self.samples.shape[1]

    @property
    def duration(self):
        return self.n_samples / self.sample_rate

    @property
    def n_label_frames(self):
        """Label frames overlapping the clip (a trailing partial frame counts)."""
        return -(-self.n_samples // LABEL_HOP)


@dataclass(frozen=True)
class EventAnnotation:
    """One labelled event frame. Distance is held in metres."""

    frame: int
    class_id: int
    source_id: int
    azimuth: float
    elevation: float
    distance: float

    def __post_init__(self):
        if self.frame < 0:
            raise DomainError(f"negative frame index {self.frame}")
        if not 0 <= self.class_id < N_CLASSES:
            raise DomainError(f"class id {self.class_id} outside 0..{N_CLASSES - 1}")
        az = float(self.azimuth)
        if az == -180.0:
            # same direction as +180; keep the half-open range canonical
            az = 180.0
        _check_angles(az, float(self.elevation))
        if not (math.isfinite(self.distance) and self.distance > 0):
            raise DomainError(f"distance must be > 0, got {self.distance}")
        object.__setattr__(self, "azimuth", az + 0.0)
        object.__setattr__(self, "elevation", float(self.elevation) + 0.0)
        object.__setattr__(self, "distance", float(self.distance))

    @property
    def key(self):
        return (self.frame, self.class_id, self.source_id)

    def doa(self):
        return sph_to_cart(self.azimuth, self.elevation)

    def values(self):
        return (self.frame, self.class_id, self.source_id,
                self.azimuth, self.elevation, self.distance)
