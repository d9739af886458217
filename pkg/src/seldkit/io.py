"""Readers and writers for FOA WAV audio, DCASE metadata CSVs and tensor files.

All readers are strict: malformed input raises :class:`FormatError` (or
:class:`ParseError` with a line number) instead of being repaired.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .core import SAMPLE_RATE, EventAnnotation, FoaClip
from .errors import DataError, DomainError, FormatError, ParseError


def atomic_write_bytes(path, data):
    """Write ``data`` to a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------- audio


def _check_riff_header(path, head):
    if len(head) < 12:
        raise FormatError(f"{path}: file is {len(head)} bytes, too short for a RIFF header")
    if head[:4] != b"RIFF":
        raise FormatError(f"{path}: bytes 0-3 are {head[:4]!r}, expected b'RIFF'")
    if head[8:12] != b"WAVE":
        raise FormatError(f"{path}: bytes 8-11 are {head[8:12]!r}, expected b'WAVE'")


def read_foa_wav(path):
    """Read a 4-channel 24 kHz WAV file into a :class:`FoaClip`.

    16/24/32-bit PCM is scaled so that the most negative code maps to -1.0;
    float WAVs are passed through. No resampling is ever performed.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(12)
    _check_riff_header(path, head)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", wavfile.WavFileWarning)
            rate, data = wavfile.read(path, mmap=False)
    except (ValueError, EOFError, struct.error, wavfile.WavFileWarning) as exc:
        raise FormatError(f"{path}: malformed WAV ({exc})") from exc
    if rate != SAMPLE_RATE:
        raise FormatError(f"{path}: sample rate {rate} Hz, expected {SAMPLE_RATE} Hz")
    if data.ndim != 2 or data.shape[1] != 4:
        n_ch = 1 if data.ndim == 1 else data.shape[1]
        raise FormatError(f"{path}: {n_ch} channel(s), expected 4 (FOA)")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        # scipy left-justifies 24-bit PCM into int32
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported sample type {data.dtype}")
    if not np.all(np.isfinite(samples)):
        raise FormatError(f"{path}: non-finite samples")
    return FoaClip(np.ascontiguousarray(samples.T))


def write_foa_wav(path, clip, subtype="float32"):
    """Write a clip as 32-bit float (default) or 16-bit PCM WAV."""
    x = clip.samples.T
    if subtype == "float32":
        data = x.astype(np.float32)
    elif subtype == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unknown WAV subtype {subtype!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        wavfile.write(tmp, clip.sample_rate, data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- metadata


@dataclass(frozen=True)
class MetadataTable:
    """Ordered event annotations, sorted by (frame, class, source), keys unique."""

    rows: tuple = ()

    def __post_init__(self):
        rows = tuple(sorted(self.rows, key=lambda r: r.key))
        for prev, cur in zip(rows, rows[1:]):
            if prev.key == cur.key:
                raise DataError(f"duplicate (frame, class, source) key {cur.key}")
        object.__setattr__(self, "rows", rows)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def n_frames(self):
        """One past the last annotated frame (0 for an empty table)."""
        return self.rows[-1].frame + 1 if self.rows else 0

    def truncate(self, n_frames):
        return MetadataTable(tuple(r for r in self.rows if r.frame < n_frames))


def _parse_number(text, what, path, lineno, integer=False):
    text = text.strip()
    try:
        if integer:
            return int(text)
        value = float(text)
    except ValueError:
        raise ParseError(f"{what} field {text!r} is not {'an integer' if integer else 'a number'}",
                         path, lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"{what} field {text!r} is not finite", path, lineno)
    return value


def parse_metadata_lines(lines, path=None):
    rows = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 6:
            raise ParseError(f"expected 6 fields (frame,class,source,azimuth,elevation,distance), "
                             f"got {len(fields)}", path, lineno)
        frame = _parse_number(fields[0], "frame", path, lineno, integer=True)
        cls = _parse_number(fields[1], "class", path, lineno, integer=True)
        src = _parse_number(fields[2], "source", path, lineno, integer=True)
        az = _parse_number(fields[3], "azimuth", path, lineno)
        el = _parse_number(fields[4], "elevation", path, lineno)
        dist_cm = _parse_number(fields[5], "distance", path, lineno)
        if not 0 <= cls < 13:
            raise ParseError(f"class {cls} out of range 0..12", path, lineno)
        if dist_cm <= 0:
            raise ParseError(f"distance {dist_cm} cm must be positive", path, lineno)
        try:
            rows.append(EventAnnotation(frame, cls, src, az, el, dist_cm / 100.0))
        except DomainError as exc:
            raise ParseError(str(exc), path, lineno) from None
    try:
        return MetadataTable(tuple(rows))
    except DataError as exc:
        raise ParseError(str(exc), path) from None


def read_metadata_csv(path):
    """Parse a DCASE ``frame,class,source,azimuth,elevation,distance_cm`` file."""
    with open(path, encoding="utf-8") as fh:
        return parse_metadata_lines(fh, path=str(path))


def _fmt_angle(a):
    if float(a).is_integer():
        return str(int(a))
    return repr(float(a))


def format_metadata(table):
    out = []
    for r in table:
        cm = max(1, int(round(r.distance * 100.0)))
        out.append(f"{r.frame},{r.class_id},{r.source_id},"
                   f"{_fmt_angle(r.azimuth)},{_fmt_angle(r.elevation)},{cm}\n")
    return "".join(out)


def write_metadata_csv(table, path):
    """Write a table; distances are rounded to whole centimetres (minimum 1)."""
    atomic_write_text(path, format_metadata(table))


# ---------------------------------------------------------------- tensors


def sidecar_path(path):
    return Path(str(path) + ".json")


def write_tensor(path, values, **header):
    """Write ``values`` as little-endian float32 payload plus a JSON sidecar.

    Extra keyword arguments (``sample_rate``, ``hop_ms``, ``channel_names``...)
    are stored in the sidecar next to ``shape`` and ``dtype``.
    """
    arr = np.asarray(values)
    if not np.all(np.isfinite(arr)):
        raise DomainError("tensor contains non-finite values")
    payload = np.ascontiguousarray(arr, dtype="<f4")
    meta = {"shape": list(payload.shape), "dtype": "<f4"}
    meta.update(header)
    atomic_write_bytes(path, payload.tobytes())
    atomic_write_text(sidecar_path(path), json.dumps(meta, indent=1) + "\n")


def read_tensor(path):
    """Return ``(array, header)`` for a ``.tns`` file and its sidecar."""
    side = sidecar_path(path)
    try:
        header = json.loads(Path(side).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FormatError(f"{path}: missing sidecar {side}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{side}: invalid JSON ({exc})") from None
    shape = header.get("shape")
    if not isinstance(shape, list) or not all(isinstance(s, int) and s >= 0 for s in shape):
        raise FormatError(f"{side}: 'shape' must be a list of non-negative integers")
    if header.get("dtype", "<f4") != "<f4":
        raise FormatError(f"{side}: unsupported dtype {header.get('dtype')!r}")
    raw = Path(path).read_bytes()
    expected = 4 * int(np.prod(shape, dtype=np.int64))
    if len(raw) != expected:
        raise FormatError(f"{path}: payload is {len(raw)} bytes, header shape {shape} "
                          f"needs {expected}")
    arr = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float32)
    return arr, header
