import struct

import numpy as np
import pytest
from scipy.io import wavfile

from oracles import random_table
from seldkit.core import EventAnnotation, FoaClip
from seldkit.errors import DataError, FormatError, ParseError
from seldkit.io import (
    MetadataTable, read_foa_wav, read_metadata_csv, read_tensor, write_foa_wav,
    write_metadata_csv, write_tensor,
)


def _pcm_wav(path, frames, bits, rate=24000):
    """Hand-built PCM WAV; ``frames`` is (n, channels) of integer codes."""
    n, ch = frames.shape
    width = bits // 8
    body = bytearray()
    for row in frames:
        for v in row:
            body += int(v).to_bytes(width, "little", signed=True)
    fmt = struct.pack("<HHIIHH", 1, ch, rate, rate * ch * width, ch * width, bits)
    data = b"RIFF" + struct.pack("<I", 36 + len(body)) + b"WAVE"
    data += b"fmt " + struct.pack("<I", 16) + fmt + b"data" + struct.pack("<I", len(body)) + bytes(body)
    path.write_bytes(data)


def test_read_one_second_int16(tmp_path):
    p = tmp_path / "a.wav"
    wavfile.write(p, 24000, np.zeros((24000, 4), dtype=np.int16))
    clip = read_foa_wav(p)
    assert clip.samples.shape == (4, 24000)


def test_int16_scaling(tmp_path):
    p = tmp_path / "a.wav"
    codes = np.array([[-32768, 32767, 0, 16384]] * 3, dtype=np.int16)
    wavfile.write(p, 24000, codes)
    s = read_foa_wav(p).samples
    assert s[0, 0] == -1.0
    assert s[1, 0] == 32767 / 32768
    assert s[3, 0] == 0.5


def test_int24_scaling(tmp_path):
    p = tmp_path / "a.wav"
    _pcm_wav(p, np.array([[-(2**23), 2**23 - 1, 0, 2**22]] * 5), bits=24)
    s = read_foa_wav(p).samples
    assert s[0, 0] == -1.0
    assert s[1, 0] == (2**23 - 1) / 2**23
    assert s[3, 0] == 0.5


def test_float_wav_round_trip(tmp_path, rng):
    clip = FoaClip(rng.uniform(-0.9, 0.9, size=(4, 1000)).astype(np.float32).astype(np.float64))
    write_foa_wav(tmp_path / "c.wav", clip)
    assert np.array_equal(read_foa_wav(tmp_path / "c.wav").samples, clip.samples)


@pytest.mark.parametrize("channels, rate", [(2, 24000), (4, 48000), (1, 24000)])
def test_wrong_layout_rejected(tmp_path, channels, rate):
    p = tmp_path / "bad.wav"
    wavfile.write(p, rate, np.zeros((100, channels), dtype=np.int16))
    with pytest.raises(FormatError):
        read_foa_wav(p)


def test_malformed_riff(tmp_path):
    p = tmp_path / "bad.wav"
    p.write_bytes(b"RIFX0000WAVEjunk")
    with pytest.raises(FormatError, match="bytes 0-3"):
        read_foa_wav(p)
    p.write_bytes(b"RIFF\x10\x00\x00\x00WAVEfmt ")
    with pytest.raises(FormatError):
        read_foa_wav(p)


def test_read_metadata_row(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("10,2,0,30,0,150\n")
    (row,) = read_metadata_csv(p).rows
    assert row == EventAnnotation(10, 2, 0, 30.0, 0.0, 1.5)


def test_read_empty_metadata(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("")
    assert len(read_metadata_csv(p)) == 0


@pytest.mark.parametrize("line, lineno, what", [
    ("5,13,0,0,0,100", 2, "class"),
    ("5,1,0,abc,0,100", 2, "azimuth"),
    ("5,1,0,0,0,0", 2, "distance"),
    ("5,1,0,0,0", 2, "6 fields"),
    ("5,1,0,0,120,100", 2, "elevation"),
    ("1,1,0,0,0,100", 2, "duplicate"),
])
def test_metadata_parse_errors_carry_line(tmp_path, line, lineno, what):
    p = tmp_path / "m.csv"
    p.write_text("1,1,0,0,0,100\n" + line + "\n")
    with pytest.raises(ParseError) as info:
        read_metadata_csv(p)
    assert what in str(info.value)
    if what != "duplicate":
        assert info.value.line == lineno


def test_metadata_sorted_on_read(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("3,1,0,0,0,100\n1,5,1,0,0,100\n1,5,0,10,0,100\n")
    assert [r.key for r in read_metadata_csv(p)] == [(1, 5, 0), (1, 5, 1), (3, 1, 0)]


def test_table_rejects_duplicates():
    e = EventAnnotation(1, 1, 0, 0, 0, 1.0)
    with pytest.raises(DataError):
        MetadataTable((e, e))


def test_metadata_round_trip_100_rows(tmp_path, rng):
    table = random_table(rng, n_frames=60, max_rows=400)
    while len(table) < 100:
        table = random_table(rng, n_frames=60, max_rows=400)
    table = MetadataTable(table.rows[:100])
    write_metadata_csv(table, tmp_path / "m.csv")
    assert read_metadata_csv(tmp_path / "m.csv") == table


def test_metadata_round_trip_fractional_angles(tmp_path, rng):
    table = random_table(rng, integer=False)
    write_metadata_csv(table, tmp_path / "m.csv")
    back = read_metadata_csv(tmp_path / "m.csv")
    for a, b in zip(table, back):
        assert (a.azimuth, a.elevation) == (b.azimuth, b.elevation)
        assert abs(a.distance - b.distance) <= 0.005 + 1e-12


def test_distance_rounds_to_centimetres(tmp_path):
    t = MetadataTable((EventAnnotation(0, 0, 0, 0, 0, 1.504),))
    write_metadata_csv(t, tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text() == "0,0,0,0,0,150\n"
    back = read_metadata_csv(tmp_path / "m.csv").rows[0]
    assert back.distance == 1.5
    assert abs(back.distance - 1.504) <= 0.005


def test_empty_table_writes_empty_file(tmp_path):
    write_metadata_csv(MetadataTable(), tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_bytes() == b""


def test_tensor_size_and_round_trip(tmp_path, rng):
    x = rng.normal(size=(7, 250, 64)).astype(np.float32)
    p = tmp_path / "f.tns"
    write_tensor(p, x, hop_ms=20.0, sample_rate=24000, channel_names=list("abcdefg"))
    assert p.stat().st_size == 7 * 250 * 64 * 4
    y, header = read_tensor(p)
    assert y.dtype == np.float32 and y.tobytes() == x.tobytes()
    assert header["shape"] == [7, 250, 64]
    assert header["hop_ms"] == 20.0


def test_tensor_truncated_payload(tmp_path, rng):
    p = tmp_path / "f.tns"
    write_tensor(p, rng.normal(size=(2, 3)))
    p.write_bytes(p.read_bytes()[:-4])
    with pytest.raises(FormatError, match="20 bytes"):
        read_tensor(p)


def test_tensor_missing_sidecar(tmp_path):
    p = tmp_path / "f.tns"
    p.write_bytes(b"\0" * 8)
    with pytest.raises(FormatError, match="sidecar"):
        read_tensor(p)
