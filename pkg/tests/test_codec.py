from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import random_table
from seldkit.codec import (
    ActiveEventSet, active_sets_to_tensor, annotations_to_active_sets, decode_predictions,
    events_to_metadata,
)
from seldkit.core import EventAnnotation, angular_distance, cart_to_sph, sph_to_cart
from seldkit.errors import DataError
from seldkit.io import MetadataTable


def _table(*rows):
    return MetadataTable(tuple(EventAnnotation(*r) for r in rows))


def _tensor(n_frames=1):
    return np.zeros((3, 13, 4, n_frames))


def test_single_row_to_active_set():
    sets = annotations_to_active_sets(_table((10, 2, 0, 30, 0, 1.5)), 20)
    (doa, dist), = sets.events(2, 10)
    np.testing.assert_allclose(doa, [np.cos(np.radians(30)), np.sin(np.radians(30)), 0], atol=1e-15)
    assert dist == 1.5
    assert sets.count.sum() == 1


def test_empty_and_frames_dropped():
    assert annotations_to_active_sets(MetadataTable(), 5).count.sum() == 0
    sets = annotations_to_active_sets(_table((10, 2, 0, 30, 0, 1.5)), 10)
    assert sets.count.sum() == 0


def test_overlapping_sources_same_class():
    sets = annotations_to_active_sets(_table((3, 4, 0, 30, 0, 1.0), (3, 4, 7, -60, 0, 2.0)), 5)
    assert sets.count[4, 3] == 2 and len(sets.events(4, 3)) == 2


def test_too_many_sources():
    rows = [(0, 1, s, 30 * s, 0, 1.0) for s in range(4)]
    with pytest.raises(DataError):
        annotations_to_active_sets(_table(*rows), 1)


def test_decode_threshold():
    p = _tensor()
    p[0, 3, :, 0] = (0.9, 0, 0, 1.2)
    p[1, 4, :, 0] = (0.3, 0, 0, 1.0)
    (ev,) = decode_predictions(p).frames[0]
    assert ev.class_id == 3 and ev.distance == pytest.approx(1.2)
    np.testing.assert_allclose(ev.doa, [1, 0, 0])
    assert ev.activity == pytest.approx(0.9)


def test_decode_merges_close_tracks():
    p = _tensor()
    p[0, 5, :3, 0] = 0.8 * sph_to_cart(0, 0)
    p[1, 5, :3, 0] = 0.9 * sph_to_cart(10, 0)
    p[0, 5, 3, 0], p[1, 5, 3, 0] = 1.0, 2.0
    (ev,) = decode_predictions(p).frames[0]
    # the normalised mean of two unit vectors bisects them
    np.testing.assert_allclose(ev.doa, [np.cos(np.radians(5)), np.sin(np.radians(5)), 0], atol=1e-12)
    assert ev.distance == 1.5 and ev.activity == pytest.approx(0.9)


def test_decode_keeps_separate_tracks():
    p = _tensor()
    p[0, 5, :3, 0] = sph_to_cart(0, 0)
    p[1, 5, :3, 0] = sph_to_cart(40, 0)
    assert len(decode_predictions(p).frames[0]) == 2


def test_decode_chain_is_covered_with_two_events():
    p = _tensor()
    for n, az in enumerate((0, 10, 20)):
        p[n, 1, :3, 0] = sph_to_cart(az, 0)
    evs = decode_predictions(p).frames[0]
    assert len(evs) == 2
    # dropping the middle track keeps two events
    p[1, 1, :3, 0] *= 0.1
    assert len(decode_predictions(p).frames[0]) == 2


def test_negative_distance_clamped():
    p = _tensor()
    p[0, 0, :, 0] = (0, 0, 1, -0.4)
    (ev,) = decode_predictions(p).frames[0]
    assert ev.distance == 0.0
    (row,) = events_to_metadata(decode_predictions(p)).rows
    assert row.azimuth == 0.0 and row.elevation == 90.0 and row.distance == 0.01


def test_events_to_metadata_empty():
    assert len(events_to_metadata(decode_predictions(_tensor(4)))) == 0


def _well_separated(table, radius=15.0):
    groups = defaultdict(list)
    for r in table:
        groups[(r.frame, r.class_id)].append(r.doa())
    for doas in groups.values():
        for i in range(len(doas)):
            for j in range(i + 1, len(doas)):
                if angular_distance(doas[i], doas[j]) <= radius:
                    return False
    return True


def _canonical(table):
    out = defaultdict(list)
    for r in table:
        out[(r.frame, r.class_id)].append((r.azimuth, r.elevation, r.distance))
    return {k: sorted(v) for k, v in out.items()}


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), integer=st.booleans())
def test_encode_decode_round_trip(seed, integer):
    rng = np.random.default_rng(seed)
    table = random_table(rng, n_frames=20, integer=integer)
    if not _well_separated(table):
        return
    sets = annotations_to_active_sets(table, 20)
    back = events_to_metadata(decode_predictions(active_sets_to_tensor(sets)))
    a, b = _canonical(table), _canonical(back)
    assert a.keys() == b.keys()
    for k in a:
        assert len(a[k]) == len(b[k])
        for (az, el, d), (az2, el2, d2) in zip(a[k], b[k]):
            assert angular_distance(sph_to_cart(az, el), sph_to_cart(az2, el2)) <= 0.5
            assert abs(d - d2) <= 0.005


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lo=st.floats(0.0, 1.5), gap=st.floats(0.0, 1.0))
def test_threshold_monotone(seed, lo, gap):
    rng = np.random.default_rng(seed)
    p = rng.normal(scale=0.7, size=(3, 13, 4, 6))
    # make same-class tracks point close together so merging is exercised
    p[1, :, :3] = p[0, :, :3] + rng.normal(scale=0.1, size=p[0, :, :3].shape)
    low = decode_predictions(p, lo)
    high = decode_predictions(p, lo + gap)
    for fl, fh in zip(low.frames, high.frames):
        for c in range(13):
            assert sum(e.class_id == c for e in fh) <= sum(e.class_id == c for e in fl)


def test_active_set_from_lists_round_trip():
    doa = sph_to_cart(20, 5)
    sets = ActiveEventSet.from_lists([[[(doa, 2.0)], []]])
    assert sets.count.tolist() == [[1, 0]]
    assert cart_to_sph(sets.events(0, 0)[0][0]) == pytest.approx((20, 5))
