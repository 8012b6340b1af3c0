"""Property tests for invariants that cut across inputs of arbitrary shape."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from vidsent.features import pair_features, single_track_features
from vidsent.ingest import cap_per_frame, otsu_bipartition, project_forward, stream_from_frames
from vidsent.nlg.words import sector, screen_vector_angle
from vidsent.roc import roc_curve
from vidsent.tracker import CoherenceParams, Track, extract_tracks, smooth_track

from .conftest import det
from .test_features import track
from .test_ingest import exhaustive_otsu
from .test_roc import mann_whitney

coord = st.floats(-500, 500, allow_nan=False)
box_st = st.tuples(coord, coord, st.floats(1, 80), st.floats(1, 80)).map(
    lambda t: (t[0], t[1], t[0] + t[2], t[1] + t[3]))
score = st.floats(-3, 3, allow_nan=False)


@st.composite
def streams(draw, max_frames=6, max_cands=5):
    n = draw(st.integers(1, max_frames))
    frames = []
    for t in range(n):
        k = draw(st.integers(1, max_cands))
        frames.append([det(t, draw(score), draw(box_st), model="car",
                           flow=(draw(st.floats(-5, 5)), draw(st.floats(-5, 5))))
                       for _ in range(k)])
    return stream_from_frames("p", frames)


@given(st.lists(st.integers(0, 30), min_size=50, max_size=50).filter(
    lambda h: sum(1 for x in h if x) >= 2))
def test_otsu_matches_scan(hist):
    edges = np.linspace(-2.0, 3.0, 51)
    assert otsu_bipartition(np.array(hist, float), edges) == exhaustive_otsu(hist, edges)


@given(st.lists(st.integers(0, 4), min_size=1, max_size=25), st.integers(1, 15))
def test_cap_keeps_the_best(scores, k):
    frame = [det(0, float(s), (0, 0, 5, 5)) for s in scores]
    kept = cap_per_frame(stream_from_frames("v", [frame]), k).per_frame[0]
    assert len(kept) == min(k, len(frame))
    dropped = [d for d in frame if d not in kept]
    if dropped:
        assert max(d.score for d in dropped) <= min(d.score for d in kept)


@settings(max_examples=50)
@given(streams(), st.integers(1, 5))
def test_projection_copy_bound(stream, horizon):
    out = project_forward(stream, horizon, cap=None)
    originals = {d.uid for f in stream.per_frame for d in f}
    copies = [d for f in out.per_frame for d in f if d.projected]
    assert all(d.source in originals for d in copies)
    per_source = {}
    for d in copies:
        per_source[d.source] = per_source.get(d.source, 0) + 1
    assert all(v <= horizon for v in per_source.values())


@settings(max_examples=50)
@given(streams(), st.floats(0, 3))
def test_extracted_tracks_are_disjoint(stream, lam):
    tracks = extract_tracks(stream, "car", CoherenceParams(lam=lam, min_track_score=-10))
    uids = [d.uid for t in tracks for d in t.detections]
    assert len(uids) == len(set(uids))
    for t in tracks:
        assert [d.frame for d in t.detections] == list(range(t.t0, t.t1 + 1))


@given(st.lists(box_st, min_size=1, max_size=12), st.sampled_from([1, 3, 5, 7]))
def test_smoothing_keeps_boxes_valid(boxes, window):
    dets = [det(i, 0.0, b, model="car") for i, b in enumerate(boxes)]
    out = smooth_track(Track("v", "car", 0, dets, 0.0), window)
    b = out.boxes
    assert np.all(b[:, 0] < b[:, 2]) and np.all(b[:, 1] < b[:, 3])


centers = st.lists(st.tuples(coord, coord), min_size=2, max_size=10)


@given(centers, st.tuples(coord, coord))
def test_translation_invariance(path, shift):
    n = len(path)
    moved = [(x + shift[0], y + shift[1]) for x, y in path]
    still = [(0.0, 0.0)] * n
    still_moved = [shift] * n
    a = pair_features(track(path, tid="a"), track(still, tid="b"))
    b = pair_features(track(moved, tid="a"), track(still_moved, tid="b"))
    np.testing.assert_allclose(a.values[:, :2], b.values[:, :2], atol=1e-6)
    da = np.angle(np.exp(1j * (a.values[:, 2] - b.values[:, 2])))
    assert np.all(np.abs(da[a.values[:, 0] > 1e-3]) < 1e-6)
    s1 = single_track_features(track(path))
    s2 = single_track_features(track(moved))
    for name in ("speed", "accel"):
        np.testing.assert_allclose(s1.column(name), s2.column(name), atol=1e-6)


@given(centers)
def test_angles_in_half_open_range(path):
    s = single_track_features(track(path))
    for f, col in zip(s.schema.features, s.values.T):
        if f.kind == "angular":
            assert np.all(col > -math.pi) and np.all(col <= math.pi)


@given(st.floats(-1000, 1000), st.floats(-1000, 1000))
def test_sector_in_range(dx, dy):
    assert 0 <= sector(screen_vector_angle(dx, dy)) < 8


@given(st.lists(st.tuples(st.integers(0, 6), st.booleans()), min_size=2, max_size=40).filter(
    lambda xs: len({y for _, y in xs}) == 2))
def test_auc_is_rank_statistic(pairs):
    s = [float(a) for a, _ in pairs]
    y = [b for _, b in pairs]
    assert abs(roc_curve(s, y).auc - mann_whitney(s, y)) <= 1e-9
