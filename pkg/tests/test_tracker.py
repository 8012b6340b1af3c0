import itertools
import math

import numpy as np
import pytest
from scipy.signal import find_peaks

from vidsent.ingest import stream_from_frames
from vidsent.tracker import (CoherenceParams, GapError, NoTrackError, Track, best_track,
                             coherence, extract_tracks, objective, prune_tracks,
                             smooth_track, smoothed_density)

from .conftest import det, random_stream


def brute_force(stream, model, lam):
    per = [[d for d in f if d.model == model] for f in stream.per_frame]
    best, best_sel = -math.inf, None
    for sel in itertools.product(*per):
        v = sum(d.score for d in sel) + lam * sum(coherence(a, b) for a, b in zip(sel, sel[1:]))
        if v > best:
            best, best_sel = v, sel
    return best_sel, best


def test_single_frame_argmax():
    s = stream_from_frames("v", [[det(0, 0.2, (0, 0, 5, 5), model="car"),
                                  det(0, 0.9, (9, 0, 15, 5), model="car")]])
    tr = best_track(s, "car")
    assert tr.detections[0].score == 0.9 and tr.total_score == 0.9


def test_lambda_zero_is_independent_argmax(rng):
    s = random_stream(rng, 5, 4)
    tr = best_track(s, "car", CoherenceParams(lam=0.0))
    for d, f in zip(tr.detections, s.per_frame):
        assert d.score == max(c.score for c in f)


def test_matches_enumeration(rng):
    for _ in range(200):
        s = random_stream(rng, int(rng.integers(1, 7)), 4)
        lam = float(rng.uniform(0, 3))
        tr = best_track(s, "car", CoherenceParams(lam=lam))
        sel, val = brute_force(s, "car", lam)
        assert [d.uid for d in tr.detections] == [d.uid for d in sel]
        assert tr.total_score == pytest.approx(val, rel=1e-12)


def test_lambda_monotone_coherence(rng):
    for _ in range(50):
        s = random_stream(rng, 5, 4)
        prev = -1.0
        for lam in (0.0, 0.3, 1.0, 3.0, 10.0):
            tr = best_track(s, "car", CoherenceParams(lam=lam))
            _, c = objective(tr.detections, lam)
            assert c >= prev - 1e-12
            prev = c


def test_no_candidates_and_gap_errors():
    s = stream_from_frames("v", [[det(0, 1.0, (0, 0, 5, 5), model="car")], [],
                                 [det(2, 1.0, (0, 0, 5, 5), model="car")]])
    with pytest.raises(NoTrackError):
        best_track(s, "dog")
    with pytest.raises(GapError):
        best_track(s, "car")


def test_span_is_first_to_last_frame():
    s = stream_from_frames("v", [[], [det(1, 1.0, (0, 0, 5, 5), model="car")],
                                 [det(2, 1.0, (0, 0, 5, 5), model="car")], []])
    tr = best_track(s, "car")
    assert (tr.t0, tr.t1) == (1, 2)


def two_objects_stream(rng, n=20):
    frames = []
    for t in range(n):
        a = (10 + 2 * t, 10, 30 + 2 * t, 40)
        b = (200 - 2 * t, 100, 220 - 2 * t, 130)
        f = [det(t, 1.0 + rng.normal(0, 0.05), a, model="car", flow=(2.0, 0.0)),
             det(t, 1.0 + rng.normal(0, 0.05), b, model="car", flow=(-2.0, 0.0))]
        for _ in range(2):
            x, y = rng.uniform(0, 300, size=2)
            f.append(det(t, -1.0 + rng.normal(0, 0.1), (x, y, x + 15, y + 15), model="car"))
        rng.shuffle(f)
        frames.append(f)
    return stream_from_frames("v", frames)


def test_extract_two_objects(rng):
    s = two_objects_stream(rng)
    tracks = extract_tracks(s, "car", CoherenceParams(lam=1.0, min_track_score=0.5))
    assert len(tracks) == 2
    ys = sorted(round(float(np.mean(t.boxes[:, 1]))) for t in tracks)
    assert ys == [10, 100]
    for tr in tracks:
        assert np.ptp(tr.boxes[:, 1]) == 0  # never jumped to the other object
    uids = [d.uid for tr in tracks for d in tr.detections]
    assert len(uids) == len(set(uids))
    assert [t.track_id for t in tracks] == ["car:0", "car:1"]


def test_extract_first_track_always_returned():
    s = stream_from_frames("v", [[det(t, -5.0, (0, 0, 5, 5), model="car"),
                                  det(t, -6.0, (50, 0, 55, 5), model="car")] for t in range(3)])
    tracks = extract_tracks(s, "car", CoherenceParams(min_track_score=100.0))
    assert len(tracks) == 1


def test_extract_pool_exhaustion():
    s = stream_from_frames("v", [[det(t, 1.0, (0, 0, 5, 5), model="car")] for t in range(4)])
    assert len(extract_tracks(s, "car", CoherenceParams(min_track_score=-100))) == 1


def test_extract_disjoint(rng):
    for _ in range(20):
        s = random_stream(rng, 5, 6, min_cands=3)
        tracks = extract_tracks(s, "car", CoherenceParams(min_track_score=-10))
        uids = [d.uid for tr in tracks for d in tr.detections]
        assert len(uids) == len(set(uids))


def _track(boxes, scores=None):
    scores = scores if scores is not None else [1.0] * len(boxes)
    return Track("v", "car", 0, [det(t, s, b, model="car") for t, (b, s) in
                                 enumerate(zip(boxes, scores))], 0.0)


def test_smooth_constant_and_single():
    tr = _track([(0, 0, 5, 5)] * 7)
    assert np.array_equal(smooth_track(tr).boxes, tr.boxes)
    one = _track([(1, 2, 3, 4)])
    assert np.array_equal(smooth_track(one).boxes, one.boxes)


def test_smooth_linear_interior():
    tr = _track([(t, 0, t + 5, 5) for t in range(10)])
    sm = smooth_track(tr, 5).boxes
    assert np.allclose(sm[2:-2], tr.boxes[2:-2])
    assert not np.allclose(sm[0], tr.boxes[0])


def test_smooth_window_shrinks():
    tr = _track([(t * t, 0, t * t + 5, 5) for t in range(4)])
    sm = smooth_track(tr, 9).boxes  # becomes window 3
    assert sm[1, 0] == pytest.approx((0 + 1 + 4) / 3)


def test_smooth_preserves_validity(rng):
    for _ in range(20):
        boxes = []
        for _ in range(12):
            x, y = rng.uniform(0, 50, size=2)
            w, h = rng.uniform(0.01, 10, size=2)
            boxes.append((x, y, x + w, y + h))
        sm = smooth_track(_track(boxes), 5).boxes
        assert np.all(sm[:, 2] > sm[:, 0]) and np.all(sm[:, 3] > sm[:, 1])


def test_prune_constant_track_kept():
    tr = _track([(0, 0, 5, 5)] * 10)
    assert prune_tracks([tr], var_threshold=0.1) == [tr]


def test_prune_three_clusters():
    rng = np.random.default_rng(0)
    scores = np.r_[rng.normal(0, 0.02, 20), rng.normal(1, 0.02, 20), rng.normal(2, 0.02, 20)]
    grid, dens = smoothed_density(scores, None)
    peaks, _ = find_peaks(dens)
    assert len(peaks) == 3  # independent peak count on the smoothed grid
    tr = _track([(0, 0, 5, 5)] * len(scores), list(scores))
    assert prune_tracks([tr]) == []


def test_prune_bimodal_allowed():
    rng = np.random.default_rng(1)
    scores = np.r_[rng.normal(0, 0.02, 20), rng.normal(3, 0.02, 20)]
    tr = _track([(0, 0, 5, 5)] * len(scores), list(scores))
    assert prune_tracks([tr], var_threshold=math.inf) == [tr]
    assert prune_tracks([tr], var_threshold=1.0) == []


def test_prune_keeps_order():
    a = _track([(0, 0, 5, 5)] * 4, [1.0] * 4)
    b = _track([(0, 0, 5, 5)] * 4, [0.0, 5.0, 0.0, 5.0])
    c = _track([(0, 0, 5, 5)] * 4, [2.0] * 4)
    assert prune_tracks([a, b, c], var_threshold=1.0) == [a, c]


def test_track_json_roundtrip(tmp_path):
    tr = _track([(0, 0, 5, 5), (1, 0, 6, 5)], [0.5, 0.25])
    tr.track_id = "car:0"
    tr.save(tmp_path / "t.json")
    back = Track.load(tmp_path / "t.json")
    assert np.array_equal(back.boxes, tr.boxes) and back.track_id == "car:0"
    assert list(back.scores) == [0.5, 0.25]
