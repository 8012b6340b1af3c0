"""Detection-based tracking: Viterbi track selection, iterative extraction,
smoothing and score-distribution pruning."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .classes import PERSON_MODELS
from .ingest import Box, Detection, DetectionStream, iou

SUPPRESS_IOU = 0.5
N_MODALITY_GRID = 50


class TrackingError(ValueError):
    pass


class NoTrackError(TrackingError):
    pass


class GapError(TrackingError):
    pass


@dataclass(frozen=True)
class CoherenceParams:
    lam: float = 1.0
    min_track_score: float = 0.5

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")


@dataclass
class Track:
    video: str
    object_class: str
    t0: int
    detections: list
    total_score: float
    track_id: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def t1(self):
        return self.t0 + len(self.detections) - 1

    def __len__(self):
        return len(self.detections)

    @property
    def boxes(self):
        return np.array([d.box.as_list() for d in self.detections])

    @property
    def scores(self):
        return np.array([d.score for d in self.detections])

    @property
    def centers(self):
        return np.array([d.box.center for d in self.detections])

    @property
    def frames(self):
        return np.arange(self.t0, self.t1 + 1)

    def to_json(self):
        return {
            "video": self.video,
            "objectClass": self.object_class,
            "trackId": self.track_id,
            "t0": self.t0,
            "t1": self.t1,
            "boxes": [d.box.as_list() for d in self.detections],
            "scores": [d.score for d in self.detections],
            "models": [d.model for d in self.detections],
            "parts": [[list(p) for p in d.parts] for d in self.detections],
            "rootFilters": [d.root_filter for d in self.detections],
            "hsv": [None if d.hsv is None else list(d.hsv) for d in self.detections],
            "totalScore": self.total_score,
        }

    @classmethod
    def from_json(cls, rec):
        n = rec["t1"] - rec["t0"] + 1
        models = rec.get("models") or [rec["objectClass"]] * n
        hsv = rec.get("hsv") or [None] * n
        dets = [
            Detection(frame=rec["t0"] + i, model=models[i], score=float(rec["scores"][i]),
                      box=Box(*rec["boxes"][i]),
                      parts=tuple(tuple(p) for p in rec["parts"][i]),
                      root_filter=int(rec["rootFilters"][i]),
                      hsv=None if hsv[i] is None else tuple(hsv[i]))
            for i in range(n)
        ]
        return cls(rec["video"], rec["objectClass"], rec["t0"], dets,
                   float(rec["totalScore"]), rec.get("trackId", ""))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def track_class_models(object_class):
    """Detector models pooled for a track class (the pose-specific person models pool)."""
    if object_class == "person":
        return PERSON_MODELS
    return (object_class,)


def track_class_of(model):
    return "person" if model in PERSON_MODELS else model


def coherence(a: Detection, b: Detection) -> float:
    """IoU of ``a``'s box advanced by its flow with ``b``'s box."""
    dx, dy = a.shift_of_flow(1)
    return iou(a.box.shifted(dx, dy), b.box)


def coherence_matrix(prev, nxt):
    """Vectorized ``coherence`` for all pairs (len(prev), len(nxt))."""
    a = np.array([d.box.as_list() for d in prev], dtype=float)
    f = np.array([d.flow if d.flow is not None else (0.0, 0.0) for d in prev], dtype=float)
    a[:, [0, 2]] += f[:, :1]
    a[:, [1, 3]] += f[:, 1:]
    b = np.array([d.box.as_list() for d in nxt], dtype=float)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    return inter / (area_a[:, None] + area_b[None, :] - inter)


def candidates(stream: DetectionStream, models):
    """Per-frame candidate lists of ``models`` restricted to the span [t0, t1]."""
    models = {models} if isinstance(models, str) else set(models)
    per = [[d for d in dets if d.model in models] for dets in stream.per_frame]
    present = [t for t, c in enumerate(per) if c]
    if not present:
        raise NoTrackError(f"no candidates of {sorted(models)} in {stream.video}")
    t0, t1 = present[0], present[-1]
    for t in range(t0, t1 + 1):
        if not per[t]:
            raise GapError(f"frame {t} of {stream.video} has no {sorted(models)} candidate")
    return t0, per[t0:t1 + 1]


def viterbi_select(cands, lam):
    """Indices maximizing sum(score) + lam * sum(coherence); returns (indices, objective)."""
    value = np.array([d.score for d in cands[0]], dtype=float)
    back = []
    for t in range(1, len(cands)):
        trans = value[:, None] + lam * coherence_matrix(cands[t - 1], cands[t])
        arg = np.argmax(trans, axis=0)
        back.append(arg)
        value = trans[arg, np.arange(len(cands[t]))] + np.array([d.score for d in cands[t]])
    j = int(np.argmax(value))
    best = float(value[j])
    path = [j]
    for arg in reversed(back):
        j = int(arg[j])
        path.append(j)
    return path[::-1], best


def objective(dets, lam):
    """Score and coherence terms of a selection, as (score_sum, coherence_sum)."""
    s = sum(d.score for d in dets)
    c = sum(coherence(a, b) for a, b in zip(dets, dets[1:]))
    return s, c


def best_track(stream: DetectionStream, model, params: CoherenceParams = CoherenceParams()) -> Track:
    """Optimal temporally coherent track for ``model`` (a model name or a pooled tuple)."""
    models = (model,) if isinstance(model, str) else tuple(model)
    t0, cands = candidates(stream, models)
    path, best = viterbi_select(cands, params.lam)
    dets = [cands[t][j] for t, j in enumerate(path)]
    return Track(stream.video, track_class_of(models[0]), t0, dets, best)


def _suppress(stream: DetectionStream, track: Track, models):
    """Remove the track's detections, their projection families and same-frame duplicates."""
    taken = {d.origin for d in track.detections}
    frames = [list(f) for f in stream.per_frame]
    for d in track.detections:
        frames[d.frame] = [
            c for c in frames[d.frame]
            if c.model not in models
            or not (c.uid == d.uid or iou(c.box, d.box) >= SUPPRESS_IOU)
        ]
    frames = [[c for c in f if c.model not in models or c.origin not in taken] for f in frames]
    return stream.with_frames(frames)


def extract_tracks(stream: DetectionStream, model, params: CoherenceParams = CoherenceParams(),
                   max_tracks=None) -> list:
    """Repeatedly take the best track and remove it from the candidate pool.

    The first track is always returned; extraction stops when the pool has a gap,
    runs dry, or the next track's per-frame objective falls below
    ``params.min_track_score``.
    """
    models = (model,) if isinstance(model, str) else tuple(model)
    first = best_track(stream, models, params)
    tracks = [first]
    pool = stream
    while max_tracks is None or len(tracks) < max_tracks:
        pool = _suppress(pool, tracks[-1], models)
        try:
            nxt = best_track(pool, models, params)
        except TrackingError:
            break
        if nxt.total_score / len(nxt) < params.min_track_score:
            break
        tracks.append(nxt)
    for i, tr in enumerate(tracks):
        tr.track_id = f"{tr.object_class}:{i}"
    return tracks


def _moving_average(x, window):
    n = len(x)
    h = window // 2
    c = np.concatenate([[0.0], np.cumsum(x, dtype=float)])
    lo = np.clip(np.arange(n) - h, 0, n)
    hi = np.clip(np.arange(n) + h + 1, 0, n)
    return (c[hi] - c[lo]) / (hi - lo)


def smooth_track(track: Track, window=5) -> Track:
    """Centered moving average of box coordinates, truncated at the ends."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be an odd positive integer")
    n = len(track)
    if window > n:
        window = n if n % 2 else n - 1
    if window <= 1:
        return replace(track, detections=list(track.detections))
    boxes = track.boxes
    sm = np.column_stack([_moving_average(boxes[:, k], window) for k in range(4)])
    dets = [replace(d, box=Box(*map(float, b))) for d, b in zip(track.detections, sm)]
    return replace(track, detections=dets)


def smoothed_density(scores, bandwidth=None, n_grid=N_MODALITY_GRID):
    """Gaussian-kernel density of ``scores`` on a grid padded by three bandwidths."""
    s = np.asarray(scores, dtype=float)
    span = s.max() - s.min()
    if bandwidth is None:
        bandwidth = 0.1 * span
    if bandwidth <= 0 or span == 0:
        return None, None
    grid = np.linspace(s.min() - 3 * bandwidth, s.max() + 3 * bandwidth, n_grid)
    z = (grid[:, None] - s[None, :]) / bandwidth
    return grid, np.exp(-0.5 * z * z).sum(axis=1)


def count_modes(scores, bandwidth=None):
    grid, dens = smoothed_density(scores, bandwidth)
    if dens is None:
        return 1
    rising = dens[1:-1] > dens[:-2]
    not_falling_after = dens[1:-1] >= dens[2:]
    # a plateau counts once: only its left edge satisfies strict rise
    return max(1, int(np.count_nonzero(rising & not_falling_after)))


def prune_tracks(tracks, var_threshold=math.inf, modality_bandwidth=None):
    """Drop tracks with high score variance or more than two score modes."""
    kept = []
    for tr in tracks:
        s = tr.scores
        if np.var(s) > var_threshold:
            continue
        if len(s) > 2 and count_modes(s, modality_bandwidth) >= 3:
            continue
        kept.append(tr)
    return kept
