"""Detection-candidate streams: parsing, score normalization, capping and
flow-based forward projection."""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_FPS = 30.0
N_SCORE_BINS = 50
THRESHOLD_SLACK = 0.4

_uid_counter = itertools.count()


class StreamError(ValueError):
    """Malformed or inconsistent detection stream."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NoBipartitionError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        vals = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box {vals}")
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box {vals}")

    @property
    def width(self):
        return self.x2 - self.x1

    @property
    def height(self):
        return self.y2 - self.y1

    @property
    def area(self):
        return self.width * self.height

    @property
    def center(self):
        return (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))

    @property
    def aspect(self):
        """Width over height."""
        return self.width / self.height

    def shifted(self, dx, dy):
        return Box(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)

    def as_list(self):
        return [self.x1, self.y1, self.x2, self.y2]


def iou(a: Box, b: Box) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class Detection:
    frame: int
    model: str
    score: float
    box: Box
    parts: tuple = ()
    root_filter: int = 0
    flow: tuple | None = None
    projected: bool = False
    hsv: tuple | None = None
    uid: int = field(default_factory=lambda: next(_uid_counter), compare=False)
    # uid of the original detection this one was projected from (itself if original)
    source: int | None = field(default=None, compare=False)

    @property
    def origin(self):
        return self.uid if self.source is None else self.source

    def shift_of_flow(self, steps=1):
        if self.flow is None:
            return 0.0, 0.0
        return steps * self.flow[0], steps * self.flow[1]


@dataclass
class DetectionStream:
    video: str
    frame_count: int
    per_frame: list
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        if self.frame_count < 1:
            raise StreamError("frameCount must be >= 1")
        if len(self.per_frame) != self.frame_count:
            raise StreamError(
                f"{len(self.per_frame)} frame lists for frameCount {self.frame_count}")

    def detections(self, models=None):
        models = _as_model_set(models)
        for dets in self.per_frame:
            for d in dets:
                if models is None or d.model in models:
                    yield d

    def models(self):
        return sorted({d.model for d in self.detections()})

    def with_frames(self, per_frame):
        return replace(self, per_frame=[list(f) for f in per_frame])


def _as_model_set(models):
    if models is None:
        return None
    if isinstance(models, str):
        return {models}
    return set(models)


def _parse_detection(rec, frame, line):
    try:
        box = Box(*[float(v) for v in rec["box"]])
    except (KeyError, TypeError) as exc:
        raise StreamError(f"bad box: {exc}", line) from None
    except ValueError as exc:
        raise StreamError(str(exc), line) from None
    flow = rec.get("flow")
    if flow is not None:
        flow = (float(flow[0]), float(flow[1]))
        if not all(math.isfinite(v) for v in flow):
            raise StreamError("non-finite flow", line)
    hsv = rec.get("hsv")
    return Detection(
        frame=frame,
        model=str(rec["model"]),
        score=float(rec["score"]),
        box=box,
        parts=tuple((float(p[0]), float(p[1])) for p in rec.get("parts", [])),
        root_filter=int(rec.get("rootFilter", 0)),
        flow=flow,
        hsv=None if hsv is None else tuple(float(v) for v in hsv),
    )


def parse_detection_stream(path) -> DetectionStream:
    """Load a JSON-lines detection stream (header line, then one line per frame)."""
    header = None
    per_frame = None
    video = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise StreamError(f"invalid JSON ({exc.msg})", lineno) from None
            if not isinstance(rec, dict):
                raise StreamError("record is not an object", lineno)
            if header is None:
                if "frameCount" not in rec:
                    raise StreamError("first record must be a header with frameCount", lineno)
                header = rec
                video = str(rec.get("video", Path(path).stem))
                n = int(rec["frameCount"])
                if n < 1:
                    raise StreamError("frameCount must be >= 1", lineno)
                per_frame = [[] for _ in range(n)]
                continue
            try:
                frame = int(rec["frame"])
                dets = rec["detections"]
            except (KeyError, TypeError, ValueError):
                raise StreamError("frame record needs 'frame' and 'detections'", lineno) from None
            if not 0 <= frame < len(per_frame):
                raise StreamError(f"frame {frame} outside [0, {len(per_frame)})", lineno)
            try:
                per_frame[frame].extend(_parse_detection(d, frame, lineno) for d in dets)
            except (KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, StreamError):
                    raise
                raise StreamError(f"bad detection record: {exc!r}", lineno) from None
    if header is None:
        raise StreamError("empty stream file (no header)")
    return DetectionStream(video, len(per_frame), per_frame,
                           fps=float(header.get("fps", DEFAULT_FPS)))


def detection_record(d: Detection) -> dict:
    rec = {
        "model": d.model,
        "score": d.score,
        "box": d.box.as_list(),
        "parts": [list(p) for p in d.parts],
        "rootFilter": d.root_filter,
        "flow": None if d.flow is None else list(d.flow),
    }
    if d.hsv is not None:
        rec["hsv"] = list(d.hsv)
    return rec


def write_detection_stream(stream: DetectionStream, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"video": stream.video, "frameCount": stream.frame_count,
                             "fps": stream.fps}) + "\n")
        for t, dets in enumerate(stream.per_frame):
            fh.write(json.dumps({"video": stream.video, "frame": t,
                                 "detections": [detection_record(d) for d in dets
                                                if not d.projected]}) + "\n")


def between_class_variance(histogram, centers):
    """sigma_b^2 at each of the len-1 interior boundaries (index i splits bins [:i] | [i:])."""
    h = np.asarray(histogram, dtype=float)
    p = h / h.sum()
    w0 = np.cumsum(p)[:-1]
    w1 = 1.0 - w0
    m0 = np.cumsum(p * centers)[:-1]
    mt = np.sum(p * centers)
    out = np.zeros_like(w0)
    ok = (w0 > 0) & (w1 > 0)
    mu0 = m0[ok] / w0[ok]
    mu1 = (mt - m0[ok]) / w1[ok]
    out[ok] = w0[ok] * w1[ok] * (mu0 - mu1) ** 2
    return out


def otsu_bipartition(histogram, bin_edges) -> float:
    """Return the bin boundary maximizing between-class variance.

    Ties resolve to the smallest boundary.
    """
    h = np.asarray(histogram, dtype=float)
    edges = np.asarray(bin_edges, dtype=float)
    if edges.shape != (h.size + 1,):
        raise ValueError("need len(histogram) + 1 bin edges")
    if np.count_nonzero(h) < 2:
        raise NoBipartitionError("histogram has fewer than two nonzero bins")
    centers = 0.5 * (edges[:-1] + edges[1:])
    sb = between_class_variance(h, centers)
    return float(edges[1 + int(np.argmax(sb))])


def top_scores(stream: DetectionStream, model):
    """Per-frame maximum score of ``model`` (frames without it are skipped)."""
    out = []
    for dets in stream.per_frame:
        s = [d.score for d in dets if d.model == model]
        if s:
            out.append(max(s))
    return np.array(out)


def score_offset(stream: DetectionStream, model, trained_threshold) -> float | None:
    """Offset subtracted from ``model``'s scores; None if the model is absent."""
    tops = top_scores(stream, model)
    if tops.size == 0:
        return None
    cap = trained_threshold + THRESHOLD_SLACK
    if tops.size < 2:
        return cap
    hist, edges = np.histogram(tops, bins=N_SCORE_BINS, range=(tops.min(), tops.max()))
    try:
        return min(otsu_bipartition(hist, edges), cap)
    except NoBipartitionError:
        return cap


def normalize_scores(stream: DetectionStream, model, trained_threshold) -> DetectionStream:
    offset = score_offset(stream, model, trained_threshold)
    if offset is None:
        log.warning("normalize_scores: model %r absent from %s", model, stream.video)
        return stream
    return stream.with_frames(
        [replace(d, score=d.score - offset) if d.model == model else d for d in dets]
        for dets in stream.per_frame)


def _rank_key(item):
    pos, d = item
    return (-d.score, d.projected, pos)


def cap_per_frame(stream: DetectionStream, k=12) -> DetectionStream:
    """Keep the ``k`` best detections per frame (ties: originals first, then input order)."""
    if k < 1:
        raise ValueError("k must be positive")
    frames = []
    for dets in stream.per_frame:
        if len(dets) <= k:
            frames.append(list(dets))
            continue
        keep = sorted(sorted(enumerate(dets), key=_rank_key)[:k])
        frames.append([d for _, d in keep])
    return stream.with_frames(frames)


def project_forward(stream: DetectionStream, horizon=5, cap=12) -> DetectionStream:
    """Add flow-translated copies of each original detection to the next ``horizon`` frames.

    The cap is re-applied afterwards (pass ``cap=None`` to skip).
    """
    frames = [list(dets) for dets in stream.per_frame]
    for t, dets in enumerate(stream.per_frame):
        for d in dets:
            if d.projected:
                continue
            for h in range(1, horizon + 1):
                if t + h >= stream.frame_count:
                    break
                dx, dy = d.shift_of_flow(h)
                frames[t + h].append(replace(
                    d, frame=t + h, box=d.box.shifted(dx, dy), projected=True,
                    uid=next(_uid_counter), source=d.origin))
    out = stream.with_frames(frames)
    if cap is not None:
        out = cap_per_frame(out, cap)
    return out


def detections_from_records(records: Iterable[dict], frame: int) -> list:
    return [_parse_detection(r, frame, None) for r in records]


def stream_from_frames(video, per_frame: Sequence[Sequence[Detection]], fps=DEFAULT_FPS):
    return DetectionStream(video, len(per_frame), [list(f) for f in per_frame], fps)
