"""Per-track descriptions and the training statistics used to word them."""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..classes import PERSON_MODELS, is_person
from ..features import time_derivative

log = logging.getLogger(__name__)

POSES = {"person": "upright", "person-crouch": "crouched", "person-down": "prone"}


@dataclass(frozen=True)
class ActionThresholds:
    """Speed cutoffs in px/s: v1 starts "slowly", v3 ends it, above v2 is "quickly"."""

    v1: float
    v2: float
    v3: float

    def __post_init__(self):
        if not (0 <= self.v1 <= self.v3 <= self.v2):
            raise ValueError(f"need 0 <= v1 <= v3 <= v2, got {self}")

    def to_json(self):
        return {"v1": self.v1, "v2": self.v2, "v3": self.v3}

    @classmethod
    def from_json(cls, rec):
        return cls(float(rec["v1"]), float(rec["v2"]), float(rec["v3"]))


DEFAULT_THRESHOLDS = ActionThresholds(v1=10.0, v2=200.0, v3=60.0)


def fit_action_thresholds(speeds, q1=25, q2=90, q3=60) -> ActionThresholds:
    """Percentile cutoffs over the per-frame subject speeds seen for one action."""
    s = np.asarray(speeds, dtype=float)
    if s.size == 0:
        return DEFAULT_THRESHOLDS
    v1, v2, v3 = (float(np.percentile(s, q)) for q in (q1, q2, q3))
    return ActionThresholds(v1, v2, v3)


@dataclass(frozen=True)
class StabilityThresholds:
    """Tracks noisier than this get no size or shape adjectives."""

    score_variance: float = 0.25
    aspect_variance: float = 0.05


@dataclass(frozen=True)
class ClassStats:
    mean_area: float
    mean_aspect: float
    alpha: float
    beta: float

    def to_json(self):
        return {"meanArea": self.mean_area, "meanAspect": self.mean_aspect,
                "alpha": self.alpha, "beta": self.beta}

    @classmethod
    def from_json(cls, rec):
        return cls(float(rec["meanArea"]), float(rec["meanAspect"]), float(rec["alpha"]),
                   float(rec["beta"]))


@dataclass
class ClassStatistics:
    by_class: dict = field(default_factory=dict)

    def get(self, object_class):
        return self.by_class.get(object_class)

    def __contains__(self, object_class):
        return object_class in self.by_class

    def to_json(self):
        return {k: v.to_json() for k, v in sorted(self.by_class.items())}

    @classmethod
    def from_json(cls, rec):
        return cls({k: ClassStats.from_json(v) for k, v in rec.items()})


def third_cutoffs(values):
    """Areas splitting ``values`` into equal thirds: the lower and the mirrored upper cut."""
    x = np.asarray(values, dtype=float)
    low = float(np.quantile(x, 1 / 3, method="inverted_cdf"))
    high = -float(np.quantile(-x, 1 / 3, method="inverted_cdf"))
    return low, high


def fit_class_statistics(descriptions) -> ClassStatistics:
    """Mean size and aspect per class from per-track means, with tripartition cutoffs."""
    groups = defaultdict(list)
    for d in descriptions:
        groups[d.object_class].append(d)
    out = {}
    for cls, ds in sorted(groups.items()):
        if len(ds) < 3:
            log.warning("only %d track(s) for class %s; size cutoffs are unreliable", len(ds), cls)
        areas = np.array([d.mean_area for d in ds])
        abar = float(areas.mean())
        rbar = float(np.mean([d.mean_aspect for d in ds]))
        low, high = third_cutoffs(areas)
        out[cls] = ClassStats(abar, rbar, low / abar, high / abar)
    return ClassStatistics(out)


@dataclass
class ParticipantDescription:
    track_id: str
    object_class: str
    hsv: tuple | None           # H in [0, 360), S and V in [0, 1]
    mean_area: float
    mean_aspect: float
    score_variance: float
    aspect_variance: float
    mean_speed: float
    mean_direction: float       # screen-up radians of the mean velocity
    total_displacement: float   # path length in px
    pose: str = "none"
    velocities: np.ndarray = field(default_factory=lambda: np.zeros((1, 2)), repr=False)
    mean_center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.pose != "none" and not is_person(self.object_class):
            raise ValueError("only person tracks carry a pose")
        vals = [self.mean_area, self.mean_aspect, self.score_variance, self.aspect_variance,
                self.mean_speed, self.mean_direction, self.total_displacement]
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite statistics for {self.track_id}")


def majority_pose(models):
    counts = Counter(m for m in models if m in POSES)
    if not counts:
        return "none"
    best = max(PERSON_MODELS, key=lambda m: (counts[m], -PERSON_MODELS.index(m)))
    return POSES[best]


def describe_track(track, fps=30.0) -> ParticipantDescription:
    boxes = track.boxes
    w, h = boxes[:, 2] - boxes[:, 0], boxes[:, 3] - boxes[:, 1]
    aspect = w / h
    centers = track.centers
    vel = time_derivative(centers, fps)
    mean_v = vel.mean(axis=0)
    hsvs = [d.hsv for d in track.detections]
    hsv = None
    if hsvs and all(x is not None for x in hsvs):
        arr = np.asarray(hsvs, dtype=float)
        ang = np.deg2rad(arr[:, 0])
        hue = np.rad2deg(np.arctan2(np.sin(ang).mean(), np.cos(ang).mean())) % 360.0
        hsv = (float(hue), float(arr[:, 1].mean()), float(arr[:, 2].mean()))
    return ParticipantDescription(
        track_id=track.track_id, object_class=track.object_class, hsv=hsv,
        mean_area=float(np.mean(w * h)), mean_aspect=float(aspect.mean()),
        score_variance=float(np.var(track.scores)), aspect_variance=float(np.var(aspect)),
        mean_speed=float(np.hypot(vel[:, 0], vel[:, 1]).mean()),
        mean_direction=float(np.arctan2(-mean_v[1], mean_v[0])),
        total_displacement=float(np.hypot(*np.diff(centers, axis=0).T).sum()),
        pose=majority_pose([d.model for d in track.detections])
        if is_person(track.object_class) else "none",
        velocities=vel, mean_center=tuple(float(c) for c in centers.mean(axis=0)))
