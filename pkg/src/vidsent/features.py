"""Per-frame feature vectors for single tracks and agent/patient pairs."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .classes import OBJECT_CLASSES, OBJECT_INDEX, is_person
from .posture import codebook_index, part_displacements

LINEAR = "linear"
ANGULAR = "angular"
DISCRETE = "discrete"
KINDS = (LINEAR, ANGULAR, DISCRETE)

ROOT_FILTER_CARDINALITY = 6
STATIONARY_SPEED = 5.0  # px/s
STATIONARY_ACCEL = 5.0  # px/s^2

# schema masks for the feature-subset experiments
MASKS = {
    "full": dict(drop_discrete=False, drop_posture=False),
    "I": dict(drop_discrete=True, drop_posture=True),
    "II": dict(drop_discrete=True, drop_posture=False),
    "III": dict(drop_discrete=False, drop_posture=True),
}


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str
    cardinality: int = 0
    posture: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind == DISCRETE and self.cardinality < 1:
            raise ValueError(f"discrete feature {self.name} needs a cardinality")


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")

    def __len__(self):
        return len(self.features)

    @property
    def names(self):
        return [f.name for f in self.features]

    def indices(self, kind):
        return np.array([i for i, f in enumerate(self.features) if f.kind == kind], dtype=int)

    def prefixed(self, prefix):
        return FeatureSchema(tuple(Feature(prefix + f.name, f.kind, f.cardinality, f.posture)
                                   for f in self.features))

    def __add__(self, other):
        return FeatureSchema(self.features + other.features)

    def masked(self, drop_discrete=False, drop_posture=False):
        keep = [i for i, f in enumerate(self.features)
                if not (drop_discrete and f.kind == DISCRETE)
                and not (drop_posture and f.posture and f.kind != DISCRETE)]
        return keep, FeatureSchema(tuple(self.features[i] for i in keep))

    def to_json(self):
        return [{"name": f.name, "kind": f.kind, "cardinality": f.cardinality,
                 "posture": f.posture} for f in self.features]

    @classmethod
    def from_json(cls, recs):
        return cls(tuple(Feature(r["name"], r["kind"], int(r.get("cardinality", 0)),
                                 bool(r.get("posture", False))) for r in recs))


@dataclass
class FeatureSeries:
    schema: FeatureSchema
    values: np.ndarray
    fps: float = 30.0

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[0] < 1 or self.values.shape[1] != len(self.schema):
            raise FeatureError(f"values {self.values.shape} do not match schema of "
                               f"{len(self.schema)} features")
        self.validate()

    def __len__(self):
        return self.values.shape[0]

    def validate(self):
        v = self.values
        for i, f in enumerate(self.schema.features):
            col = v[:, i]
            if not np.all(np.isfinite(col)):
                raise FeatureError(f"non-finite values in {f.name}")
            if f.kind == DISCRETE:
                if np.any(col != np.round(col)) or col.min() < 0 or col.max() >= f.cardinality:
                    raise FeatureError(f"{f.name} outside [0, {f.cardinality})")
            elif f.kind == ANGULAR and (col.min() <= -np.pi or col.max() > np.pi):
                raise FeatureError(f"{f.name} outside (-pi, pi]")

    def column(self, name):
        return self.values[:, self.schema.names.index(name)]

    def masked(self, mask="full"):
        keep, schema = self.schema.masked(**MASKS[mask])
        return FeatureSeries(schema, self.values[:, keep], self.fps)

    def to_json(self):
        return {"schema": self.schema.to_json(), "fps": self.fps,
                "values": self.values.tolist()}

    @classmethod
    def from_json(cls, rec):
        return cls(FeatureSchema.from_json(rec["schema"]), np.array(rec["values"], dtype=float),
                   float(rec.get("fps", 30.0)))

    def save(self, path):
        from ._jsonio import dump_json
        dump_json(self.to_json(), path)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def wrap_angle(a):
    """Map angles into (-pi, pi]."""
    a = np.mod(np.asarray(a, dtype=float) + np.pi, 2 * np.pi) - np.pi
    return np.where(a <= -np.pi, a + 2 * np.pi, a)


def screen_angle(dx, dy):
    """Direction of an image-space vector with screen-up positive."""
    return wrap_angle(np.arctan2(-np.asarray(dy, dtype=float), np.asarray(dx, dtype=float)))


def time_derivative(x, fps):
    """Central differences (one-sided at the ends) along axis 0, per second."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        return np.zeros_like(x)
    return np.gradient(x, 1.0 / fps, axis=0)


def directions(vec, eps):
    """Screen-up angles of (T, 2) vectors; below ``eps`` the previous angle is held."""
    mag = np.hypot(vec[:, 0], vec[:, 1])
    raw = screen_angle(vec[:, 0], vec[:, 1])
    out = np.empty(len(vec))
    prev = 0.0
    for t in range(len(vec)):
        if mag[t] >= eps:
            prev = raw[t]
        out[t] = prev
    return out


def single_track_schema(person, part_count=0, k=0, root_cardinality=ROOT_FILTER_CARDINALITY):
    feats = [
        Feature("cx", LINEAR), Feature("cy", LINEAR),
        Feature("aspect", LINEAR), Feature("d_aspect", LINEAR),
        Feature("speed", LINEAR), Feature("velocity_dir", ANGULAR),
        Feature("accel", LINEAR), Feature("accel_dir", ANGULAR),
    ]
    if person:
        feats += [Feature(f"part{j}_{ax}", LINEAR, posture=True)
                  for j in range(part_count) for ax in "xy"]
        feats += [Feature(f"d_part{j}_{ax}", LINEAR, posture=True)
                  for j in range(part_count) for ax in "xy"]
        feats.append(Feature("posture", DISCRETE, k, posture=True))
    feats += [Feature("object_class", DISCRETE, len(OBJECT_CLASSES)),
              Feature("root_filter", DISCRETE, root_cardinality)]
    return FeatureSchema(tuple(feats))


def kinematics(centers, fps, eps_v=STATIONARY_SPEED, eps_a=STATIONARY_ACCEL):
    """Velocity/acceleration magnitude and direction columns from (T, 2) image centers."""
    vel = time_derivative(centers, fps)
    acc = time_derivative(vel, fps)
    return (np.hypot(vel[:, 0], vel[:, 1]), directions(vel, eps_v),
            np.hypot(acc[:, 0], acc[:, 1]), directions(acc, eps_a), vel)


def single_track_features(track, cb=None, fps=30.0,
                          root_cardinality=ROOT_FILTER_CARDINALITY) -> FeatureSeries:
    dets = track.detections
    if not dets:
        raise FeatureError("empty track")
    boxes = track.boxes
    centers = 0.5 * (boxes[:, :2] + boxes[:, 2:])
    aspect = (boxes[:, 2] - boxes[:, 0]) / (boxes[:, 3] - boxes[:, 1])
    speed, vdir, accel, adir, _ = kinematics(centers, fps)
    cols = [centers[:, 0], centers[:, 1], aspect, time_derivative(aspect, fps),
            speed, vdir, accel, adir]
    person = is_person(track.object_class)
    part_count = k = 0
    if person:
        if cb is None:
            raise FeatureError(f"person track {track.track_id!r} needs a posture codebook")
        disp = np.vstack([part_displacements(d) for d in dets])
        if disp.shape[1] != cb.dim:
            raise FeatureError(f"{disp.shape[1] // 2} parts but codebook expects {cb.part_count}")
        part_count, k = cb.part_count, cb.k
        cols += list(disp.T) + list(time_derivative(disp, fps).T)
        cols.append(np.array([codebook_index(cb, v) for v in disp], dtype=float))
    rf = np.array([d.root_filter for d in dets], dtype=float)
    if rf.max() >= root_cardinality:
        raise FeatureError(f"root-filter index {int(rf.max())} >= {root_cardinality}")
    cols.append(np.array([OBJECT_INDEX[d.model] for d in dets], dtype=float))
    cols.append(rf)
    schema = single_track_schema(person, part_count, k, root_cardinality)
    return FeatureSeries(schema, np.column_stack(cols), fps)


PAIR_SCHEMA = FeatureSchema((Feature("distance", LINEAR), Feature("d_distance", LINEAR),
                             Feature("orientation", ANGULAR)))


def overlap(a, b):
    lo, hi = max(a.t0, b.t0), min(a.t1, b.t1)
    if lo > hi:
        raise FeatureError(f"tracks {a.track_id!r} and {b.track_id!r} do not overlap")
    return lo, hi


def pair_features(agent, patient, fps=30.0) -> FeatureSeries:
    """Center distance, its derivative and agent-to-patient orientation on the overlap."""
    lo, hi = overlap(agent, patient)
    ac = agent.centers[lo - agent.t0:hi - agent.t0 + 1]
    pc = patient.centers[lo - patient.t0:hi - patient.t0 + 1]
    d = pc - ac
    dist = np.hypot(d[:, 0], d[:, 1])
    orient = screen_angle(d[:, 0], d[:, 1])
    return FeatureSeries(PAIR_SCHEMA, np.column_stack([dist, time_derivative(dist, fps), orient]),
                         fps)


def two_track_features(agent, patient, cb=None, fps=30.0, single=None) -> FeatureSeries:
    """Agent and patient single-track features on their overlap, plus pair features.

    ``single`` may map track ids to precomputed single-track series.
    """
    lo, hi = overlap(agent, patient)
    parts = []
    for prefix, tr in (("agent.", agent), ("patient.", patient)):
        s = single.get(tr.track_id) if single else None
        if s is None:
            s = single_track_features(tr, cb, fps)
        parts.append((s.schema.prefixed(prefix), s.values[lo - tr.t0:hi - tr.t0 + 1]))
    pair = pair_features(agent, patient, fps)
    parts.append((PAIR_SCHEMA.prefixed("pair."), pair.values))
    schema = parts[0][0] + parts[1][0] + parts[2][0]
    return FeatureSeries(schema, np.hstack([p[1] for p in parts]), fps)
