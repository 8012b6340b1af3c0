"""Synthetic detection streams for six motion scenarios, with ground-truth roles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _jsonio
from ..ingest import Box, Detection, DetectionStream, iou, write_detection_stream

SCENARIOS = {
    "approach": "approached",
    "flee": "fled",
    "jump": "jumped",
    "pickup": "picked",
    "carry": "carried",
    "collide": "collided",
}
FRAME_SIZE = (1280.0, 720.0)
FPS = 30.0
PART_COUNT = 8
CENTER_NOISE = 1.5      # px
FLOW_NOISE = 0.3        # px/frame
MISS_RATE = 0.05
TRUE_SCORE = (0.75, 0.15)
DISTRACTOR_SCORE = (-0.8, 0.3)

# part offsets in units of box width/height, relative to the box center
UPRIGHT_PARTS = np.array([[0.0, -0.4], [-0.3, -0.2], [0.3, -0.2], [-0.35, 0.05],
                          [0.35, 0.05], [0.0, 0.0], [-0.15, 0.35], [0.15, 0.35]])
CROUCH_PARTS = np.array([[0.2, -0.35], [-0.2, -0.15], [0.35, 0.0], [-0.3, 0.2],
                         [0.4, 0.2], [0.05, 0.1], [-0.3, 0.4], [0.3, 0.4]])
PART_NOISE = 0.03

SIZES = {"person": (60.0, 150.0), "person-crouch": (75.0, 100.0),
         "cardboard-box": (60.0, 50.0), "small-ball": (30.0, 30.0)}
ROOT_FILTERS = {"person": 0, "person-crouch": 2, "cardboard-box": 1, "small-ball": 3}


@dataclass
class Actor:
    role: str
    centers: np.ndarray     # (T, 2)
    models: list            # detector model per frame
    hsv: tuple | None = None


def _line(start, velocity, n):
    return np.asarray(start, float) + np.outer(np.arange(n), velocity)


def _approach(rng, n):
    side = rng.choice([-1.0, 1.0])
    y = rng.uniform(250, 500)
    target = np.array([rng.uniform(500, 780), y])
    # keep the start on screen so that clipping never fakes a pause
    room = target[0] - 40 if side > 0 else FRAME_SIZE[0] - 40 - target[0]
    dist = min(rng.uniform(450, 600), room)
    speed = rng.uniform(6, 9)       # px/frame
    start = target - [side * dist, rng.normal(0, 20)]
    direction = (target - start) / np.linalg.norm(target - start)
    stop = dist - 110
    steps = np.minimum(np.arange(n) * speed, stop)
    agent = start + np.outer(steps, direction)
    patient = np.tile(target, (n, 1))
    return [Actor("agent", agent, ["person"] * n), Actor("patient", patient, ["person"] * n)]


def _flee(rng, n):
    side = rng.choice([-1.0, 1.0])
    speed = rng.uniform(6, 9)
    # leave room for the whole run inside the frame
    reach = 110 + speed * n + 40
    x = rng.uniform(40, FRAME_SIZE[0] - reach)
    patient = np.array([x if side > 0 else FRAME_SIZE[0] - x, rng.uniform(250, 500)])
    start = patient + [side * 110, rng.normal(0, 10)]
    agent = _line(start, [side * speed, rng.normal(0, 0.5)], n)
    return [Actor("agent", agent, ["person"] * n),
            Actor("patient", np.tile(patient, (n, 1)), ["person"] * n)]


def _jump(rng, n):
    height = rng.uniform(50, 90)
    period = rng.uniform(14, 20)
    x0, y0 = rng.uniform(300, 900), rng.uniform(350, 500)
    t = np.arange(n)
    drift = rng.normal(0, 0.5)
    centers = np.column_stack([x0 + drift * t, y0 - height * np.abs(np.sin(np.pi * t / period))])
    return [Actor("agent", centers, ["person"] * n)]


def _pickup(rng, n):
    side = rng.choice([-1.0, 1.0])
    box = np.array([rng.uniform(500, 780), rng.uniform(450, 550)])
    speed = rng.uniform(6, 9)
    walk = int(n * 0.4)
    crouch = int(n * 0.25)
    reach = box + [-side * 45, -50]
    start = reach - [side * speed * walk, 0]
    agent, models, patient = [], [], []
    for t in range(n):
        if t < walk:
            agent.append(start + [side * speed * t, 0])
            models.append("person")
            patient.append(box)
        elif t < walk + crouch:
            agent.append(reach + [0, 25])
            models.append("person-crouch")
            patient.append(box)
        else:
            k = t - walk - crouch
            lift = min(k * 4.0, 60.0)
            pos = reach + [side * speed * 0.6 * k, 0]
            agent.append(pos)
            models.append("person")
            patient.append(pos + [side * 45, 50 - lift])
    return [Actor("agent", np.array(agent), models),
            Actor("patient", np.array(patient), ["cardboard-box"] * n)]


def _carry(rng, n):
    side = rng.choice([-1.0, 1.0])
    speed = rng.uniform(5, 8)
    start = np.array([640 - side * rng.uniform(150, 300), rng.uniform(250, 450)])
    agent = _line(start, [side * speed, rng.normal(0, 0.3)], n)
    patient = agent + [side * 45, 5]
    return [Actor("agent", agent, ["person"] * n),
            Actor("patient", patient, ["cardboard-box"] * n)]


def _collide(rng, n):
    side = rng.choice([-1.0, 1.0])
    y = rng.uniform(300, 550)
    hit_x = rng.uniform(500, 780)
    speed = rng.uniform(10, 14)
    contact = int(n * 0.5)
    a, b = [], []
    for t in range(n):
        if t <= contact:
            a.append([hit_x - side * (30 + speed * (contact - t)), y])
            b.append([hit_x, y])
        else:
            k = t - contact
            a.append([hit_x - side * 30 + side * 1.5 * k, y])
            b.append([hit_x + side * 0.8 * speed * k, y])
    red = (float(rng.uniform(-8, 8)) % 360.0, 0.9, 0.6)
    blue = (float(rng.uniform(232, 248)), 0.9, 0.6)
    return [Actor("agent", np.array(a), ["small-ball"] * n, red),
            Actor("patient", np.array(b), ["small-ball"] * n, blue)]


GENERATORS = {"approach": _approach, "flee": _flee, "jump": _jump, "pickup": _pickup,
              "carry": _carry, "collide": _collide}


def _parts(model, w, h, rng):
    template = CROUCH_PARTS if model == "person-crouch" else UPRIGHT_PARTS
    offs = (template + rng.normal(0, PART_NOISE, template.shape)) * [w, h]
    return tuple((float(x), float(y)) for x, y in offs)


def _box(center, model):
    w, h = SIZES[model]
    return Box(center[0] - w / 2, center[1] - h / 2, center[0] + w / 2, center[1] + h / 2)


def _clip(center, model):
    w, h = SIZES[model]
    return np.clip(center, [w / 2 + 1, h / 2 + 1], [FRAME_SIZE[0] - w / 2 - 1,
                                                     FRAME_SIZE[1] - h / 2 - 1])


def generate(scenario, video, seed):
    """One synthetic video: a detection stream and its ground-truth label record."""
    if scenario not in GENERATORS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {sorted(GENERATORS)}")
    rng = np.random.default_rng(seed)
    n = int(rng.integers(40, 61))
    actors = GENERATORS[scenario](rng, n)
    for a in actors:
        a.centers = np.array([_clip(c, m) for c, m in zip(a.centers, a.models)])
    classes = sorted({m for a in actors for m in a.models})
    per_frame = []
    for t in range(n):
        dets = []
        for a in actors:
            if rng.random() < MISS_RATE:
                continue
            model = a.models[t]
            w, h = SIZES[model]
            c = a.centers[t] + rng.normal(0, CENTER_NOISE, 2)
            nxt = a.centers[min(t + 1, n - 1)] - a.centers[t]
            flow = tuple(float(v) for v in nxt + rng.normal(0, FLOW_NOISE, 2))
            dets.append(Detection(
                frame=t, model=model, score=float(rng.normal(*TRUE_SCORE)), box=_box(c, model),
                parts=_parts(model, w, h, rng) if model.startswith("person") else (),
                root_filter=ROOT_FILTERS[model], flow=flow, hsv=a.hsv))
        for _ in range(int(rng.integers(1, 4))):
            model = str(rng.choice(classes))
            w, h = SIZES[model]
            c = _clip(rng.uniform([0, 0], FRAME_SIZE), model)
            dets.append(Detection(
                frame=t, model=model, score=float(rng.normal(*DISTRACTOR_SCORE)),
                box=_box(c, model),
                parts=_parts(model, w, h, rng) if model.startswith("person") else (),
                root_filter=int(rng.integers(0, 6)),
                flow=tuple(float(v) for v in rng.normal(0, 2, 2))))
        rng.shuffle(dets)
        per_frame.append(dets)
    stream = DetectionStream(video, n, per_frame, FPS)
    label = {"video": video, "scenario": scenario, "actionClass": SCENARIOS[scenario],
             "roles": {a.role: [_box(c, m).as_list() for c, m in zip(a.centers, a.models)]
                       for a in actors}}
    return stream, label


def video_seed(seed, scenario, index):
    return np.random.SeedSequence([seed, sorted(SCENARIOS).index(scenario), index])


def write_scenario(scenario, count, seed, out_dir, start=0):
    """Write ``count`` streams and label files; returns the list of video ids."""
    videos = []
    for i in range(start, start + count):
        video = f"{scenario}-{i:03d}"
        stream, label = generate(scenario, video, video_seed(seed, scenario, i))
        write_detection_stream(stream, out_dir / f"{video}.jsonl")
        _jsonio.dump_json(label, out_dir / f"{video}.labels.json")
        videos.append(video)
    return videos


def role_overlap(track, boxes):
    """Mean IoU between a track and a ground-truth box sequence over the track's frames."""
    vals = []
    for t, d in zip(track.frames, track.detections):
        if 0 <= t < len(boxes):
            vals.append(iou(d.box, Box(*boxes[t])))
    return float(np.mean(vals)) if vals else 0.0


def match_roles(tracks, label):
    """Map each labelled role to the track that overlaps it best (None if none overlaps)."""
    out = {}
    for role, boxes in sorted(label["roles"].items()):
        scored = [(role_overlap(tr, boxes), tr.track_id, tr) for tr in tracks]
        scored = [s for s in scored if s[0] > 0]
        out[role] = max(scored, key=lambda s: (s[0], s[1]))[2] if scored else None
    return out
