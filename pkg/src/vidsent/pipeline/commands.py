"""The pipeline stages, each reading and writing plain files."""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import _jsonio
from ..classes import ACTION_CLASSES, is_person
from ..features import FeatureError, single_track_features, two_track_features
from ..hmm import HmmBank, baum_welch_train, forward_log_likelihood, score_video
from ..ingest import cap_per_frame, normalize_scores, parse_detection_stream, project_forward
from ..nlg import (ActionThresholds, ClassStatistics, StabilityThresholds, describe_track,
                   fit_action_thresholds, fit_class_statistics, load_lexicon, plan_sentence,
                   realize)
from ..nlg.stats import DEFAULT_THRESHOLDS
from ..posture import PostureCodebook, part_displacements, train_codebook
from ..roc import roc_curve
from ..tracker import (CoherenceParams, Track, TrackingError, extract_tracks, prune_tracks,
                       smooth_track, track_class_models, track_class_of)
from . import synth
from .config import Config

log = logging.getLogger(__name__)


def _seed_for(seed, *keys):
    """Deterministic integer seed for a named sub-task."""
    words = [int(seed)] + [int.from_bytes(str(k).encode(), "little") % (1 << 32) for k in keys]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


# ---------------------------------------------------------------- tracking

def track_stream(stream, cfg: Config):
    """Normalize, cap, project, then extract, smooth and prune tracks for every class."""
    tc = cfg.tracker
    models = stream.models()
    s = stream
    for m in models:
        s = normalize_scores(s, m, tc.threshold(m))
    s = cap_per_frame(s, tc.cap)
    s = project_forward(s, tc.horizon, tc.cap)
    params = CoherenceParams(tc.lam, tc.min_track_score)
    tracks = []
    for cls in sorted({track_class_of(m) for m in models}):
        try:
            found = extract_tracks(s, track_class_models(cls), params)
        except TrackingError as exc:
            log.warning("%s/%s: no track (%s)", stream.video, cls, exc)
            continue
        found = [smooth_track(t, tc.smooth_window) for t in found]
        tracks.extend(prune_tracks(found, tc.variance_limit, tc.modality_bandwidth))
    return tracks


def track_path(out_dir, track: Track):
    return Path(out_dir) / f"{track.video}.{track.track_id.replace(':', '.')}.json"


def cmd_track(cfg: Config, stream_path, out_dir):
    """Write one JSON file per surviving track; returns the written paths."""
    stream = parse_detection_stream(stream_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tracks = track_stream(stream, cfg)
    if not tracks:
        log.warning("%s: no tracks", stream.video)
    paths = []
    for tr in tracks:
        p = track_path(out_dir, tr)
        tr.save(p)
        paths.append(p)
    return paths


# ---------------------------------------------------------------- codebook and features

def part_vectors(tracks):
    rows = [part_displacements(d) for tr in tracks if is_person(tr.object_class)
            for d in tr.detections if d.parts]
    if not rows:
        return np.zeros((0, 0))
    width = Counter(len(r) for r in rows).most_common(1)[0][0]
    return np.array([r for r in rows if len(r) == width])


def cmd_train_codebook(cfg: Config, track_paths, out_path):
    tracks = [Track.load(p) for p in track_paths]
    x = part_vectors(tracks)
    if len(x) == 0:
        raise ValueError("no person detections with parts in the given tracks")
    cb = train_codebook(x, cfg.posture.k, seed=cfg.seed)
    cb.save(out_path)
    return cb


def _load_codebook(path):
    return PostureCodebook.load(path) if path else None


def featurize(tracks, cb, cfg: Config):
    if len(tracks) == 1:
        s = single_track_features(tracks[0], cb, cfg.fps)
    elif len(tracks) == 2:
        s = two_track_features(tracks[0], tracks[1], cb, cfg.fps)
    else:
        raise FeatureError("featurize takes one track or an agent/patient pair")
    return s.masked(cfg.hmm.mask)


def cmd_featurize(cfg: Config, track_paths, out_path):
    s = featurize([Track.load(p) for p in track_paths], _load_codebook(cfg.paths.codebook), cfg)
    s.save(out_path)
    return s


# ---------------------------------------------------------------- training

@dataclass
class TrainingItem:
    video: str
    action_class: str
    agent: Track
    patient: Track | None = None


def _resolve(base, p):
    p = Path(p)
    return p if p.is_absolute() else Path(base) / p


def load_manifest(path):
    """Read ``{"arity1": [...], "arity2": [...]}`` item lists of track files."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        rec = json.load(fh)
    out = {1: [], 2: []}
    cache = {}

    def load(p):
        p = _resolve(path.parent, p).resolve()
        if p not in cache:
            cache[p] = Track.load(p)
        return cache[p]

    for arity in (1, 2):
        for i, item in enumerate(rec.get(f"arity{arity}", [])):
            video, action = item.get("video", f"item{i}"), item.get("actionClass")
            if action not in ACTION_CLASSES:
                log.warning("arity%d item %s: unknown action class %r, skipped", arity, video,
                            action)
                continue
            agent = load(item["agent"])
            patient = load(item["patient"]) if item.get("patient") else None
            if arity == 2 and patient is None:
                log.warning("arity2 item %s has a single track, skipped", video)
                continue
            out[arity].append(TrainingItem(video, action, agent, patient))
    return out


def _item_series(item, arity, cb, cfg):
    if arity == 1:
        return featurize([item.agent], cb, cfg)
    return featurize([item.agent, item.patient], cb, cfg)


def train_artifacts(items, cfg: Config):
    """Codebook, HMM bank and wording statistics from arity-keyed training items."""
    all_tracks = {id(t): t for arity in (1, 2) for it in items[arity]
                  for t in (it.agent, it.patient) if t is not None}
    tracks = [all_tracks[k] for k in sorted(all_tracks, key=lambda k: (
        all_tracks[k].video, all_tracks[k].track_id))]
    x = part_vectors(tracks)
    cb = train_codebook(x, cfg.posture.k, seed=cfg.seed) if len(x) else None

    bank = HmmBank(mask=cfg.hmm.mask)
    per_frame = defaultdict(list)
    for arity in (1, 2):
        groups = defaultdict(list)
        for it in items[arity]:
            groups[it.action_class].append(it)
        for action in sorted(groups):
            series = []
            for it in groups[action]:
                try:
                    series.append((it, _item_series(it, arity, cb, cfg)))
                except FeatureError as exc:
                    log.warning("%s (%s/%d): %s, skipped", it.video, action, arity, exc)
            if not series:
                log.warning("no usable training data for %s/%d", action, arity)
                continue
            schema = Counter(s.schema for _, s in series).most_common(1)[0][0]
            for it, s in series:
                if s.schema != schema:
                    log.warning("%s (%s/%d): feature schema differs from the class majority, "
                                "skipped", it.video, action, arity)
            data = [s for _, s in series if s.schema == schema]
            model = baum_welch_train(
                data, n_states=cfg.hmm.n_states, seed=_seed_for(cfg.seed, action, arity),
                max_iter=cfg.hmm.max_iter, tol=cfg.hmm.tol, restarts=cfg.hmm.restarts,
                action_class=action, arity=arity)
            bank.add(model)
            per_frame[action].extend(forward_log_likelihood(model, s) / len(s) for s in data)
    for action, vals in sorted(per_frame.items()):
        bank.thresholds[action] = float(np.quantile(vals, cfg.hmm.threshold_quantile))

    cs = fit_class_statistics([describe_track(t, cfg.fps) for t in tracks])
    speeds = defaultdict(list)
    for arity in (1, 2):
        for it in items[arity]:
            v = describe_track(it.agent, cfg.fps).velocities
            speeds[it.action_class].extend(np.hypot(v[:, 0], v[:, 1]))
    thresholds = {a: fit_action_thresholds(v) for a, v in sorted(speeds.items())}
    return cb, bank, cs, thresholds


def save_stats(path, cs: ClassStatistics, thresholds):
    _jsonio.dump_json({"classStatistics": cs.to_json(),
                       "actionThresholds": {a: t.to_json() for a, t in thresholds.items()}},
                      path)


def load_stats(path):
    if not path:
        return ClassStatistics(), {}
    with open(path, encoding="utf-8") as fh:
        rec = json.load(fh)
    return (ClassStatistics.from_json(rec.get("classStatistics", {})),
            {a: ActionThresholds.from_json(t) for a, t in rec.get("actionThresholds", {}).items()})


def cmd_train(cfg: Config, manifest_path, out_dir):
    """Train and write codebook.json, bank.json and stats.json into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cb, bank, cs, thresholds = train_artifacts(load_manifest(manifest_path), cfg)
    paths = {"bank": out_dir / "bank.json", "stats": out_dir / "stats.json"}
    if cb is not None:
        paths["codebook"] = out_dir / "codebook.json"
        cb.save(paths["codebook"])
    bank.save(paths["bank"])
    save_stats(paths["stats"], cs, thresholds)
    return paths


def manifest_from_labels(label_paths, tracks_dir, out_path):
    """Training manifest pairing each labelled video's roles with its best-overlapping tracks."""
    tracks_dir = Path(tracks_dir)
    rec = {"arity1": [], "arity2": []}
    for lp in sorted(label_paths):
        with open(lp, encoding="utf-8") as fh:
            label = json.load(fh)
        video = label["video"]
        files = sorted(tracks_dir.glob(f"{video}.*.json"))
        tracks = [Track.load(f) for f in files]
        by_id = {t.track_id: f for t, f in zip(tracks, files)}
        roles = synth.match_roles(tracks, label)
        if roles.get("agent") is None:
            log.warning("%s: no track matches the agent, skipped", video)
            continue
        agent = str(by_id[roles["agent"].track_id].resolve())
        rec["arity1"].append({"video": video, "actionClass": label["actionClass"],
                              "agent": agent})
        if "patient" in label["roles"]:
            patient = roles.get("patient")
            rec["arity2"].append({"video": video, "actionClass": label["actionClass"],
                                  "agent": agent,
                                  "patient": str(by_id[patient.track_id].resolve())
                                  if patient is not None else None})
    _jsonio.dump_json(rec, out_path)
    return rec


# ---------------------------------------------------------------- description

@dataclass
class Artifacts:
    bank: HmmBank
    codebook: PostureCodebook | None
    class_stats: ClassStatistics
    thresholds: dict
    lexicon: object

    @classmethod
    def load(cls, cfg: Config):
        if not cfg.paths.bank:
            raise ValueError("paths.bank is required")
        cs, th = load_stats(cfg.paths.stats)
        for action, t in cfg.nlg.thresholds.items():
            th[action] = ActionThresholds.from_json(t)
        return cls(HmmBank.load(cfg.paths.bank), _load_codebook(cfg.paths.codebook), cs, th,
                   load_lexicon(cfg.paths.lexicon))


@dataclass
class VideoResult:
    video: str
    tracks: list
    hypotheses: list
    records: list


def describe_stream(stream, art: Artifacts, cfg: Config, top_k=None) -> VideoResult:
    top_k = cfg.top_k if top_k is None else top_k
    tracks = track_stream(stream, cfg)
    if not tracks:
        log.warning("%s: no surviving tracks, no sentences", stream.video)
        return VideoResult(stream.video, [], [], [])
    fps = stream.fps
    hyps = score_video(art.bank, tracks, art.codebook, fps)
    parts = {t.track_id: describe_track(t, fps) for t in tracks}
    stability = StabilityThresholds(cfg.nlg.score_variance, cfg.nlg.aspect_variance)
    records = []
    for rank, h in enumerate(hyps[:top_k], start=1):
        plan = plan_sentence(h, parts, art.lexicon,
                             art.thresholds.get(h.action_class, DEFAULT_THRESHOLDS),
                             art.class_stats, stability)
        records.append({"video": stream.video, "rank": rank, "actionClass": h.action_class,
                        "sentence": realize(plan)})
    return VideoResult(stream.video, tracks, hyps, records)


_worker_state = {}


def _describe_path(args):
    path, cfg, top_k = args
    art = _worker_state.get("art")
    if art is None:
        art = _worker_state["art"] = Artifacts.load(cfg)
    res = describe_stream(parse_detection_stream(path), art, cfg, top_k)
    scores = {}
    for h in res.hypotheses:
        scores[h.action_class] = max(scores.get(h.action_class, -np.inf), h.per_frame_ll)
    return res.video, res.records, scores


def cmd_describe(cfg: Config, stream_paths, out_path, top_k=None, scores_path=None):
    """Top-k sentences per video as JSON lines, ordered by video id then rank."""
    jobs = [(str(p), cfg, top_k) for p in stream_paths]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_describe_path, jobs))
    else:
        _worker_state.clear()
        results = [_describe_path(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    with open(out_path, "w", encoding="utf-8") as fh:
        for _, records, _ in results:
            for rec in records:
                fh.write(_jsonio.dumps(rec) + "\n")
    if scores_path is not None:
        with open(scores_path, "w", encoding="utf-8") as fh:
            for video, _, scores in results:
                for action in sorted(scores):
                    fh.write(_jsonio.dumps({"video": video, "actionClass": action,
                                            "score": scores[action]}) + "\n")
    return [rec for _, records, _ in results for rec in records]


# ---------------------------------------------------------------- evaluation

def load_labels(paths):
    """Present/absent labels per (video, action).

    Accepts label-set files (``{"labels": {video: {action: bool}}}``), per-video
    label files as written by ``synth``, or directories of the latter.  For
    per-video files every action named by any of them is absent unless labelled.
    """
    labels, positives = defaultdict(dict), {}
    files = []
    for p in paths:
        p = Path(p)
        files.extend(sorted(p.glob("*.labels.json")) if p.is_dir() else [p])
    for f in files:
        with open(f, encoding="utf-8") as fh:
            rec = json.load(fh)
        if "labels" in rec:
            for video, acts in rec["labels"].items():
                labels[video].update({a: bool(v) for a, v in acts.items()})
        else:
            positives[rec["video"]] = rec["actionClass"]
    actions = set(positives.values())
    for video, action in positives.items():
        for a in actions:
            labels[video].setdefault(a, a == action)
    return dict(labels)


def load_scores(path):
    scores = defaultdict(dict)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                scores[rec["video"]][rec["actionClass"]] = float(rec["score"])
    return scores


def evaluate(scores, labels):
    """ROC per action plus a pooled micro average; missing scores count as -inf."""
    curves = {}
    pooled_s, pooled_y = [], []
    actions = sorted({a for acts in labels.values() for a in acts})
    for action in actions:
        s, y = [], []
        for video in sorted(labels):
            if action in labels[video]:
                s.append(scores.get(video, {}).get(action, -np.inf))
                y.append(labels[video][action])
        if len(set(y)) < 2:
            log.warning("action %s has a single label class, skipped", action)
            continue
        curves[action] = roc_curve(s, y)
        pooled_s.extend(s)
        pooled_y.extend(y)
    micro = roc_curve(pooled_s, pooled_y) if len(set(pooled_y)) == 2 else None
    return curves, micro


def cmd_eval(cfg: Config, scores_path, label_paths, out_csv):
    curves, micro = evaluate(load_scores(scores_path), load_labels(label_paths))
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["action", "fpr", "tpr"])
        for action, c in curves.items():
            for f, t in c.points():
                w.writerow([action, repr(f), repr(t)])
        w.writerow(["action", "auc"])
        for action, c in curves.items():
            w.writerow([action, repr(c.auc)])
        if micro is not None:
            w.writerow(["micro", repr(micro.auc)])
    aucs = {a: c.auc for a, c in curves.items()}
    if micro is not None:
        aucs["micro"] = micro.auc
    return aucs


# ---------------------------------------------------------------- synthetic data

def cmd_synth(cfg: Config, scenario, count, out_dir, seed=None, start=0):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return synth.write_scenario(scenario, count, cfg.seed if seed is None else seed, out_dir,
                                start)
