import json
import logging

import numpy as np
import pytest

from vidsent.features import two_track_features
from vidsent.hmm import HmmBank, baum_welch_train, score_video
from vidsent.ingest import Box, Detection, DetectionStream, parse_detection_stream, \
    write_detection_stream
from vidsent.nlg import describe_track, plan_sentence, realize
from vidsent.pipeline import cli, commands, synth
from vidsent.pipeline.config import Config, ConfigError, apply_override, load_config
from vidsent.roc import roc_curve
from vidsent.tracker import Track


def small_config(**over):
    cfg = Config()
    cfg.hmm.n_states, cfg.hmm.restarts, cfg.hmm.max_iter = 3, 1, 30
    cfg.posture.k = 8
    for k, v in over.items():
        apply_override(cfg, k, str(v))
    return cfg


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("trained")
    cfg = small_config(**{"hmm.mask": "I"})
    for sc in ("approach", "flee", "jump"):
        commands.cmd_synth(cfg, sc, 10, root / "streams")
    for p in sorted((root / "streams").glob("*.jsonl")):
        commands.cmd_track(cfg, p, root / "tracks")
    commands.manifest_from_labels(sorted((root / "streams").glob("*-00[0-7].labels.json")),
                                  root / "tracks", root / "manifest.json")
    paths = commands.cmd_train(cfg, root / "manifest.json", root / "model")
    cfg.paths.bank, cfg.paths.stats = str(paths["bank"]), str(paths["stats"])
    cfg.paths.codebook = str(paths["codebook"])
    held_out = sorted((root / "streams").glob("*-00[89].jsonl"))
    return root, cfg, held_out


# ---------------------------------------------------------------- config

def test_override_coerces_to_field_type():
    cfg = Config()
    apply_override(cfg, "tracker.lam", "2")
    apply_override(cfg, "hmm.n_states", "4")
    apply_override(cfg, "tracker.var_threshold", "0.5")
    apply_override(cfg, "nlg.thresholds", '{"approached": {"v1": 1, "v2": 9, "v3": 5}}')
    apply_override(cfg, "seed", "7")
    assert cfg.tracker.lam == 2.0 and isinstance(cfg.tracker.lam, float)
    assert cfg.hmm.n_states == 4 and cfg.seed == 7
    assert cfg.tracker.variance_limit == 0.5
    assert cfg.nlg.thresholds["approached"]["v2"] == 9


@pytest.mark.parametrize("key", ["tracker.nope", "nope.lam", "seed.x"])
def test_override_unknown_key(key):
    with pytest.raises(ConfigError):
        apply_override(Config(), key, "1")


def test_override_bad_value():
    with pytest.raises(ConfigError):
        apply_override(Config(), "hmm.n_states", "many")


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"tracker": {"lam": 0.5}, "seed": 3}))
    cfg = load_config(p)
    assert cfg.tracker.lam == 0.5 and cfg.seed == 3 and cfg.hmm.n_states == 10
    p.write_text(json.dumps({"tracker": {"lambda": 0.5}}))
    with pytest.raises(ConfigError, match="lambda"):
        load_config(p)
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


# ---------------------------------------------------------------- synth

def _distance_slope(label):
    a = np.array(label["roles"]["agent"], float)
    p = np.array(label["roles"]["patient"], float)
    ca = (a[:, :2] + a[:, 2:]) / 2
    cp = (p[:, :2] + p[:, 2:]) / 2
    return np.diff(np.hypot(*(ca - cp).T)).mean()


@pytest.mark.parametrize("i", range(10))
def test_approach_converges_flee_diverges(i):
    _, lab = synth.generate("approach", "a", synth.video_seed(0, "approach", i))
    assert _distance_slope(lab) < 0
    _, lab = synth.generate("flee", "f", synth.video_seed(0, "flee", i))
    assert _distance_slope(lab) > 0


@pytest.mark.parametrize("i", range(5))
def test_pickup_patient_rests_then_comoves(i):
    _, lab = synth.generate("pickup", "p", synth.video_seed(0, "pickup", i))
    a = np.array(lab["roles"]["agent"], float)
    p = np.array(lab["roles"]["patient"], float)
    ca = (a[:, :2] + a[:, 2:]) / 2
    cp = (p[:, :2] + p[:, 2:]) / 2
    n = len(p)
    rest = slice(0, int(n * 0.4))
    assert np.ptp(cp[rest], axis=0).max() == 0
    # agent closes in on the resting box
    d = np.hypot(*(ca - cp).T)
    assert d[rest][-1] < d[0]
    # after the lift the horizontal motion is shared
    late = slice(int(n * 0.65) + 1, n)
    np.testing.assert_allclose(np.diff(cp[late, 0]), np.diff(ca[late, 0]), atol=1e-9)
    assert np.abs(np.diff(cp[late, 0])).mean() > 1


def test_jump_has_single_role():
    stream, lab = synth.generate("jump", "j", synth.video_seed(0, "jump", 0))
    assert set(lab["roles"]) == {"agent"}
    assert len(lab["roles"]["agent"]) == stream.frame_count


def test_synth_is_seeded(tmp_path):
    commands.cmd_synth(Config(), "collide", 2, tmp_path / "a", seed=5)
    commands.cmd_synth(Config(), "collide", 2, tmp_path / "b", seed=5)
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_unknown_scenario():
    with pytest.raises(ValueError):
        synth.generate("dance", "x", 0)


# ---------------------------------------------------------------- track

def test_track_two_object_stream(tmp_path):
    stream, lab = synth.generate("carry", "carry-x", synth.video_seed(0, "carry", 0))
    write_detection_stream(stream, tmp_path / "s.jsonl")
    paths = commands.cmd_track(Config(), tmp_path / "s.jsonl", tmp_path / "t")
    assert len(paths) == 2
    tracks = [Track.load(p) for p in paths]
    roles = synth.match_roles(tracks, lab)
    assert roles["agent"] is not roles["patient"]
    for role, tr in roles.items():
        assert synth.role_overlap(tr, lab["roles"][role]) > 0.6


def _write_empty(path):
    path.write_text(json.dumps({"video": "empty", "frameCount": 3, "fps": 30}) + "\n"
                    + "".join(json.dumps({"video": "empty", "frame": t, "detections": []}) + "\n"
                              for t in range(3)))


def test_track_empty_stream(tmp_path, capsys):
    _write_empty(tmp_path / "e.jsonl")
    assert commands.cmd_track(Config(), tmp_path / "e.jsonl", tmp_path / "t") == []
    assert cli.main(["track", str(tmp_path / "e.jsonl"), "--out", str(tmp_path / "t")]) == 0
    assert "0 track(s)" in capsys.readouterr().out


def test_track_malformed_file(tmp_path, capsys):
    p = tmp_path / "bad.jsonl"
    p.write_text(json.dumps({"video": "v", "frameCount": 2}) + "\n{oops\n")
    assert cli.main(["track", str(p), "--out", str(tmp_path / "t")]) == cli.EXIT_DATA
    assert "line 2" in capsys.readouterr().err


# ---------------------------------------------------------------- train

def test_train_bank_contents(tmp_path):
    cfg = small_config()
    for sc in ("approach", "flee", "carry", "collide"):
        commands.cmd_synth(cfg, sc, 3, tmp_path / "s")
    for p in sorted((tmp_path / "s").glob("*.jsonl")):
        commands.cmd_track(cfg, p, tmp_path / "t")
    commands.manifest_from_labels(sorted((tmp_path / "s").glob("*.labels.json")),
                                  tmp_path / "t", tmp_path / "m.json")
    paths = commands.cmd_train(cfg, tmp_path / "m.json", tmp_path / "out")
    bank = HmmBank.load(paths["bank"])
    assert sorted(bank.models) == sorted((a, k) for a in ("approached", "fled", "carried",
                                                          "collided") for k in (1, 2))
    assert set(bank.thresholds) == {"approached", "fled", "carried", "collided"}


def test_train_is_deterministic(trained, tmp_path):
    root, cfg, _ = trained
    a = commands.cmd_train(small_config(**{"hmm.mask": "I"}), root / "manifest.json",
                           tmp_path / "a")
    b = commands.cmd_train(small_config(**{"hmm.mask": "I"}), root / "manifest.json",
                           tmp_path / "b")
    assert sorted(a) == sorted(b) == ["bank", "codebook", "stats"]
    for k in a:
        assert a[k].read_bytes() == b[k].read_bytes()
        assert a[k].read_bytes() == (root / "model" / a[k].name).read_bytes()


def test_arity2_single_track_items_rejected(trained, tmp_path, caplog):
    root, _, _ = trained
    rec = json.loads((root / "manifest.json").read_text())
    rec["arity2"].append({"video": "lonely", "actionClass": "approached",
                          "agent": rec["arity1"][0]["agent"], "patient": None})
    (tmp_path / "m.json").write_text(json.dumps(rec))
    with caplog.at_level(logging.WARNING):
        items = commands.load_manifest(tmp_path / "m.json")
    assert "lonely" in caplog.text
    assert len(items[2]) == len(rec["arity2"]) - 1
    assert all(it.patient is not None for it in items[2])


# ---------------------------------------------------------------- describe

def test_describe_top1_one_line_per_video(trained, tmp_path):
    root, cfg, held_out = trained
    recs = commands.cmd_describe(cfg, held_out, tmp_path / "d.jsonl", top_k=1)
    lines = (tmp_path / "d.jsonl").read_text().splitlines()
    assert len(lines) == len(recs) == len(held_out)
    videos = [json.loads(x)["video"] for x in lines]
    assert videos == sorted(videos)
    assert all(json.loads(x)["rank"] == 1 for x in lines)


def test_describe_approach_uses_approach_template(trained, tmp_path):
    root, cfg, held_out = trained
    approach = [p for p in held_out if p.name.startswith("approach")]
    commands.cmd_describe(cfg, approach, tmp_path / "d.jsonl", top_k=1)
    for line in (tmp_path / "d.jsonl").read_text().splitlines():
        rec = json.loads(line)
        assert rec["actionClass"] == "approached"
        assert " approached " in rec["sentence"]


def test_describe_is_byte_identical_and_worker_independent(trained, tmp_path):
    root, cfg, held_out = trained
    commands.cmd_describe(cfg, held_out, tmp_path / "a.jsonl", scores_path=tmp_path / "sa")
    commands.cmd_describe(cfg, held_out, tmp_path / "b.jsonl", scores_path=tmp_path / "sb")
    cfg2 = small_config(workers=2, **{"hmm.mask": "I"})
    cfg2.paths = cfg.paths
    commands.cmd_describe(cfg2, held_out[::-1], tmp_path / "c.jsonl")
    a = (tmp_path / "a.jsonl").read_bytes()
    assert a == (tmp_path / "b.jsonl").read_bytes() == (tmp_path / "c.jsonl").read_bytes()
    assert (tmp_path / "sa").read_bytes() == (tmp_path / "sb").read_bytes()


def test_describe_equals_manual_chain(trained, tmp_path):
    root, cfg, held_out = trained
    path = held_out[0]
    recs = commands.cmd_describe(cfg, [path], tmp_path / "d.jsonl", top_k=3)
    commands.cmd_track(cfg, path, tmp_path / "t")
    tracks = [Track.load(p) for p in sorted((tmp_path / "t").glob("*.json"))]
    art = commands.Artifacts.load(cfg)
    fps = parse_detection_stream(path).fps
    hyps = score_video(art.bank, tracks, art.codebook, fps)
    parts = {t.track_id: describe_track(t, fps) for t in tracks}
    manual = [realize(plan_sentence(h, parts, art.lexicon, art.thresholds[h.action_class],
                                    art.class_stats)) for h in hyps[:3]]
    assert [r["sentence"] for r in recs] == manual


def test_describe_no_tracks_gives_no_sentences(trained, tmp_path, caplog):
    _, cfg, _ = trained
    _write_empty(tmp_path / "e.jsonl")
    with caplog.at_level(logging.WARNING):
        recs = commands.cmd_describe(cfg, [tmp_path / "e.jsonl"], tmp_path / "d.jsonl")
    assert recs == [] and (tmp_path / "d.jsonl").read_text() == ""
    assert "no surviving tracks" in caplog.text


def _two_cars(n=40):
    frames = []
    for t in range(n):
        a = 200.0 + 7 * min(t, 35)
        frames.append([
            Detection(t, "car", 1.0, Box(a - 60, 300, a + 60, 360),
                      flow=(7.0 if t < 35 else 0.0, 0.0)),
            Detection(t, "car", 1.0, Box(640, 300, 760, 360), flow=(0.0, 0.0)),
        ])
    return DetectionStream("cars", n, frames, 30.0)


def test_identical_cars_get_other(tmp_path):
    cfg = small_config()
    cfg.nlg.thresholds = {"approached": {"v1": 10, "v2": 400, "v3": 60}}
    stream = _two_cars()
    write_detection_stream(stream, tmp_path / "cars.jsonl")
    tracks = commands.track_stream(stream, cfg)
    assert len(tracks) == 2
    moving = max(tracks, key=lambda t: np.ptp(t.centers[:, 0]))
    still = [t for t in tracks if t is not moving][0]
    series = two_track_features(moving, still, None, 30.0)
    bank = HmmBank()
    bank.add(baum_welch_train([series], n_states=2, seed=0, action_class="approached", arity=2))
    bank.save(tmp_path / "bank.json")
    cfg.paths.bank = str(tmp_path / "bank.json")
    recs = commands.cmd_describe(cfg, [tmp_path / "cars.jsonl"], tmp_path / "d.jsonl", top_k=1)
    assert recs[0]["sentence"] == "Some car approached some other car from the left."


# ---------------------------------------------------------------- eval

def _write_eval(tmp_path, scores, labels):
    with open(tmp_path / "scores.jsonl", "w") as fh:
        for (v, a), s in scores.items():
            fh.write(json.dumps({"video": v, "actionClass": a, "score": s}) + "\n")
    (tmp_path / "labels.json").write_text(json.dumps({"labels": labels}))


def test_eval_csv_format_and_separable_auc(tmp_path):
    scores, labels = {}, {}
    for i in range(20):
        v = f"v{i}"
        pos = i % 2 == 0
        labels[v] = {"approached": pos, "fled": not pos}
        scores[(v, "approached")] = float(i) + (100 if pos else 0)
        scores[(v, "fled")] = -float(i) if pos else 50.0 + i
    _write_eval(tmp_path, scores, labels)
    aucs = commands.cmd_eval(Config(), tmp_path / "scores.jsonl", [tmp_path / "labels.json"],
                             tmp_path / "roc.csv")
    assert aucs == {"approached": 1.0, "fled": 1.0, "micro": aucs["micro"]}
    rows = (tmp_path / "roc.csv").read_text().splitlines()
    assert rows[0] == "action,fpr,tpr"
    split = rows.index("action,auc")
    assert all(r.split(",")[0] in ("approached", "fled") and len(r.split(",")) == 3
               for r in rows[1:split])
    assert rows[split + 1:] == ["approached,1.0", "fled,1.0", f"micro,{aucs['micro']!r}"]


def test_eval_shuffled_labels_near_chance(tmp_path):
    rng = np.random.default_rng(11)
    n = 400
    s = rng.normal(size=n)
    y = rng.permutation(np.arange(n) < n // 2)
    scores = {(f"v{i}", "carried"): float(s[i]) for i in range(n)}
    labels = {f"v{i}": {"carried": bool(y[i])} for i in range(n)}
    _write_eval(tmp_path, scores, labels)
    aucs = commands.cmd_eval(Config(), tmp_path / "scores.jsonl", [tmp_path / "labels.json"],
                             tmp_path / "roc.csv")
    assert 0.4 <= aucs["carried"] <= 0.6
    assert aucs["carried"] == pytest.approx(roc_curve(s, y).auc, abs=1e-12)


def test_eval_single_class_action_skipped(tmp_path, caplog):
    _write_eval(tmp_path, {("a", "x"): 1.0, ("b", "x"): 2.0, ("a", "y"): 0.0, ("b", "y"): 1.0},
                {"a": {"x": True, "y": True}, "b": {"x": False, "y": True}})
    with caplog.at_level(logging.WARNING):
        aucs = commands.cmd_eval(Config(), tmp_path / "scores.jsonl",
                                 [tmp_path / "labels.json"], tmp_path / "roc.csv")
    assert "x" in aucs and "y" not in aucs
    assert "single label class" in caplog.text


def test_missing_scores_rank_last(tmp_path):
    _write_eval(tmp_path, {("a", "x"): 1.0, ("b", "x"): 0.5},
                {"a": {"x": True}, "b": {"x": True}, "c": {"x": False}})
    aucs = commands.cmd_eval(Config(), tmp_path / "scores.jsonl", [tmp_path / "labels.json"],
                             tmp_path / "roc.csv")
    assert aucs["x"] == 1.0


def test_labels_from_synth_files(tmp_path):
    commands.cmd_synth(Config(), "jump", 2, tmp_path)
    commands.cmd_synth(Config(), "flee", 1, tmp_path)
    labels = commands.load_labels([tmp_path])
    assert labels["jump-000"] == {"jumped": True, "fled": False}
    assert labels["flee-000"] == {"jumped": False, "fled": True}


# ---------------------------------------------------------------- CLI

def test_cli_usage_errors(capsys):
    assert cli.main([]) == cli.EXIT_USAGE
    assert cli.main(["bogus"]) == cli.EXIT_USAGE
    assert cli.main(["synth", "jump", "--out", "x", "--tracker.nope", "1"]) == cli.EXIT_USAGE
    assert cli.main(["synth", "jump", "--out", "x", "--hmm.n_states"]) == cli.EXIT_USAGE
    assert cli.main(["train", "--out", "x"]) == cli.EXIT_USAGE


def test_cli_missing_input_is_data_error(tmp_path):
    assert cli.main(["track", str(tmp_path / "none.jsonl"), "--out", str(tmp_path)]) == \
        cli.EXIT_DATA


def test_cli_internal_error(monkeypatch, tmp_path):
    def boom(*a, **k):
        raise RuntimeError("boom")
    monkeypatch.setattr(commands, "cmd_synth", boom)
    assert cli.main(["synth", "jump", "--out", str(tmp_path)]) == cli.EXIT_INTERNAL


def test_cli_overrides_reach_commands(monkeypatch, tmp_path):
    seen = {}

    def fake(cfg, scenario, count, out, seed, start):
        seen.update(lam=cfg.tracker.lam, seed=cfg.seed, count=count)
        return []
    monkeypatch.setattr(commands, "cmd_synth", fake)
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"seed": 4, "tracker": {"lam": 3.0}}))
    assert cli.main(["--config", str(cfg_file), "synth", "jump", "--out", str(tmp_path),
                     "--count", "2", "--tracker.lam=0.5"]) == 0
    assert seen == {"lam": 0.5, "seed": 4, "count": 2}


def test_cli_round_trip(tmp_path, capsys):
    s, t, m = tmp_path / "s", tmp_path / "t", tmp_path / "m"
    over = ["--hmm.n_states", "2", "--hmm.restarts", "1", "--posture.k", "4"]
    assert cli.main(["synth", "jump", "--count", "3", "--out", str(s)]) == 0
    streams = sorted(str(p) for p in s.glob("*.jsonl"))
    assert cli.main(["track", *streams, "--out", str(t)]) == 0
    labels = sorted(str(p) for p in s.glob("*.labels.json"))
    assert cli.main(["train", "--labels", *labels, "--tracks", str(t), "--out", str(m),
                     *over]) == 0
    tracks = sorted(str(p) for p in t.glob("jump-000.*.json"))
    assert cli.main(["train-codebook", *tracks, "--out", str(tmp_path / "cb.json"),
                     *over]) == 0
    assert cli.main(["featurize", tracks[0], "--out", str(tmp_path / "f.json"),
                     "--paths.codebook", str(m / "codebook.json"), *over]) == 0
    assert cli.main(["describe", *streams, "--out", str(tmp_path / "d.jsonl"), "--top-k", "1",
                     "--scores-out", str(tmp_path / "sc.jsonl"),
                     "--paths.bank", str(m / "bank.json"), "--paths.stats",
                     str(m / "stats.json"), "--paths.codebook", str(m / "codebook.json"),
                     *over]) == 0
    out = [json.loads(x) for x in (tmp_path / "d.jsonl").read_text().splitlines()]
    assert [r["actionClass"] for r in out] == ["jumped"] * 3
    assert cli.main(["eval-roc", "--scores", str(tmp_path / "sc.jsonl"), "--labels", str(s),
                     "--out", str(tmp_path / "roc.csv")]) == 0
