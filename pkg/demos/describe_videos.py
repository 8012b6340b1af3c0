"""
Train, describe and evaluate
============================

The full file-based pipeline on synthetic clips: track, train the posture
codebook and HMM bank, write ranked sentences for held-out clips, then
score the per-action likelihoods with ROC curves.
"""

import json
import tempfile
import time
from pathlib import Path

from vidsent.pipeline import commands
from vidsent.pipeline.config import Config

work = Path(tempfile.mkdtemp(prefix="vidsent-demo-"))
cfg = Config()
start = time.perf_counter()

scenarios = ("approach", "flee", "jump", "pickup", "carry", "collide")
train, test = [], []
for sc in scenarios:
    videos = commands.cmd_synth(cfg, sc, 24, work / "streams")
    train += videos[:20]
    test += videos[20:]
for v in train:
    commands.cmd_track(cfg, work / "streams" / f"{v}.jsonl", work / "tracks")
commands.manifest_from_labels([work / "streams" / f"{v}.labels.json" for v in train],
                              work / "tracks", work / "manifest.json")
paths = commands.cmd_train(cfg, work / "manifest.json", work / "model")
print(f"trained {sorted(paths)} in {time.perf_counter() - start:.0f}s")

# %%
# Three sentences per held-out clip, best first.
cfg.paths.bank, cfg.paths.stats = str(paths["bank"]), str(paths["stats"])
cfg.paths.codebook = str(paths["codebook"])
commands.cmd_describe(cfg, [work / "streams" / f"{v}.jsonl" for v in test],
                      work / "sentences.jsonl", top_k=3, scores_path=work / "scores.jsonl")
for line in (work / "sentences.jsonl").read_text().splitlines():
    rec = json.loads(line)
    if rec["rank"] == 1:
        print(f"{rec['video']:13s} {rec['sentence']}")

# %%
# Likelihood scores of the held-out clips against their labels.
labels = [work / "streams" / f"{v}.labels.json" for v in test]
aucs = commands.cmd_eval(cfg, work / "scores.jsonl", labels, work / "roc.csv")
for action, auc in aucs.items():
    print(f"AUC {action:10s} {auc:.3f}")
print("outputs in", work)
