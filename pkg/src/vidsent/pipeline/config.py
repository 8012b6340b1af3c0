"""Run configuration: one JSON file, with dotted command-line overrides."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, is_dataclass


@dataclass
class Paths:
    lexicon: str | None = None      # None: the packaged lexicon
    codebook: str | None = None
    bank: str | None = None
    stats: str | None = None


@dataclass
class TrackerConfig:
    lam: float = 1.0
    min_track_score: float = 1.5    # per-frame objective, coherence included
    cap: int = 12
    horizon: int = 5
    smooth_window: int = 5
    var_threshold: float | None = None      # None: no variance pruning
    modality_bandwidth: float | None = 0.25    # None: 0.1 of each track's score range
    default_threshold: float = -0.5
    thresholds: dict = field(default_factory=dict)  # detector model -> trained threshold

    def threshold(self, model):
        return float(self.thresholds.get(model, self.default_threshold))

    @property
    def variance_limit(self):
        return math.inf if self.var_threshold is None else self.var_threshold


@dataclass
class PostureConfig:
    k: int = 49


@dataclass
class HmmConfig:
    n_states: int = 10
    restarts: int = 3
    max_iter: int = 100
    tol: float = 1e-4
    mask: str = "full"
    threshold_quantile: float = 0.1


@dataclass
class NlgConfig:
    thresholds: dict = field(default_factory=dict)  # action -> {"v1", "v2", "v3"}
    score_variance: float = 0.25
    aspect_variance: float = 0.05


@dataclass
class Config:
    paths: Paths = field(default_factory=Paths)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    posture: PostureConfig = field(default_factory=PostureConfig)
    hmm: HmmConfig = field(default_factory=HmmConfig)
    nlg: NlgConfig = field(default_factory=NlgConfig)
    seed: int = 0
    fps: float = 30.0
    workers: int = 1
    top_k: int = 3

    def to_json(self):
        return asdict(self)


class ConfigError(ValueError):
    pass


def _build(cls, rec, where):
    if not isinstance(rec, dict):
        raise ConfigError(f"{where or 'config'} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(rec) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where or 'config'}")
    kw = {}
    for name, value in rec.items():
        default = getattr(cls(), name)
        kw[name] = _build(type(default), value, f"{where}.{name}".lstrip(".")) \
            if is_dataclass(default) else value
    return cls(**kw)


def config_from_json(rec) -> Config:
    return _build(Config, rec, "")


def load_config(path=None) -> Config:
    if path is None:
        return Config()
    with open(path, encoding="utf-8") as fh:
        try:
            rec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_json(rec)


def _coerce(text, current):
    if isinstance(current, bool):
        if text.lower() in ("1", "true", "yes"):
            return True
        if text.lower() in ("0", "false", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    if isinstance(current, (dict, list)) or text.startswith(("{", "[")):
        return json.loads(text)
    if text.lower() in ("null", "none"):
        return None
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if current is None and _is_number(text):
        return float(text)
    return text


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def apply_override(cfg: Config, dotted, text):
    """Set ``section.field`` (or a top-level field) from its command-line text."""
    *parents, leaf = dotted.replace("-", "_").split(".")
    obj = cfg
    for p in parents:
        if not hasattr(obj, p) or not is_dataclass(getattr(obj, p)):
            raise ConfigError(f"unknown config section {dotted!r}")
        obj = getattr(obj, p)
    if not is_dataclass(obj) or leaf not in {f.name for f in fields(obj)}:
        raise ConfigError(f"unknown config key {dotted!r}")
    try:
        setattr(obj, leaf, _coerce(text, getattr(obj, leaf)))
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad value for {dotted}: {exc}") from None
    return cfg


def override_keys(cfg=None):
    """Every dotted key that can be overridden."""
    cfg = cfg or Config()
    out = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if is_dataclass(v):
            out.extend(f"{f.name}.{g.name}" for g in fields(v))
        else:
            out.append(f.name)
    return out
