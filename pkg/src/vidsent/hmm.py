"""Hidden Markov models with independent mixed-type emissions.

Each feature of a :class:`~vidsent.features.FeatureSchema` gets its own output
distribution per state: categorical for discrete features, univariate Gaussian
for linear ones and von Mises for angular ones.  Training is Baum-Welch EM in
log space.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _jsonio
from .circular import KAPPA_MAX, LOG_2PI, fit_von_mises, log_i0
from .features import (ANGULAR, DISCRETE, LINEAR, FeatureError, FeatureSchema,
                       single_track_features, two_track_features)

log = logging.getLogger(__name__)

FORMAT_VERSION = "vidsent-hmm-bank/1"
VAR_FLOOR = 1e-4
SMOOTHING = 1.0
MIN_WEIGHT = 1e-10


class SchemaMismatch(FeatureError):
    pass


def logsumexp(a, axis):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


@dataclass
class Emissions:
    """Per-state output distributions, stacked along a leading state axis."""

    schema: FeatureSchema
    log_probs: list        # one (S, cardinality) array per discrete feature
    means: np.ndarray      # (S, n_linear)
    variances: np.ndarray  # (S, n_linear)
    mu: np.ndarray         # (S, n_angular)
    kappa: np.ndarray      # (S, n_angular)

    @property
    def n_states(self):
        return self.means.shape[0]

    def log_density(self, x):
        """Log density of rows ``x`` (T, F) under each state, shape (T, S)."""
        sch = self.schema
        x = np.atleast_2d(x)
        out = np.zeros((x.shape[0], self.n_states))
        lin = sch.indices(LINEAR)
        if lin.size:
            d = x[:, None, lin] - self.means[None]
            out -= 0.5 * np.sum(d * d / self.variances[None] + np.log(2 * np.pi * self.variances)[None],
                                axis=2)
        ang = sch.indices(ANGULAR)
        if ang.size:
            out += np.sum(self.kappa[None] * np.cos(x[:, None, ang] - self.mu[None])
                          - LOG_2PI - log_i0(self.kappa)[None], axis=2)
        for j, i in enumerate(sch.indices(DISCRETE)):
            lp = self.log_probs[j]
            v = x[:, i]
            if np.any(v < 0) or np.any(v >= lp.shape[1]) or np.any(v != np.round(v)):
                raise ValueError(f"discrete value outside [0, {lp.shape[1]}) "
                                 f"for {sch.features[i].name}")
            out += lp[:, v.astype(int)].T
        return out

    def state(self, s):
        """Single-state copy."""
        return Emissions(self.schema, [lp[s:s + 1] for lp in self.log_probs],
                         self.means[s:s + 1], self.variances[s:s + 1],
                         self.mu[s:s + 1], self.kappa[s:s + 1])

    def log_prior(self, smoothing=SMOOTHING):
        """Dirichlet log prior (up to a constant) matching add-``smoothing`` estimates."""
        if smoothing == 0:
            return 0.0
        return smoothing * float(sum(lp.sum() for lp in self.log_probs))

    def to_json(self):
        return {"logProbs": [lp for lp in self.log_probs], "means": self.means,
                "variances": self.variances, "mu": self.mu, "kappa": self.kappa}

    @classmethod
    def from_json(cls, schema, rec):
        s = len(rec["means"])

        def arr(key, width):
            a = np.array(rec[key], dtype=float)
            return a.reshape(s, width)

        return cls(schema, [np.array(lp, dtype=float) for lp in rec["logProbs"]],
                   arr("means", len(schema.indices(LINEAR))),
                   arr("variances", len(schema.indices(LINEAR))),
                   arr("mu", len(schema.indices(ANGULAR))),
                   arr("kappa", len(schema.indices(ANGULAR))))


def emission_log_density(em: Emissions, row):
    """Summed per-feature log density of one row (a float for a single-state model).

    With several states, returns one value per state; a (T, F) input gives (T, S).
    """
    row = np.asarray(row, dtype=float)
    out = em.log_density(row)
    if row.ndim == 1:
        out = out[0]
        return float(out[0]) if out.size == 1 else out
    return out


@dataclass
class HmmModel:
    log_init: np.ndarray
    log_trans: np.ndarray
    emissions: Emissions
    action_class: str = ""
    arity: int = 1
    history: list = field(default_factory=list, repr=False)

    @property
    def n_states(self):
        return self.log_init.size

    @property
    def schema(self):
        return self.emissions.schema

    def to_json(self):
        return {"actionClass": self.action_class, "arity": self.arity,
                "nStates": self.n_states, "schema": self.schema.to_json(),
                "logInit": self.log_init, "logTrans": self.log_trans,
                "emissions": self.emissions.to_json()}

    @classmethod
    def from_json(cls, rec):
        schema = FeatureSchema.from_json(rec["schema"])
        s = int(rec["nStates"])
        return cls(np.array(rec["logInit"], dtype=float),
                   np.array(rec["logTrans"], dtype=float).reshape(s, s),
                   Emissions.from_json(schema, rec["emissions"]),
                   rec.get("actionClass", ""), int(rec.get("arity", 1)))


def _check_schema(m: HmmModel, series):
    if series.schema != m.schema:
        raise SchemaMismatch(f"series schema does not match model {m.action_class}/{m.arity}")


def forward_log_likelihood(m: HmmModel, s) -> float:
    """log P(series | model) by the forward recurrence in log space."""
    _check_schema(m, s)
    b = m.emissions.log_density(s.values)
    alpha = m.log_init + b[0]
    for t in range(1, len(b)):
        alpha = logsumexp(alpha[:, None] + m.log_trans, axis=0) + b[t]
    return float(logsumexp(alpha, axis=0))


def sample_series(m: HmmModel, length, rng, fps=30.0):
    """Draw one feature series of ``length`` frames from the model."""
    from .features import FeatureSeries, wrap_angle
    em, sch = m.emissions, m.schema
    states = np.empty(length, dtype=int)
    states[0] = rng.choice(m.n_states, p=np.exp(m.log_init))
    trans = np.exp(m.log_trans)
    for t in range(1, length):
        states[t] = rng.choice(m.n_states, p=trans[states[t - 1]])
    x = np.zeros((length, len(sch)))
    lin, ang = sch.indices(LINEAR), sch.indices(ANGULAR)
    x[:, lin] = rng.normal(em.means[states], np.sqrt(em.variances[states]))
    if ang.size:
        x[:, ang] = wrap_angle(rng.vonmises(em.mu[states], em.kappa[states]))
    for j, i in enumerate(sch.indices(DISCRETE)):
        p = np.exp(em.log_probs[j])
        x[:, i] = [rng.choice(p.shape[1], p=p[st] / p[st].sum()) for st in states]
    return FeatureSeries(sch, x, fps), states


# ---------------------------------------------------------------- training

def _pad(blocks, lengths):
    n, tmax = len(blocks), max(lengths)
    s = blocks[0].shape[1]
    out = np.zeros((n, tmax, s))
    for i, b in enumerate(blocks):
        out[i, :len(b)] = b
    return out


def forward_backward(log_init, log_trans, b, lengths):
    """Batched log-space forward-backward over padded emissions ``b`` (N, T, S).

    Returns (log-likelihoods (N,), log alpha, log beta).
    """
    n, tmax, s = b.shape
    lengths = np.asarray(lengths)
    alpha = np.full((n, tmax, s), -np.inf)
    beta = np.zeros((n, tmax, s))
    alpha[:, 0] = log_init + b[:, 0]
    for t in range(1, tmax):
        live = (t < lengths)[:, None]
        step = logsumexp(alpha[:, t - 1, :, None] + log_trans[None], axis=1) + b[:, t]
        alpha[:, t] = np.where(live, step, alpha[:, t - 1])
    ll = logsumexp(alpha[np.arange(n), lengths - 1], axis=1)
    for t in range(tmax - 2, -1, -1):
        live = (t < lengths - 1)[:, None]
        step = logsumexp(log_trans[None] + (b[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
        beta[:, t] = np.where(live, step, 0.0)
    return ll, alpha, beta


def _fit_emissions(x, w, schema, old=None, var_floor=VAR_FLOOR, kappa_max=KAPPA_MAX,
                   smoothing=SMOOTHING):
    """Weighted M-step for emissions: x (M, F) rows, w (M, S) state weights.

    States with negligible weight keep their ``old`` parameters.  For von Mises
    concentration the approximate estimate is kept only if it improves the
    expected log-likelihood over the previous value.
    """
    n_states = w.shape[1]
    tot = w.sum(axis=0)
    dead = tot < MIN_WEIGHT
    safe = np.where(dead, 1.0, tot)

    log_probs = []
    for j, i in enumerate(schema.indices(DISCRETE)):
        card = schema.features[i].cardinality
        onehot = np.zeros((len(x), card))
        onehot[np.arange(len(x)), x[:, i].astype(int)] = 1.0
        counts = w.T @ onehot + smoothing
        lp = np.log(counts / counts.sum(axis=1, keepdims=True))
        if old is not None:
            lp[dead] = old.log_probs[j][dead]
        log_probs.append(lp)

    lin = schema.indices(LINEAR)
    xl = x[:, lin]
    means = (w.T @ xl) / safe[:, None]
    var = np.empty_like(means)
    for s in range(n_states):
        d = xl - means[s]
        var[s] = (w[:, s] @ (d * d)) / safe[s]
    var = np.maximum(var, var_floor)

    ang = schema.indices(ANGULAR)
    mu = np.zeros((n_states, ang.size))
    kappa = np.zeros((n_states, ang.size))
    xa = x[:, ang]
    for s in range(n_states):
        if dead[s]:
            continue
        for j in range(ang.size):
            mu[s, j], kappa[s, j] = fit_von_mises(xa[:, j], w[:, s], kappa_max)
            if old is not None:
                c = float(w[:, s] @ np.cos(xa[:, j] - mu[s, j]))
                k_old = old.kappa[s, j]
                q_new = kappa[s, j] * c - tot[s] * log_i0(kappa[s, j])
                q_old = k_old * c - tot[s] * log_i0(k_old)
                if q_old > q_new:
                    kappa[s, j] = k_old
    if old is not None and dead.any():
        means[dead], var[dead] = old.means[dead], old.variances[dead]
        mu[dead], kappa[dead] = old.mu[dead], old.kappa[dead]
    return Emissions(schema, log_probs, means, var, mu, kappa)


def _block_weights(lengths, n_states):
    """One-hot state weights assigning each series' frames to equal consecutive blocks."""
    rows = []
    for n in lengths:
        w = np.zeros((n, n_states))
        w[np.arange(n), (np.arange(n) * n_states) // n] = 1.0
        rows.append(w)
    return np.vstack(rows)


def _em_run(x, lengths, schema, n_states, rng, max_iter, tol, var_floor, kappa_max,
            smoothing):
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    w0 = _block_weights(lengths, n_states)
    # states that received no frames start from the pooled fit
    pooled = _fit_emissions(x, np.ones((len(x), 1)), schema, None, var_floor, kappa_max,
                            smoothing)
    em = _fit_emissions(x, w0, schema, None, var_floor, kappa_max, smoothing)
    empty = w0.sum(axis=0) == 0
    if empty.any():
        for j in range(len(em.log_probs)):
            em.log_probs[j][empty] = pooled.log_probs[j][0]
        em.means[empty], em.variances[empty] = pooled.means[0], pooled.variances[0]
        em.mu[empty], em.kappa[empty] = pooled.mu[0], pooled.kappa[0]
    log_init = np.log(rng.dirichlet(np.ones(n_states)))
    log_trans = np.log(rng.dirichlet(np.ones(n_states), size=n_states))

    history = []
    for it in range(max_iter + 1):
        b_flat = em.log_density(x)
        b = _pad([b_flat[offsets[i]:offsets[i + 1]] for i in range(len(lengths))], lengths)
        ll, alpha, beta = forward_backward(log_init, log_trans, b, lengths)
        objective = float(ll.sum()) + em.log_prior(smoothing)
        history.append(objective)
        if it == max_iter or (it > 0 and objective - history[-2] < tol):
            break
        # E-step statistics
        gamma_rows, xi = [], np.zeros((n_states, n_states))
        for i, n in enumerate(lengths):
            g = alpha[i, :n] + beta[i, :n] - ll[i]
            gamma_rows.append(np.exp(g))
            if n > 1:
                lx = (alpha[i, :n - 1, :, None] + log_trans[None]
                      + (b[i, 1:n] + beta[i, 1:n])[:, None, :] - ll[i])
                xi += np.exp(lx).sum(axis=0)
        gamma = np.vstack(gamma_rows)
        # M-step
        first = np.array([g[0] for g in gamma_rows]).sum(axis=0)
        with np.errstate(divide="ignore"):
            log_init = np.log(first / first.sum())
            row = xi.sum(axis=1, keepdims=True)
            new_trans = np.log(xi / np.where(row > 0, row, 1.0))
        log_trans = np.where(row > MIN_WEIGHT, new_trans, log_trans)
        em = _fit_emissions(x, gamma, schema, em, var_floor, kappa_max, smoothing)
    return HmmModel(log_init, log_trans, em), history


def baum_welch_train(data, n_states=10, schema=None, seed=0, max_iter=100, tol=1e-4,
                     restarts=3, action_class="", arity=1, var_floor=VAR_FLOOR,
                     kappa_max=KAPPA_MAX, smoothing=SMOOTHING) -> HmmModel:
    """Fit an HMM to feature series by EM; the best of ``restarts`` runs is returned.

    The tracked objective is the total log-likelihood plus the Dirichlet log prior
    implied by add-``smoothing`` estimates of the discrete distributions; it is
    non-decreasing across iterations.  ``model.history`` holds the objective trace
    of every restart.
    """
    data = list(data)
    if not data:
        raise ValueError("no training series")
    schema = schema if schema is not None else data[0].schema
    for s in data:
        if s.schema != schema:
            raise SchemaMismatch("training series do not share one schema")
    x = np.vstack([s.values for s in data])
    lengths = [len(s) for s in data]
    rng = np.random.default_rng(seed)
    best, best_obj, traces = None, -np.inf, []
    for _ in range(max(1, restarts)):
        m, hist = _em_run(x, lengths, schema, n_states, rng, max_iter, tol, var_floor,
                          kappa_max, smoothing)
        traces.append(hist)
        if best is None or hist[-1] > best_obj:
            best, best_obj = m, hist[-1]
    best.action_class, best.arity, best.history = action_class, arity, traces
    return best


# ---------------------------------------------------------------- banks and scoring

@dataclass
class HmmBank:
    models: dict = field(default_factory=dict)      # (action, arity) -> HmmModel
    thresholds: dict = field(default_factory=dict)  # action -> per-frame log-likelihood
    mask: str = "full"

    def add(self, model: HmmModel):
        key = (model.action_class, model.arity)
        if key in self.models:
            raise ValueError(f"duplicate model for {key}")
        self.models[key] = model

    def of_arity(self, arity):
        return [m for (a, k), m in sorted(self.models.items()) if k == arity]

    def to_json(self):
        return {"version": FORMAT_VERSION, "mask": self.mask,
                "thresholds": dict(sorted(self.thresholds.items())),
                "models": [m.to_json() for _, m in sorted(self.models.items())]}

    @classmethod
    def from_json(cls, rec):
        if rec.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported bank version {rec.get('version')!r}")
        bank = cls(thresholds={k: float(v) for k, v in rec.get("thresholds", {}).items()},
                   mask=rec.get("mask", "full"))
        for m in rec["models"]:
            bank.add(HmmModel.from_json(m))
        return bank

    def save(self, path):
        _jsonio.dump_json(self.to_json(), path)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass
class EventHypothesis:
    action_class: str
    arity: int
    agent: str
    patient: str | None
    per_frame_ll: float
    total_ll: float = 0.0
    n_frames: int = 0

    def __post_init__(self):
        if (self.arity == 2) != (self.patient is not None):
            raise ValueError("arity must match presence of a patient")


def _score(model, series):
    try:
        ll = forward_log_likelihood(model, series)
    except SchemaMismatch:
        return None
    return ll


def score_video(bank: HmmBank, tracks, cb=None, fps=30.0):
    """Best track-to-role mapping per model, sorted by per-frame log-likelihood.

    With two or more tracks only two-track models are tried; a single track is
    tested against the one-track models.
    """
    tracks = list(tracks)
    if not tracks:
        raise ValueError("no tracks to score")
    single = {t.track_id: single_track_features(t, cb, fps) for t in tracks}
    hyps = []
    if len(tracks) >= 2:
        pair_cache = {}
        for model in bank.of_arity(2):
            best = None
            for a in tracks:
                for p in tracks:
                    if a is p:
                        continue
                    key = (a.track_id, p.track_id)
                    if key not in pair_cache:
                        try:
                            pair_cache[key] = two_track_features(a, p, cb, fps, single).masked(bank.mask)
                        except FeatureError:
                            pair_cache[key] = None
                    s = pair_cache[key]
                    if s is None:
                        continue
                    ll = _score(model, s)
                    if ll is None:
                        continue
                    h = EventHypothesis(model.action_class, 2, a.track_id, p.track_id,
                                        ll / len(s), ll, len(s))
                    if best is None or h.per_frame_ll > best.per_frame_ll:
                        best = h
            if best is not None:
                hyps.append(best)
        if not hyps:
            log.warning("no two-track model applies to %s; falling back to one-track models",
                        tracks[0].video)
    if not hyps:
        for model in bank.of_arity(1):
            best = None
            for tr in tracks:
                s = single[tr.track_id].masked(bank.mask)
                ll = _score(model, s)
                if ll is None:
                    continue
                h = EventHypothesis(model.action_class, 1, tr.track_id, None, ll / len(s), ll,
                                    len(s))
                if best is None or h.per_frame_ll > best.per_frame_ll:
                    best = h
            if best is not None:
                hyps.append(best)
    hyps.sort(key=lambda h: (-h.per_frame_ll, h.action_class))
    return hyps


def judge(bank: HmmBank, hyps):
    """Present/absent per action: best per-frame log-likelihood >= the action threshold."""
    best = {}
    for h in hyps:
        if h.action_class not in best or h.per_frame_ll > best[h.action_class]:
            best[h.action_class] = h.per_frame_ll
    actions = sorted(set(bank.thresholds) | {a for a, _ in bank.models})
    return {a: a in best and best[a] >= bank.thresholds.get(a, math.inf) for a in actions}
