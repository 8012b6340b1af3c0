"""Body-posture codebook: vector quantization of normalized part displacements."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

DEFAULT_K = 49
N_RESTARTS = 5


class NotAPersonError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


def part_displacements(det) -> np.ndarray:
    """Flattened (dx, dy) part offsets divided by sqrt(box area).

    Invariant under joint scaling of the box and its parts.
    """
    if not det.parts:
        raise NotAPersonError(f"detection of {det.model!r} has no parts")
    return np.asarray(det.parts, dtype=float).ravel() / np.sqrt(det.box.area)


@dataclass
class PostureCodebook:
    means: np.ndarray
    part_count: int
    seed: int = 0
    sse_history: tuple = ()

    @property
    def k(self):
        return len(self.means)

    @property
    def dim(self):
        return self.means.shape[1]

    def to_json(self):
        return {"k": self.k, "partCount": self.part_count, "seed": self.seed,
                "means": self.means.tolist()}

    @classmethod
    def from_json(cls, rec):
        means = np.asarray(rec["means"], dtype=float)
        if means.shape != (rec["k"], 2 * rec["partCount"]):
            raise ValueError("codebook means do not match k / partCount")
        return cls(means, int(rec["partCount"]), int(rec.get("seed", 0)))

    def save(self, path):
        from ._jsonio import dump_json
        dump_json(self.to_json(), path)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _sse(x, center):
    d = x - center
    return float(np.einsum("ij,ij->", d, d))


def _kmeans_pp_two(x, rng):
    first = x[rng.integers(len(x))]
    d2 = np.sum((x - first) ** 2, axis=1)
    if d2.sum() == 0:
        return None
    second = x[rng.choice(len(x), p=d2 / d2.sum())]
    return np.vstack([first, second])


def two_means(x, rng, n_restarts=N_RESTARTS, max_iter=100):
    """Best-of-restarts Lloyd 2-means; returns (labels, centers, sse) or None if unsplittable."""
    best = None
    for _ in range(n_restarts):
        centers = _kmeans_pp_two(x, rng)
        if centers is None:
            return None
        for _ in range(max_iter):
            d = ((x[:, None, :] - centers[None]) ** 2).sum(-1)
            labels = np.argmin(d, axis=1)
            if labels.min() == labels.max():
                break
            new = np.vstack([x[labels == c].mean(axis=0) for c in (0, 1)])
            if np.array_equal(new, centers):
                break
            centers = new
        if labels.min() == labels.max():
            continue
        sse = _sse(x[labels == 0], centers[0]) + _sse(x[labels == 1], centers[1])
        if best is None or sse < best[2]:
            best = (labels, centers, sse)
    return best


def train_codebook(vectors, k=DEFAULT_K, seed=0) -> PostureCodebook:
    """Bisecting k-means: split the cluster with the largest SSE until ``k`` clusters."""
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2:
        raise ValueError("vectors must share one dimension")
    if k < 1:
        raise ValueError("k must be positive")
    if len(x) < k:
        raise InsufficientDataError(f"{len(x)} vectors for k={k}")
    if x.shape[1] % 2:
        raise ValueError("displacement vectors have odd length")
    rng = np.random.default_rng(seed)
    clusters = [np.arange(len(x))]
    sses = [_sse(x, x.mean(axis=0))]
    history = [sum(sses)]
    while len(clusters) < k:
        split = None
        for i in np.argsort(sses, kind="stable")[::-1]:
            if sses[i] <= 0:
                break
            res = two_means(x[clusters[i]], rng)
            if res is not None:
                split = (i, res)
                break
        if split is None:
            raise InsufficientDataError(f"only {len(clusters)} distinct clusters for k={k}")
        i, (labels, _, _) = split
        idx = clusters.pop(i)
        sses.pop(i)
        for c in (0, 1):
            sub = idx[labels == c]
            clusters.append(sub)
            sses.append(_sse(x[sub], x[sub].mean(axis=0)))
        history.append(sum(sses))
    means = np.vstack([x[c].mean(axis=0) for c in clusters])
    return PostureCodebook(means, x.shape[1] // 2, seed, tuple(history))


def codebook_index(cb: PostureCodebook, v) -> int:
    v = np.asarray(v, dtype=float)
    if v.shape != (cb.dim,):
        raise ValueError(f"vector of length {v.size} for codebook of dimension {cb.dim}")
    return int(np.argmin(np.sum((cb.means - v) ** 2, axis=1)))
