"""Von Mises density and weighted parameter estimation."""

import numpy as np
from scipy.special import i0e

LOG_2PI = np.log(2 * np.pi)
KAPPA_MAX = 700.0


def log_i0(kappa):
    """log I0(kappa), stable for large kappa via the exponentially scaled Bessel function."""
    kappa = np.asarray(kappa, dtype=float)
    return np.log(i0e(kappa)) + kappa


def vonmises_logpdf(theta, mu, kappa):
    return kappa * np.cos(np.asarray(theta) - mu) - LOG_2PI - log_i0(kappa)


def a1inv(rbar):
    """Approximate inverse of A(kappa) = I1(kappa) / I0(kappa)."""
    r = float(rbar)
    if r < 0.53:
        return 2 * r + r ** 3 + 5 * r ** 5 / 6
    if r < 0.85:
        return -0.4 + 1.39 * r + 0.43 / (1 - r)
    denom = r ** 3 - 4 * r ** 2 + 3 * r
    return np.inf if denom <= 0 else 1.0 / denom


def fit_von_mises(angles, weights=None, kappa_max=KAPPA_MAX):
    """Weighted mean direction and concentration, returned as (mu, kappa).

    kappa comes from the piecewise approximation of A^-1 and is clamped to
    [0, kappa_max].
    """
    theta = np.asarray(angles, dtype=float)
    w = np.ones_like(theta) if weights is None else np.asarray(weights, dtype=float)
    total = w.sum()
    if not total > 0:
        raise ValueError("total weight must be positive")
    c = np.dot(w, np.cos(theta))
    s = np.dot(w, np.sin(theta))
    mu = float(np.arctan2(s, c))
    if mu <= -np.pi:
        mu += 2 * np.pi
    rbar = min(1.0, np.hypot(c, s) / total)
    kappa = float(np.clip(a1inv(rbar), 0.0, kappa_max))
    return mu, kappa
