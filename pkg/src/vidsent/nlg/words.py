"""Choice of adverbs, direction phrases and adjectives from track statistics."""

from __future__ import annotations

import math

import numpy as np

from .stats import ActionThresholds, ClassStatistics, ParticipantDescription, StabilityThresholds

# sector 0 is due right, counting counterclockwise on screen in 45 degree steps
ENDOGENOUS_LABELS = (
    "rightward", "rightward and upward", "upward", "leftward and upward",
    "leftward", "leftward and downward", "downward", "rightward and downward",
)
# indexed by the direction of motion; the words name the side it came from
EXOGENOUS_LABELS = (
    "from the left", "from below and to the left", "from below", "from below and to the right",
    "from the right", "from above and to the right", "from above", "from above and to the left",
)
STATIC_LABELS = (
    "to the right of", "above and to the right of", "above", "above and to the left of",
    "to the left of", "below and to the left of", "below", "below and to the right of",
)

HUE_CENTERS = ((0, "red"), (60, "yellow"), (120, "green"), (180, "teal"), (240, "blue"),
               (300, "pink"))
SIZE_WORDS = ("big", "small")
SHAPE_WORDS = ("tall", "short", "narrow", "wide")
COLOR_WORDS = ("black", "white") + tuple(w for _, w in HUE_CENTERS)
TALL_RATIO, WIDE_RATIO = 0.7, 1.3


def sector(angle):
    """Index of the 45 degree sector holding a screen-up angle in radians."""
    deg = math.degrees(angle)
    return int(math.floor((deg + 22.5) / 45.0)) % 8


def screen_vector_angle(dx, dy):
    """Angle of an image-coordinate vector with y flipped to point up."""
    return math.atan2(-dy, dx)


def select_adverb(speed, th: ActionThresholds):
    if speed < 0:
        raise ValueError("speed must be non-negative")
    if speed > th.v2:
        return "quickly"
    if th.v1 <= speed <= th.v3:
        return "slowly"
    return None


def moving_velocity(desc: ParticipantDescription, v1):
    """Mean image velocity over the frames whose speed exceeds ``v1`` (zero if none)."""
    vel = np.asarray(desc.velocities, dtype=float).reshape(-1, 2)
    fast = np.hypot(vel[:, 0], vel[:, 1]) > v1
    if not fast.any():
        return np.zeros(2)
    return vel[fast].mean(axis=0)


def select_adjunct(velocity, kind, v1):
    """Direction phrase for an image-coordinate velocity, or None below ``v1``."""
    vx, vy = float(velocity[0]), float(velocity[1])
    if math.hypot(vx, vy) < v1 or (vx == 0 and vy == 0):
        return None
    s = sector(screen_vector_angle(vx, vy))
    if kind == "endogenous":
        return ENDOGENOUS_LABELS[s]
    if kind == "exogenous":
        return EXOGENOUS_LABELS[s]
    raise ValueError(f"unknown adjunct kind {kind!r}")


def static_spatial_pp(subject_center, reference_center):
    """Preposition placing the subject relative to the reference, as seen by the viewer."""
    dx = subject_center[0] - reference_center[0]
    dy = subject_center[1] - reference_center[1]
    return STATIC_LABELS[sector(screen_vector_angle(dx, dy))]


def color_adjective(hsv):
    if hsv is None:
        return None
    h, s, v = hsv
    if v <= 0.2:
        return "black"
    if v >= 0.8:
        return "white"
    if s >= 0.7:
        def dist(c):
            d = abs(h - c) % 360.0
            return min(d, 360.0 - d)
        return min(HUE_CENTERS, key=lambda hc: (dist(hc[0]), hc[0]))[1]
    return None


def size_shape_adjectives(desc: ParticipantDescription, cs: ClassStatistics,
                          stability: StabilityThresholds = StabilityThresholds(),
                          class_size=None):
    """Size and shape words for a track, in that order.

    Unstable tracks get none at all.  A class-mapped size word replaces the
    statistical one.  Equal cutoffs count as neither big nor small.
    """
    if (desc.score_variance > stability.score_variance
            or desc.aspect_variance > stability.aspect_variance):
        return []
    st = cs.get(desc.object_class) if cs is not None else None
    size = shape = None
    if st is not None and st.alpha != st.beta:
        big = desc.mean_area >= st.beta * st.mean_area
        small = desc.mean_area <= st.alpha * st.mean_area
        size = "big" if big else "small" if small else None
        thin = desc.mean_aspect <= TALL_RATIO * st.mean_aspect
        broad = desc.mean_aspect >= WIDE_RATIO * st.mean_aspect
        if thin and big:
            shape = "tall"
        elif broad and small:
            shape = "short"
        elif thin and small:
            shape = "narrow"
        elif broad and big:
            shape = "wide"
    if class_size is not None:
        size = class_size
    return [w for w in (size, shape) if w is not None]
