"""
Sentences from event hypotheses
===============================

The generator takes an action, the participating tracks' summaries and a
few speed thresholds.  Here the summaries are written by hand.
"""

import numpy as np

from vidsent.hmm import EventHypothesis
from vidsent.nlg import ActionThresholds, ParticipantDescription, load_lexicon, \
    plan_sentence, realize

lexicon = load_lexicon()
th = ActionThresholds(v1=10.0, v2=100.0, v3=30.0)


def who(tid, cls, center, velocity=(0.0, 0.0), hsv=None, frames=8, aspect_var=0.0):
    vel = np.tile(np.asarray(velocity, float), (frames, 1))
    speed = float(np.hypot(*velocity))
    pose = "upright" if cls.startswith("person") else "none"
    return ParticipantDescription(tid, cls, hsv, 100.0, 0.5, 0.0, aspect_var, speed,
                                  float(np.arctan2(-velocity[1], velocity[0])),
                                  speed * frames / 30, pose, vel, center)


def say(action, *parts):
    hyp = EventHypothesis(action, len(parts), parts[0].track_id,
                          parts[1].track_id if len(parts) > 1 else None, 0.0)
    return realize(plan_sentence(hyp, {p.track_id: p for p in parts}, lexicon, th))


# %%
# Two motionless participants are placed relative to each other.
print(say("approached", who("p", "person", (200, 100)), who("c", "car", (100, 100))))
print(say("approached", who("a", "person", (200, 100)), who("b", "person", (100, 100))))

# %%
# Moving subjects get an adverb and a direction phrase from their speed.
print(say("approached", who("p", "person", (0, 0), (150.0, 0.0)), who("c", "car", (500, 0))))
print(say("fell", who("p", "person", (0, 0), (0.0, 20.0))))

# %%
# Same-class referents are told apart by color when color separates them.
print(say("collided", who("r", "small-ball", (0, 0), (40.0, 0.0), (2.0, 0.9, 0.5), aspect_var=1),
          who("b", "small-ball", (50, 0), hsv=(235.0, 0.9, 0.5), aspect_var=1)))

# %%
# One-track hypotheses fill a required object with a pronoun.
print(say("raised", who("p", "person", (0, 0))))
print(say("held", who("p", "person", (0, 0))))
