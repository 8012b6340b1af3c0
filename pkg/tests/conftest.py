import numpy as np
import pytest

from vidsent.ingest import Box, Detection, stream_from_frames


def det(frame, score, box, model="person", flow=None, parts=(), **kw):
    return Detection(frame=frame, model=model, score=score, box=Box(*box), flow=flow,
                     parts=parts, **kw)


@pytest.fixture
def make_det():
    return det


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_stream(rng, n_frames, max_cands, model="car", min_cands=1):
    frames = []
    for t in range(n_frames):
        dets = []
        for _ in range(rng.integers(min_cands, max_cands + 1)):
            x, y = rng.uniform(0, 60, size=2)
            w, h = rng.uniform(5, 30, size=2)
            dets.append(det(t, float(rng.normal()), (x, y, x + w, y + h), model=model,
                            flow=tuple(rng.normal(0, 3, size=2))))
        frames.append(dets)
    return stream_from_frames("rand", frames)


def random_schema(rng, max_each=2):
    from vidsent.features import ANGULAR, DISCRETE, LINEAR, Feature, FeatureSchema
    feats = []
    while not feats:
        for kind in (LINEAR, ANGULAR, DISCRETE):
            for j in range(int(rng.integers(0, max_each + 1))):
                card = int(rng.integers(2, 5)) if kind == DISCRETE else 0
                feats.append(Feature(f"{kind}{j}", kind, card))
    return FeatureSchema(tuple(feats))


def random_model(rng, schema, n_states):
    from vidsent.features import ANGULAR, DISCRETE, LINEAR
    from vidsent.hmm import Emissions, HmmModel
    nl, na = len(schema.indices(LINEAR)), len(schema.indices(ANGULAR))
    log_probs = [np.log(rng.dirichlet(np.ones(schema.features[i].cardinality), size=n_states))
                 for i in schema.indices(DISCRETE)]
    em = Emissions(schema, log_probs, rng.normal(0, 2, (n_states, nl)),
                   rng.uniform(0.2, 3, (n_states, nl)), rng.uniform(-np.pi, np.pi, (n_states, na)),
                   rng.uniform(0, 8, (n_states, na)))
    return HmmModel(np.log(rng.dirichlet(np.ones(n_states))),
                    np.log(rng.dirichlet(np.ones(n_states), size=n_states)), em)
