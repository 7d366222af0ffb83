"""Small builders shared by the tests."""
import numpy as np

from eventfusion.probability_model import Event, EventSpace, Interval, ProbReport


def random_distribution(rng, size, zeros=False):
    """Random probability vector; with zeros, some entries may be exactly 0."""
    p = rng.dirichlet(np.ones(size))
    if zeros and size > 1:
        mask = rng.random(size) < 0.25
        mask[int(rng.integers(size))] = False
        p = np.where(mask, 0.0, p)
        p = p / p.sum()
    return p


def space(feature_id, size, sensor_id='s'):
    """Space with events <feature_id>0, <feature_id>1, ... on unit ranges."""
    return EventSpace(feature_id, sensor_id,
                      tuple(Event(f"{feature_id}{i}", Interval(i, i + 1)) for i in range(size)))


def report(feature_id, probs, sensor_id='s'):
    return ProbReport(space(feature_id, len(probs), sensor_id), probs)
