"""
Synthetic labelled scenarios.

Each sample draws a class by prior, a latent vector from a correlated
multivariate normal (a Gaussian copula over the features), scales it into
feature values with the class's mean and spread, and turns every feature value
into event probabilities with soft logistic thresholds around the event
ranges.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ScenarioError
from .probability_model import Event, EventSpace, Interval, normalize_report
from .system_logger import SystemLogger, syslog

PRIOR_TOL = 1e-9
# Smallest eigenvalue accepted for a correlation matrix
PSD_TOL = 1e-10


def _bound(value, default):
    if value is None:
        return default
    return float(value)


@dataclass(frozen=True)
class FeatureSpec:
    """
    One simulated feature.

    Values are clipped at `minimum`; an event bound at or below it is not a
    threshold. `softness` is the logistic scale of every event boundary.
    """
    feature_id: str
    sensor_ids: tuple
    events: tuple
    softness: float = 1.0
    minimum: float = -math.inf

    def __post_init__(self):
        object.__setattr__(self, 'sensor_ids', tuple(self.sensor_ids))
        object.__setattr__(self, 'events', tuple(self.events))
        if not self.events:
            raise ScenarioError(f"feature {self.feature_id!r} has no events")
        if not self.softness > 0:
            raise ScenarioError(f"feature {self.feature_id!r}: softness must be positive")

    @property
    def space(self):
        return EventSpace(self.feature_id, ','.join(self.sensor_ids), self.events)

    def memberships(self, values):
        """Soft membership of each value in each event, shape (n, events)."""
        columns = []
        for event in self.events:
            lower, upper = event.interval.lower, event.interval.upper
            m = np.ones_like(values)
            if math.isfinite(lower) and lower > self.minimum:
                m = m * expit((values - lower) / self.softness)
            if math.isfinite(upper):
                m = m * expit((upper - values) / self.softness)
            columns.append(m)
        return np.column_stack(columns)

    @classmethod
    def from_mapping(cls, data):
        events = tuple(
            Event(e['label'], Interval(_bound(e.get('lower'), -math.inf), _bound(e.get('upper'), math.inf)))
            for e in data['events']
        )
        sensors = data.get('sensor_ids') or [data.get('sensor_id', '')]
        return cls(
            feature_id=data['feature_id'],
            sensor_ids=tuple(sensors),
            events=events,
            softness=float(data.get('softness', 1.0)),
            minimum=_bound(data.get('minimum'), -math.inf),
        )


@dataclass(frozen=True)
class ClassSpec:
    label: str
    prior: float
    mean: dict = field(default_factory=dict)
    spread: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """
    Parameters of a synthetic scenario.

    correlation may be a full matrix over the features, in feature order, or
    one number used for every off-diagonal entry.

    Raises:
        ScenarioError: Priors not summing to 1, a correlation matrix that is
                       not a symmetric unit-diagonal PSD matrix, missing class
                       parameters, or n_samples < 1.
    """
    classes: tuple
    features: tuple
    correlation: object = 0.0
    n_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'classes', tuple(self.classes))
        object.__setattr__(self, 'features', tuple(self.features))
        if not self.classes:
            raise ScenarioError("a scenario needs at least one class")
        if not self.features:
            raise ScenarioError("a scenario needs at least one feature")
        if int(self.n_samples) < 1:
            raise ScenarioError(f"n_samples must be at least 1, got {self.n_samples}")

        priors = np.array([c.prior for c in self.classes], dtype=float)
        if np.any(priors < 0) or abs(float(priors.sum()) - 1.0) > PRIOR_TOL:
            raise ScenarioError(f"class priors must be nonnegative and sum to 1, got {priors.tolist()}")

        labels = [c.label for c in self.classes]
        if len(set(labels)) != len(labels):
            raise ScenarioError(f"duplicate class labels: {labels}")
        ids = [f.feature_id for f in self.features]
        if len(set(ids)) != len(ids):
            raise ScenarioError(f"duplicate feature ids: {ids}")
        for c in self.classes:
            for fid in ids:
                if fid not in c.mean or fid not in c.spread:
                    raise ScenarioError(f"class {c.label!r} has no mean/spread for feature {fid!r}")
                if not float(c.spread[fid]) > 0:
                    raise ScenarioError(f"class {c.label!r}: spread of {fid!r} must be positive")

        object.__setattr__(self, 'correlation', self._correlation_matrix(self.correlation, len(ids)))

    @staticmethod
    def _correlation_matrix(value, size):
        if np.ndim(value) == 0:
            corr = np.full((size, size), float(value))
            np.fill_diagonal(corr, 1.0)
        else:
            corr = np.array(value, dtype=float)
        if corr.shape != (size, size):
            raise ScenarioError(f"correlation must be {size}x{size}, got shape {corr.shape}")
        if not np.allclose(corr, corr.T, atol=1e-12):
            raise ScenarioError("correlation matrix is not symmetric")
        if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
            raise ScenarioError("correlation matrix must have a unit diagonal")
        smallest = float(np.linalg.eigvalsh(corr).min())
        if smallest < -PSD_TOL:
            raise ScenarioError(f"correlation matrix is not positive semidefinite (eigenvalue {smallest!r})")
        corr.setflags(write=False)
        return corr

    @property
    def feature_ids(self):
        return tuple(f.feature_id for f in self.features)

    @property
    def class_labels(self):
        return tuple(c.label for c in self.classes)

    @property
    def spaces(self):
        return tuple(f.space for f in self.features)

    def with_overrides(self, n_samples=None, seed=None):
        return ScenarioConfig(
            self.classes,
            self.features,
            self.correlation,
            self.n_samples if n_samples is None else n_samples,
            self.seed if seed is None else seed,
        )

    @classmethod
    def from_mapping(cls, data):
        try:
            return cls(
                classes=tuple(
                    ClassSpec(c['label'], float(c['prior']), dict(c['mean']), dict(c['spread']))
                    for c in data['classes']
                ),
                features=tuple(FeatureSpec.from_mapping(f) for f in data['features']),
                correlation=data.get('correlation', 0.0),
                n_samples=int(data.get('n_samples', 1000)),
                seed=int(data.get('seed', 0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ScenarioError):
                raise
            raise ScenarioError(f"invalid scenario config: {e}") from e

    @classmethod
    def from_json(cls, path):
        with open(path, encoding='utf-8') as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as e:
                raise ScenarioError(f"{path}: {e}") from e
        return cls.from_mapping(data)


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Labelled samples: one list of ProbReports per sample.

    latent and features are (n, F) arrays in `spaces` order when the data
    was simulated, None when it was read from a reports file.
    """
    spaces: tuple
    samples: tuple
    labels: tuple
    latent: np.ndarray | None = None
    features: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, 'spaces', tuple(self.spaces))
        object.__setattr__(self, 'samples', tuple(tuple(s) for s in self.samples))
        object.__setattr__(self, 'labels', tuple(self.labels))
        if len(self.samples) != len(self.labels):
            raise ScenarioError(f"{len(self.samples)} samples but {len(self.labels)} labels")

    def __len__(self):
        return len(self.samples)

    @property
    def feature_ids(self):
        return tuple(s.feature_id for s in self.spaces)

    def subset(self, indices):
        indices = list(indices)
        return Dataset(
            self.spaces,
            [self.samples[i] for i in indices],
            [self.labels[i] for i in indices],
            None if self.latent is None else self.latent[indices],
            None if self.features is None else self.features[indices],
        )


def generate_scenario(cfg):
    """
    Draw a labelled dataset from a ScenarioConfig.

    The same config (seed included) always yields the same dataset.

    Returns:
        Dataset: Reports, labels, latent draws and feature values.
    """
    rng = np.random.default_rng(cfg.seed)
    n = int(cfg.n_samples)
    n_features = len(cfg.features)

    priors = np.array([c.prior for c in cfg.classes], dtype=float)
    class_index = rng.choice(len(cfg.classes), size=n, p=priors / priors.sum())
    latent = rng.multivariate_normal(np.zeros(n_features), cfg.correlation, size=n, method='eigh')

    means = np.array([[float(c.mean[f.feature_id]) for f in cfg.features] for c in cfg.classes])
    spreads = np.array([[float(c.spread[f.feature_id]) for f in cfg.features] for c in cfg.classes])
    values = means[class_index] + spreads[class_index] * latent
    minimums = np.array([f.minimum for f in cfg.features])
    values = np.maximum(values, minimums)

    per_feature = []
    for k, feature in enumerate(cfg.features):
        m = feature.memberships(values[:, k])
        # Declared events may overlap; keep their sum at most one
        m = m / np.maximum(1.0, m.sum(axis=1))[:, None]
        per_feature.append(m)

    spaces = cfg.spaces
    samples = [
        [normalize_report(per_feature[k][i], spaces[k]) for k in range(n_features)]
        for i in range(n)
    ]
    labels = [cfg.classes[j].label for j in class_index]

    counts = {c.label: int(np.sum(class_index == j)) for j, c in enumerate(cfg.classes)}
    syslog.info(SystemLogger.HARNESS, "generate_scenario: scenario drawn", {
        'samples': n,
        'seed': cfg.seed,
        'class_counts': counts,
    })
    return Dataset(spaces, samples, labels, latent, values)
