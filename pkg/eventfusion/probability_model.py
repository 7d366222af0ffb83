"""
Probability-space data model: event spaces, probability reports, coupling
tables over product spaces, and the entropy / mutual-information primitives.

Every value here is immutable after construction. numpy arrays held by the
dataclasses are copied and flagged read-only.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import entr, rel_entr

from .errors import (
    AxisMismatch,
    AxisOutOfRange,
    EventNotFound,
    InvalidDistribution,
    LabelMismatch,
    MassExceedsUnity,
    NegativeMass,
)

PROB_TOL = 1e-9
# Sums closer to 1 than this are left untouched by unit_mass
UNIT_MASS_EPS = 1e-12
COMPLEMENT_LABEL = '~other'

_LN2 = math.log(2.0)


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def as_distribution(p, name='distribution'):
    """
    Validate a probability vector.

    Returns:
        numpy.ndarray: 1-D float copy of p.

    Raises:
        NegativeMass: If any entry is negative.
        InvalidDistribution: If p is empty, not finite, or does not sum to 1
                             within PROB_TOL.
    """
    arr = np.asarray(p, dtype=float).ravel()
    if arr.size == 0:
        raise InvalidDistribution(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidDistribution(f"{name} has non-finite entries")
    if np.any(arr < 0):
        raise NegativeMass(f"{name} has negative entries: {arr.tolist()}")
    total = float(arr.sum())
    if abs(total - 1.0) > PROB_TOL:
        raise InvalidDistribution(f"{name} sums to {total!r}, not 1")
    return arr.copy()


def unit_mass(arr):
    """Rescale a vector whose sum is within PROB_TOL of 1 so it sums to 1."""
    arr = np.asarray(arr, dtype=float)
    total = float(arr.sum())
    if total > 0.0 and abs(total - 1.0) > UNIT_MASS_EPS:
        return arr / total
    return arr


# ---------------------------------------------------------------------------
# Event spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    """Closed-open range [lower, upper) on a feature axis."""
    lower: float
    upper: float = math.inf

    def __post_init__(self):
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ValueError("interval bounds must not be NaN")
        if not self.upper > self.lower:
            raise ValueError(f"interval upper bound {self.upper} must exceed lower bound {self.lower}")
        if self.lower == math.inf:
            raise ValueError("interval lower bound must be finite or -inf")

    def contains(self, x):
        return self.lower <= x < self.upper

    def intersects(self, other):
        return max(self.lower, other.lower) < min(self.upper, other.upper)

    def __str__(self):
        return f"[{format_bound(self.lower)}, {format_bound(self.upper)})"


def format_bound(value):
    if value == math.inf:
        return 'inf'
    if value == -math.inf:
        return '-inf'
    return repr(float(value)) if value != int(value) else str(int(value))


@dataclass(frozen=True)
class Event:
    label: str
    interval: Interval | None = None


@dataclass(frozen=True)
class EventSpace:
    """
    Mutually exclusive events observed on one feature of one sensor.

    When has_complement is set, the last atom is the synthetic COMPLEMENT_LABEL
    event that absorbs mass outside the declared events.
    """
    feature_id: str
    sensor_id: str
    events: tuple
    has_complement: bool = False

    def __post_init__(self):
        events = tuple(self.events)
        object.__setattr__(self, 'events', events)
        if not events:
            raise ValueError(f"event space {self.feature_id!r} needs at least one event")
        labels = [e.label for e in events]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate event labels in space {self.feature_id!r}: {labels}")
        for e in events[:-1]:
            if e.label == COMPLEMENT_LABEL:
                raise ValueError("the complement atom must be the last event")
        if self.has_complement:
            last = events[-1]
            if last.label != COMPLEMENT_LABEL or last.interval is not None:
                raise ValueError("complement atom must be last, labelled COMPLEMENT_LABEL and carry no range")
        elif labels[-1] == COMPLEMENT_LABEL:
            raise ValueError("complement atom present but has_complement is False")

    @classmethod
    def anonymous(cls, size, feature_id):
        """Space of `size` unnamed atoms e0..e{size-1}, used for bare marginals."""
        return cls(feature_id, '', tuple(Event(f"e{i}") for i in range(size)))

    @property
    def size(self):
        return len(self.events)

    @property
    def labels(self):
        return tuple(e.label for e in self.events)

    @property
    def declared_events(self):
        return self.events[:-1] if self.has_complement else self.events

    def declared(self):
        """This space without its complement atom."""
        if not self.has_complement:
            return self
        return EventSpace(self.feature_id, self.sensor_id, self.declared_events, False)

    def with_complement(self):
        if self.has_complement:
            return self
        return EventSpace(self.feature_id, self.sensor_id,
                          self.events + (Event(COMPLEMENT_LABEL),), True)

    def index_of(self, label):
        for i, e in enumerate(self.events):
            if e.label == label:
                return i
        raise EventNotFound(label, self.feature_id)

    def same_atoms(self, other):
        return self.labels == other.labels


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProbReport:
    """One sensor's probability vector over an event space for one sample."""
    space: EventSpace
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        probs = _frozen_array(self.probs)
        if probs.ndim != 1 or probs.size != self.space.size:
            raise LabelMismatch(
                f"report for {self.space.feature_id!r} has {probs.size} entries, "
                f"space has {self.space.size} atoms")
        as_distribution(probs, f"report {self.space.feature_id!r}")
        if np.any(probs > 1.0 + PROB_TOL):
            raise InvalidDistribution(f"report {self.space.feature_id!r} has entries above 1")
        object.__setattr__(self, 'probs', probs)

    @property
    def feature_id(self):
        return self.space.feature_id

    def probability_of(self, labels):
        return event_probability(self, labels)


def normalize_report(raw_probs, space):
    """
    Turn per-event probabilities into a ProbReport.

    raw_probs covers the declared events of `space`. If their sum falls short
    of one, a complement atom carrying the missing mass is appended. A sum
    within PROB_TOL of one is rescaled to exactly one. A vector
    that already covers every atom of a space with a complement is accepted
    as-is, so normalizing a normalized report is a no-op.

    Raises:
        NegativeMass: If an entry is negative.
        MassExceedsUnity: If the declared events sum to more than 1 + PROB_TOL.
    """
    raw = np.asarray(raw_probs, dtype=float).ravel()
    if not np.all(np.isfinite(raw)):
        raise InvalidDistribution(f"report {space.feature_id!r} has non-finite entries")
    if np.any(raw < 0):
        raise NegativeMass(f"report {space.feature_id!r} has negative entries: {raw.tolist()}")

    declared = space.declared()
    total = float(raw.sum())

    if space.has_complement and raw.size == space.size:
        if abs(total - 1.0) > PROB_TOL:
            raise InvalidDistribution(f"report {space.feature_id!r} sums to {total!r}, not 1")
        return ProbReport(space, unit_mass(raw))

    if raw.size != declared.size:
        raise LabelMismatch(
            f"report for {space.feature_id!r} has {raw.size} entries, "
            f"expected {declared.size} declared events")
    if total > 1.0 + PROB_TOL:
        raise MassExceedsUnity(total)

    if 1.0 - total <= PROB_TOL:
        return ProbReport(declared, unit_mass(raw))
    return ProbReport(declared.with_complement(), np.append(raw, 1.0 - total))


def event_probability(report, labels):
    """
    Probability of a subset of atoms (an element of the finite event algebra).

    Args:
        report: ProbReport.
        labels: One atom label or an iterable of labels.
    """
    if isinstance(labels, str):
        labels = (labels,)
    indices = sorted({report.space.index_of(label) for label in labels})
    return float(report.probs[indices].sum())


# ---------------------------------------------------------------------------
# Coupling tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CouplingTable:
    """Joint distribution over the product of `axes`, one cell per atom tuple."""
    axes: tuple
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        axes = tuple(self.axes)
        object.__setattr__(self, 'axes', axes)
        cells = _frozen_array(self.cells)
        expected = tuple(ax.size for ax in axes)
        if cells.shape != expected:
            raise AxisMismatch(f"cells have shape {cells.shape}, axes imply {expected}")
        ids = [ax.feature_id for ax in axes]
        if len(set(ids)) != len(ids):
            raise AxisMismatch(f"duplicate feature axes: {ids}")
        if np.any(cells < 0):
            raise NegativeMass("coupling table has negative cells")
        total = float(cells.sum())
        if abs(total - 1.0) > PROB_TOL:
            raise InvalidDistribution(f"coupling table mass is {total!r}, not 1")
        object.__setattr__(self, 'cells', cells)

    @classmethod
    def from_report(cls, report):
        return cls((report.space,), report.probs)

    @property
    def ndim(self):
        return len(self.axes)

    @property
    def shape(self):
        return self.cells.shape

    def flatten(self):
        return self.cells.ravel()


def marginalize(t, axis):
    """Sum out every axis of t except `axis`."""
    if not 0 <= axis < t.ndim:
        raise AxisOutOfRange(f"axis {axis} out of range for a {t.ndim}-axis table")
    others = tuple(i for i in range(t.ndim) if i != axis)
    return np.array(t.cells.sum(axis=others) if others else t.cells)


# ---------------------------------------------------------------------------
# Information measures (bits)
# ---------------------------------------------------------------------------

def entropy(p):
    """Shannon entropy in bits, with 0 log 0 = 0."""
    arr = as_distribution(p, 'entropy argument')
    return max(0.0, float(entr(arr).sum() / _LN2))


def joint_entropy(t):
    return entropy(t.flatten())


def mutual_information(t):
    """I(X;Y) in bits for a 2-axis coupling table."""
    if t.ndim != 2:
        raise AxisMismatch(f"mutual information needs 2 axes, table has {t.ndim}")
    px = t.cells.sum(axis=1)
    py = t.cells.sum(axis=0)
    return float(rel_entr(t.cells, np.outer(px, py)).sum() / _LN2)


# ---------------------------------------------------------------------------
# Object formulas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    """
    Reference to one event. Resolution binds it to the feature axis and atom
    index it denotes; evaluation needs both.
    """
    label: str
    feature_id: str | None = None
    index: int | None = None

    @property
    def resolved(self):
        return self.feature_id is not None and self.index is not None


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, 'children', tuple(self.children))
        if not self.children:
            raise ValueError("And needs at least one operand")


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, 'children', tuple(self.children))
        if not self.children:
            raise ValueError("Or needs at least one operand")


@dataclass(frozen=True)
class Not:
    child: object


def iter_atoms(formula):
    """Yield every Atom of a formula, depth first, left to right."""
    if isinstance(formula, Atom):
        yield formula
    elif isinstance(formula, (And, Or)):
        for child in formula.children:
            yield from iter_atoms(child)
    elif isinstance(formula, Not):
        yield from iter_atoms(formula.child)
    else:
        raise TypeError(f"not a formula node: {formula!r}")


def formula_features(formula):
    """Feature ids mentioned by a resolved formula, in first-use order."""
    seen = []
    for atom in iter_atoms(formula):
        if atom.feature_id is not None and atom.feature_id not in seen:
            seen.append(atom.feature_id)
    return tuple(seen)


@dataclass(frozen=True)
class ObjectDefinition:
    object_id: str
    formula: object


# ---------------------------------------------------------------------------
# Fused reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FusedReport:
    """Per-sample probabilities over the object classes, complement last."""
    class_labels: tuple
    class_probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = tuple(self.class_labels)
        object.__setattr__(self, 'class_labels', labels)
        probs = _frozen_array(self.class_probs)
        if probs.shape != (len(labels),):
            raise LabelMismatch(f"{probs.size} class probabilities for {len(labels)} labels")
        if len(set(labels)) != len(labels):
            raise LabelMismatch(f"duplicate class labels: {labels}")
        as_distribution(probs, 'fused report')
        if np.any(probs > 1.0 + PROB_TOL):
            raise InvalidDistribution("fused report has entries above 1")
        object.__setattr__(self, 'class_probs', probs)

    def probability(self, label):
        return float(self.class_probs[self.class_labels.index(label)])
