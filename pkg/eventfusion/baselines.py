"""
Reference fusion methods: Dempster-Shafer combination over the class frame
and fusion that assumes every feature is independent.

Mass functions store focal sets as bitmasks over the frame, so a frame of
n classes has at most 2**n - 1 focal sets.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import LabelMismatch, TotalConflict
from .fusion_engine import FusionConfig, build_global_joint, eval_formula_on_joint, fuse
from .probability_model import PROB_TOL, And, Atom, FusedReport, Not, Or, as_distribution
from .system_logger import SystemLogger, syslog

# Frames larger than this make the power set impractical
MAX_FRAME = 16
CONFLICT_TOL = 1e-12


def _popcount(mask):
    return bin(mask).count('1')


@dataclass(frozen=True, eq=False)
class MassFunction:
    """Basic belief assignment over `frame`; masses maps bitmask -> mass."""
    frame: tuple
    masses: dict = field(default_factory=dict)

    def __post_init__(self):
        frame = tuple(self.frame)
        object.__setattr__(self, 'frame', frame)
        if not frame or len(frame) > MAX_FRAME:
            raise ValueError(f"frame must have 1..{MAX_FRAME} classes, got {len(frame)}")
        if len(set(frame)) != len(frame):
            raise LabelMismatch(f"duplicate labels in frame {frame}")
        full = (1 << len(frame)) - 1
        masses = {}
        for mask, mass in sorted(self.masses.items()):
            mask, mass = int(mask), float(mass)
            if not 0 <= mask <= full:
                raise ValueError(f"focal set {mask:#b} outside the frame")
            if mass < -PROB_TOL or mass > 1.0 + PROB_TOL:
                raise ValueError(f"mass {mass} outside [0, 1]")
            if mask == 0:
                if mass > PROB_TOL:
                    raise ValueError("the empty set must carry zero mass")
                continue
            if mass > 0.0:
                masses[mask] = mass
        total = sum(masses.values())
        if abs(total - 1.0) > PROB_TOL:
            raise ValueError(f"masses sum to {total!r}, not 1")
        object.__setattr__(self, 'masses', masses)

    @property
    def theta(self):
        return (1 << len(self.frame)) - 1

    def mask_of(self, labels):
        if isinstance(labels, str):
            labels = (labels,)
        mask = 0
        for label in labels:
            if label not in self.frame:
                raise LabelMismatch(f"{label!r} is not in the frame {self.frame}")
            mask |= 1 << self.frame.index(label)
        return mask

    def mass(self, labels):
        return self.masses.get(self.mask_of(labels), 0.0)

    @classmethod
    def from_sets(cls, frame, assignments):
        """Build from {label or iterable of labels: mass}."""
        probe = cls(frame, {(1 << len(tuple(frame))) - 1: 1.0})
        masses = {}
        for labels, mass in assignments.items():
            mask = probe.mask_of(labels)
            masses[mask] = masses.get(mask, 0.0) + mass
        return cls(frame, masses)

    @classmethod
    def vacuous(cls, frame):
        frame = tuple(frame)
        return cls(frame, {(1 << len(frame)) - 1: 1.0})


def combine_with_conflict(m1, m2):
    """Dempster's rule; returns (combined mass function, conflict K)."""
    if m1.frame != m2.frame:
        raise LabelMismatch(f"frames differ: {m1.frame} vs {m2.frame}")
    combined = {}
    conflict = 0.0
    for a, mass_a in m1.masses.items():
        for b, mass_b in m2.masses.items():
            product = mass_a * mass_b
            c = a & b
            if c == 0:
                conflict += product
            else:
                combined[c] = combined.get(c, 0.0) + product
    normalizer = 1.0 - conflict
    if normalizer < CONFLICT_TOL:
        raise TotalConflict(conflict)
    return MassFunction(m1.frame, {c: v / normalizer for c, v in combined.items()}), conflict


def dempster_combine(m1, m2):
    """
    Normalized conjunctive combination of two mass functions on one frame.

    Raises:
        TotalConflict: If the conflict K leaves less than 1e-12 mass.
    """
    return combine_with_conflict(m1, m2)[0]


def pignistic(m):
    """Spread each focal set's mass evenly over its elements."""
    probs = np.zeros(len(m.frame), dtype=float)
    for mask, mass in m.masses.items():
        share = mass / _popcount(mask)
        for i in range(len(m.frame)):
            if mask >> i & 1:
                probs[i] += share
    return as_distribution(probs, 'pignistic probabilities')


def independent_fuse(reports, objects, class_order=None, complement_label='complement'):
    """fuse() with rho fixed to 0: every feature treated as independent."""
    if class_order is None:
        class_order = [obj.object_id for obj in objects]
    config = FusionConfig(tuple(class_order), rho=0.0, complement_label=complement_label)
    return fuse(reports, objects, config)


# ---------------------------------------------------------------------------
# Per-sensor evidence
# ---------------------------------------------------------------------------

def project_formula(formula, features):
    """
    Part of a formula a sensor can judge from its own features.

    Atoms on other features are unknown: they drop out of conjunctions and
    make a disjunction undecidable. Returns None when nothing is left.
    """
    if isinstance(formula, Atom):
        return formula if formula.feature_id in features else None
    if isinstance(formula, Not):
        child = project_formula(formula.child, features)
        return None if child is None else Not(child)
    if isinstance(formula, And):
        kids = [k for k in (project_formula(c, features) for c in formula.children) if k is not None]
        if not kids:
            return None
        return kids[0] if len(kids) == 1 else And(tuple(kids))
    if isinstance(formula, Or):
        kids = [project_formula(c, features) for c in formula.children]
        if any(k is None for k in kids):
            return None
        return kids[0] if len(kids) == 1 else Or(tuple(kids))
    raise TypeError(f"not a formula node: {formula!r}")


def sensor_mass_function(reports, class_formulas, frame, features, discount=0.0):
    """
    Mass function of one sensor: projected class evidence on singletons,
    the remainder on the whole frame.

    Args:
        reports: The sensor's ProbReports.
        class_formulas: One formula per frame label, complement included.
        discount: Fraction of singleton evidence moved to the frame.
    """
    joint = build_global_joint(reports, 0.0)
    evidence = []
    for formula in class_formulas:
        projected = project_formula(formula, features)
        evidence.append(0.0 if projected is None else eval_formula_on_joint(joint, projected))
    evidence = np.array(evidence, dtype=float)
    scale = max(1.0, float(evidence.sum()))
    singletons = evidence / scale * (1.0 - discount)
    masses = {1 << i: float(v) for i, v in enumerate(singletons)}
    theta = (1 << len(frame)) - 1
    masses[theta] = masses.get(theta, 0.0) + max(0.0, 1.0 - float(singletons.sum()))
    return MassFunction(frame, masses)


def dempster_fuse(reports, objects, sensor_features, class_order=None,
                  complement_label='complement', discount=0.0):
    """
    Dempster-Shafer baseline over the object classes plus the complement.

    Each sensor contributes a mass function built from the formulas projected
    onto its own features (independence inside a sensor); the combined mass is
    scored through the pignistic transform.

    Args:
        reports: ProbReports, one per feature.
        objects: ObjectDefinitions with resolved formulas.
        sensor_features: Mapping sensor_id -> feature ids.

    Raises:
        TotalConflict: If the sensors' evidence cannot be combined.
    """
    by_id = {obj.object_id: obj.formula for obj in objects}
    if class_order is None:
        class_order = [obj.object_id for obj in objects]
    formulas = [by_id[label] for label in class_order]
    union = formulas[0] if len(formulas) == 1 else Or(tuple(formulas))
    class_formulas = formulas + [Not(union)]
    frame = tuple(class_order) + (complement_label,)

    reports_by_feature = {r.feature_id: r for r in reports}
    combined = None
    for sensor_id, feature_ids in sensor_features.items():
        own = [reports_by_feature[f] for f in feature_ids if f in reports_by_feature]
        if not own:
            continue
        m = sensor_mass_function(own, class_formulas, frame, set(feature_ids), discount)
        if combined is None:
            combined = m
        else:
            combined, conflict = combine_with_conflict(combined, m)
            syslog.debug(SystemLogger.BASELINE, "dempster_fuse: combined sensor evidence", {
                'sensor': sensor_id,
                'conflict': conflict,
            })
    if combined is None:
        combined = MassFunction.vacuous(frame)
    return FusedReport(frame, pignistic(combined))
