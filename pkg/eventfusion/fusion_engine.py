"""
Fusion engine: builds the blended joint distribution over the product space
of all reported features and reads object probabilities off it.

In the default global-joint mode every object probability is a sum over the
same table, so inclusion-exclusion, complements and monotonicity hold exactly.
Pairwise mode evaluates each object on a joint over only its own features,
and two-event objects with the explicit 'and' / 'or' rules.
"""
import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .coupling import RhoMethod, blended_coupling, estimate_rho_for_set, estimate_rho_matrix
from .errors import (
    AxisMismatch,
    CapacityError,
    InsufficientMarginals,
    LabelMismatch,
    RhoOutOfRange,
    UnresolvedAtom,
    ZeroWeights,
)
from .probability_model import (
    PROB_TOL,
    And,
    Atom,
    CouplingTable,
    FusedReport,
    Not,
    Or,
    ProbReport,
    formula_features,
)
from .system_logger import SystemLogger, syslog

MAX_JOINT_CELLS = 10**6


class EvaluationMode(str, Enum):
    GLOBAL_JOINT = 'global'
    PAIRWISE = 'pairwise'


@dataclass(frozen=True)
class FusionConfig:
    """
    How a sample is fused.

    rho is the blend weight used for every joint; rho_pairs optionally
    overrides it per feature pair in pairwise mode. sensor_weights scale the
    reports of features observed by more than one sensor.
    """
    class_order: tuple
    rho: float = 0.0
    rho_method: RhoMethod = RhoMethod.FIXED
    evaluation_mode: EvaluationMode = EvaluationMode.GLOBAL_JOINT
    complement_label: str = 'complement'
    rho_pairs: dict = field(default_factory=dict)
    sensor_weights: dict = field(default_factory=dict)
    max_joint_cells: int = MAX_JOINT_CELLS

    def __post_init__(self):
        object.__setattr__(self, 'class_order', tuple(self.class_order))
        object.__setattr__(self, 'rho_method', RhoMethod(self.rho_method))
        object.__setattr__(self, 'evaluation_mode', EvaluationMode(self.evaluation_mode))
        if not self.class_order:
            raise ValueError("class_order must not be empty")
        if len(set(self.class_order)) != len(self.class_order):
            raise ValueError(f"class_order has duplicates: {self.class_order}")
        if self.complement_label in self.class_order:
            raise ValueError(f"complement label {self.complement_label!r} clashes with an object label")
        rho = float(self.rho)
        if not 0.0 <= rho <= 1.0:
            raise RhoOutOfRange(rho)
        for pair, value in self.rho_pairs.items():
            if not 0.0 <= float(value) <= 1.0:
                raise RhoOutOfRange(value)

    @classmethod
    def estimated(cls, class_order, training_features, method, feature_ids=None, **kwargs):
        """Config whose rho is the mean pairwise dependence of the training columns."""
        method = RhoMethod(method)
        rho = estimate_rho_for_set(training_features, method)
        rho_pairs = {}
        if feature_ids is not None:
            rho_pairs = {pair: est.value
                         for pair, est in estimate_rho_matrix(training_features, method, feature_ids).items()}
        syslog.info(SystemLogger.FUSION, "Estimated rho from training data", {
            'method': method.value,
            'rho': rho,
        })
        return cls(class_order, rho=rho, rho_method=method, rho_pairs=rho_pairs, **kwargs)

    @property
    def class_labels(self):
        return self.class_order + (self.complement_label,)

    def rho_for(self, feature_a, feature_b):
        for key in ((feature_a, feature_b), (feature_b, feature_a)):
            if key in self.rho_pairs:
                return float(self.rho_pairs[key])
        return float(self.rho)


# ---------------------------------------------------------------------------
# Joint construction
# ---------------------------------------------------------------------------

def build_global_joint(reports, rho, max_cells=MAX_JOINT_CELLS):
    """
    Blended joint over the product of all report spaces.

    A single report yields its own 1-axis table.

    Raises:
        InsufficientMarginals: If reports is empty.
        CapacityError: If the product space exceeds max_cells.
    """
    reports = list(reports)
    if not reports:
        raise InsufficientMarginals("build_global_joint needs at least one report")
    cells = math.prod(r.space.size for r in reports)
    if cells > max_cells:
        syslog.error(SystemLogger.FUSION, "build_global_joint: product space too large", {
            'cells': cells,
            'limit': max_cells,
        })
        raise CapacityError(cells, max_cells)
    if len(reports) == 1:
        return CouplingTable.from_report(reports[0])
    return blended_coupling(reports, rho)


# ---------------------------------------------------------------------------
# Formula evaluation
# ---------------------------------------------------------------------------

def _layout(joint):
    return tuple((ax.feature_id, ax.size) for ax in joint.axes)


@functools.lru_cache(maxsize=4096)
def _formula_mask(formula, layout):
    shape = tuple(size for _, size in layout)

    if isinstance(formula, Atom):
        if not formula.resolved:
            raise UnresolvedAtom(formula.label)
        for axis, (feature_id, size) in enumerate(layout):
            if feature_id == formula.feature_id:
                break
        else:
            raise UnresolvedAtom(formula.label)
        if not 0 <= formula.index < size:
            raise UnresolvedAtom(formula.label)
        one_hot = np.zeros(size, dtype=bool)
        one_hot[formula.index] = True
        view = [1] * len(shape)
        view[axis] = size
        mask = np.broadcast_to(one_hot.reshape(view), shape).copy()
    elif isinstance(formula, And):
        mask = np.logical_and.reduce([_formula_mask(c, layout) for c in formula.children])
    elif isinstance(formula, Or):
        mask = np.logical_or.reduce([_formula_mask(c, layout) for c in formula.children])
    elif isinstance(formula, Not):
        mask = ~_formula_mask(formula.child, layout)
    else:
        raise TypeError(f"not a formula node: {formula!r}")

    mask = np.asarray(mask, dtype=bool)
    mask.setflags(write=False)
    return mask


def eval_formula_on_joint(joint, f):
    """
    Probability of a resolved formula: the mass of every joint cell whose atom
    tuple satisfies it.

    Raises:
        UnresolvedAtom: If an atom is unbound or names a feature absent from joint.
    """
    mask = _formula_mask(f, _layout(joint))
    value = float(joint.cells[mask].sum())
    return min(1.0, max(0.0, value))


def _atom_indices(report, event):
    if isinstance(event, str):
        event = (event,)
    return sorted({report.space.index_of(label) for label in event})


def eval_pairwise(alpha, beta, connective, report_a, report_b, rho):
    """
    Two-event combination on the blended 2-axis coupling.

    P(alpha and beta) is the joint mass of the pair; P(alpha or beta) is
    P_a(alpha) + P_b(beta) - P(alpha and beta) with P_a, P_b read from the
    reports.

    Args:
        alpha: Event label (or labels) in report_a's space.
        beta: Event label (or labels) in report_b's space.
        connective: 'and' or 'or'.

    Raises:
        EventNotFound: If a label is not an atom of its report's space.
    """
    connective = str(connective).lower()
    if connective not in ('and', 'or'):
        raise ValueError(f"connective must be 'and' or 'or', got {connective!r}")
    ia = _atom_indices(report_a, alpha)
    ib = _atom_indices(report_b, beta)

    joint = blended_coupling([report_a, report_b], rho)
    p_and = float(joint.cells[np.ix_(ia, ib)].sum())
    if connective == 'and':
        return min(1.0, max(0.0, p_and))
    p_or = float(report_a.probs[ia].sum()) + float(report_b.probs[ib].sum()) - p_and
    return min(1.0, max(0.0, p_or))


def _two_event_parts(formula):
    """(connective, atom_a, atom_b) for an and/or of two atoms on different features."""
    if isinstance(formula, (And, Or)) and len(formula.children) == 2:
        a, b = formula.children
        if isinstance(a, Atom) and isinstance(b, Atom) and a.feature_id != b.feature_id:
            return ('and' if isinstance(formula, And) else 'or'), a, b
    return None


# ---------------------------------------------------------------------------
# Duplicate features
# ---------------------------------------------------------------------------

def merge_duplicate_feature(report_a, report_b, weights):
    """
    Weighted average of two reports on the same feature.

    Raises:
        LabelMismatch: If the reports' atom labels differ.
        ZeroWeights: If both weights are zero.
    """
    if not report_a.space.same_atoms(report_b.space):
        raise LabelMismatch(
            f"cannot merge reports with atoms {report_a.space.labels} and {report_b.space.labels}")
    w_a, w_b = (float(w) for w in weights)
    if w_a < 0 or w_b < 0:
        raise ValueError(f"merge weights must be nonnegative, got {(w_a, w_b)}")
    total = w_a + w_b
    if total == 0:
        raise ZeroWeights("both merge weights are zero")
    w_a, w_b = w_a / total, w_b / total
    return ProbReport(report_a.space, w_a * report_a.probs + w_b * report_b.probs)


def _with_complement_atom(report):
    if report.space.has_complement:
        return report
    return ProbReport(report.space.with_complement(), np.append(report.probs, 0.0))


def merge_reports(per_sensor, weights=None):
    """
    Fold the reports of one feature from several sensors into one.

    Args:
        per_sensor: Mapping sensor_id -> ProbReport, in a stable order.
        weights: Mapping sensor_id -> weight; missing sensors weigh 1.

    Returns:
        ProbReport: The weighted average.
    """
    weights = weights or {}
    items = list(per_sensor.items())
    if not items:
        raise InsufficientMarginals("merge_reports needs at least one report")
    if len(items) == 1:
        return items[0][1]

    reports = [r for _, r in items]
    if any(r.space.has_complement for r in reports):
        reports = [_with_complement_atom(r) for r in reports]

    merged = reports[0]
    accumulated = float(weights.get(items[0][0], 1.0))
    for (sensor_id, _), report in zip(items[1:], reports[1:]):
        w = float(weights.get(sensor_id, 1.0))
        merged = merge_duplicate_feature(merged, report, (accumulated, w))
        accumulated += w
    return merged


# ---------------------------------------------------------------------------
# Fused reports
# ---------------------------------------------------------------------------

def _ordered_formulas(objects, config):
    by_id = {obj.object_id: obj.formula for obj in objects}
    missing = [label for label in config.class_order if label not in by_id]
    if missing:
        raise LabelMismatch(f"no object definition for classes {missing}")
    return [by_id[label] for label in config.class_order]


def _pairwise_probability(formula, reports_by_feature, config):
    parts = _two_event_parts(formula)
    if parts is not None:
        connective, a, b = parts
        if a.feature_id not in reports_by_feature or b.feature_id not in reports_by_feature:
            raise UnresolvedAtom(a.label if a.feature_id not in reports_by_feature else b.label)
        ra, rb = reports_by_feature[a.feature_id], reports_by_feature[b.feature_id]
        return eval_pairwise(ra.space.events[a.index].label, rb.space.events[b.index].label,
                             connective, ra, rb, config.rho_for(a.feature_id, b.feature_id))
    return _probability_on_own_features(formula, reports_by_feature, config)


def _probability_on_own_features(formula, reports_by_feature, config):
    try:
        reports = [reports_by_feature[fid] for fid in formula_features(formula)]
    except KeyError as e:
        raise UnresolvedAtom(str(e.args[0])) from None
    if not reports:
        raise UnresolvedAtom(repr(formula))
    joint = build_global_joint(reports, config.rho, config.max_joint_cells)
    return eval_formula_on_joint(joint, formula)


def fuse(reports, objects, config):
    """
    Fused report over the configured object classes plus the complement.

    Args:
        reports: ProbReports, one per feature.
        objects: ObjectDefinitions with resolved formulas.
        config: FusionConfig.

    Returns:
        FusedReport: P(o_1), ..., P(o_I) in config order, then
                     1 - P(o_1 or ... or o_I).
    """
    reports = list(reports)
    ids = [r.feature_id for r in reports]
    if len(set(ids)) != len(ids):
        raise AxisMismatch(f"one report per feature expected, got {ids}")
    formulas = _ordered_formulas(objects, config)
    union = Or(tuple(formulas))

    if config.evaluation_mode == EvaluationMode.GLOBAL_JOINT:
        joint = build_global_joint(reports, config.rho, config.max_joint_cells)
        probs = [eval_formula_on_joint(joint, f) for f in formulas]
        complement = 1.0 - eval_formula_on_joint(joint, union)
    else:
        reports_by_feature = {r.feature_id: r for r in reports}
        probs = [_pairwise_probability(f, reports_by_feature, config) for f in formulas]
        complement = 1.0 - _probability_on_own_features(union, reports_by_feature, config)

    probs.append(max(0.0, complement))
    values = np.array(probs, dtype=float)
    total = float(values.sum())
    if total <= 0.0:
        raise LabelMismatch("every class has zero probability")
    if abs(total - 1.0) > PROB_TOL:
        # Overlapping objects in global mode; per-object joints in pairwise mode
        level = SystemLogger.WARNING if config.evaluation_mode == EvaluationMode.GLOBAL_JOINT else SystemLogger.DEBUG
        syslog.log(level, SystemLogger.FUSION, "fuse: class probabilities renormalized", {
            'total': total,
            'mode': config.evaluation_mode.value,
        })
    if total != 1.0:
        values = values / total
    return FusedReport(config.class_labels, values)


def fuse_samples(samples, objects, config, workers=1):
    """
    Fuse many samples; the output order follows the input order.

    Args:
        samples: Iterable of report lists.
        workers: Threads to use; 1 runs in the calling thread.
    """
    samples = list(samples)
    if workers <= 1 or len(samples) < 2:
        return [fuse(reports, objects, config) for reports in samples]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda reports: fuse(reports, objects, config), samples))


def classify(f):
    """Label of the most probable class; the earlier class wins ties."""
    return f.class_labels[int(np.argmax(f.class_probs))]
