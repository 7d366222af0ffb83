"""
Evaluation of fusion methods on labelled samples: accuracy, confusion matrix,
and one-vs-rest ROC curves with AUC per class.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from sklearn.metrics import auc, confusion_matrix, roc_curve

from .baselines import dempster_fuse, independent_fuse
from .errors import LabelMismatch, SingleClassLabels, TotalConflict
from .fusion_engine import classify, fuse
from .probability_model import FusedReport
from .system_logger import SystemLogger, syslog


class FusionMethod(str, Enum):
    PROPOSED = 'proposed'
    INDEPENDENT = 'independent'
    DEMPSTER = 'dempster'


@dataclass(frozen=True, eq=False)
class RocCurve:
    """ROC points sorted by FPR; thresholds decrease along the list."""
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def __iter__(self):
        return iter(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))


def roc_points(scores, labels):
    """
    One ROC point per distinct score threshold, and the trapezoid AUC.

    Args:
        scores: Real scores, higher meaning more likely positive.
        labels: Binary labels (truthy = positive).

    Raises:
        SingleClassLabels: If only one label value is present.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).astype(bool).ravel()
    if scores.size != labels.size:
        raise LabelMismatch(f"{scores.size} scores for {labels.size} labels")
    if labels.all() or not labels.any():
        raise SingleClassLabels("roc_points needs both positive and negative labels")
    fpr, tpr, thresholds = roc_curve(labels, scores, drop_intermediate=False)
    return RocCurve(fpr, tpr, thresholds, float(auc(fpr, tpr)))


@dataclass(frozen=True, eq=False)
class MetricsReport:
    """
    Classification metrics over one set of fused samples.

    confusion rows are true classes and columns predicted classes, both in
    class_labels order. roc holds a curve only for classes that have both
    positive and negative samples; auc is NaN for the others.
    """
    class_labels: tuple
    accuracy: float
    confusion: np.ndarray
    roc: dict = field(default_factory=dict)
    auc: dict = field(default_factory=dict)

    @property
    def n_samples(self):
        return int(self.confusion.sum())

    def same_as(self, other):
        """Exact equality of every number in both reports."""
        if self.class_labels != other.class_labels or self.accuracy != other.accuracy:
            return False
        if not np.array_equal(self.confusion, other.confusion) or self.roc.keys() != other.roc.keys():
            return False
        for label in self.roc:
            mine, theirs = self.roc[label], other.roc[label]
            if not (np.array_equal(mine.fpr, theirs.fpr) and np.array_equal(mine.tpr, theirs.tpr)):
                return False
        return np.array_equal(list(self.auc.values()), list(other.auc.values()), equal_nan=True)


def metrics_from_fused(fused, labels, class_labels):
    """
    Build a MetricsReport from fused reports and true labels.

    Raises:
        LabelMismatch: If a true label is not one of class_labels, or the
                       fused reports use other classes.
    """
    class_labels = tuple(class_labels)
    labels = list(labels)
    if len(fused) != len(labels):
        raise LabelMismatch(f"{len(fused)} fused reports for {len(labels)} labels")
    if not labels:
        raise LabelMismatch("no samples to evaluate")
    unknown = sorted(set(labels) - set(class_labels))
    if unknown:
        raise LabelMismatch(f"labels {unknown} are not classes of the definitions {list(class_labels)}")
    for report in fused:
        if report.class_labels != class_labels:
            raise LabelMismatch(f"fused classes {report.class_labels} differ from {class_labels}")

    predicted = [classify(f) for f in fused]
    confusion = confusion_matrix(labels, predicted, labels=list(class_labels))
    accuracy = float(np.trace(confusion)) / float(confusion.sum())

    probs = np.vstack([f.class_probs for f in fused])
    truth = np.array(labels)
    roc, auc_by_class = {}, {}
    for k, label in enumerate(class_labels):
        positive = truth == label
        if positive.all() or not positive.any():
            auc_by_class[label] = float('nan')
            continue
        curve = roc_points(probs[:, k], positive)
        roc[label] = curve
        auc_by_class[label] = curve.auc
    return MetricsReport(class_labels, accuracy, confusion, roc, auc_by_class)


# ---------------------------------------------------------------------------
# Running the fusion methods
# ---------------------------------------------------------------------------

def _uniform(class_labels):
    return FusedReport(class_labels, np.full(len(class_labels), 1.0 / len(class_labels)))


def fuse_dataset(samples, method, objects, config, sensor_features=None, ds_discount=0.0, workers=1):
    """
    Fuse every sample with one method, keeping the input order.

    Args:
        samples: Report lists, one per sample.
        method: FusionMethod.
        objects: Object definitions of the classes in config.class_order.
        config: FusionConfig; independent fusion ignores its rho.
        sensor_features: sensor_id -> feature ids, required for dempster.
        workers: Threads to spread the samples over.

    Returns:
        list of FusedReport
    """
    method = FusionMethod(method)
    if method == FusionMethod.PROPOSED:
        def run(reports):
            return fuse(reports, objects, config)
    elif method == FusionMethod.INDEPENDENT:
        def run(reports):
            return independent_fuse(reports, objects, config.class_order, config.complement_label)
    else:
        if not sensor_features:
            raise ValueError("dempster fusion needs the sensor -> features mapping")

        def run(reports):
            try:
                return dempster_fuse(reports, objects, sensor_features, config.class_order,
                                     config.complement_label, ds_discount)
            except TotalConflict as e:
                syslog.warning(SystemLogger.BASELINE, "fuse_dataset: total conflict, using uniform probabilities", {
                    'conflict': e.conflict,
                })
                return _uniform(config.class_labels)

    samples = list(samples)
    if workers <= 1 or len(samples) < 2:
        return [run(reports) for reports in samples]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, samples))


def evaluate(samples, labels, method, objects, config, sensor_features=None, ds_discount=0.0, workers=1):
    """
    Fuse, classify and score a labelled sample set.

    Returns:
        MetricsReport

    Raises:
        LabelMismatch: If a label is not a class of the definitions.
    """
    fused = fuse_dataset(samples, method, objects, config, sensor_features, ds_discount, workers)
    report = metrics_from_fused(fused, labels, config.class_labels)
    syslog.info(SystemLogger.HARNESS, "evaluate: metrics computed", {
        'method': FusionMethod(method).value,
        'samples': report.n_samples,
        'accuracy': report.accuracy,
    })
    return report


@dataclass(frozen=True, eq=False)
class EvaluationSummary:
    """
    Metrics of repeated runs. full covers every sample; runs holds one
    report per bootstrap resample, or just the full report for a single run.
    """
    full: MetricsReport
    runs: tuple

    @property
    def class_labels(self):
        return self.full.class_labels

    def _table(self):
        return np.array([[r.accuracy] + [r.auc[c] for c in self.class_labels] for r in self.runs])

    def mean(self):
        return np.nanmean(self._table(), axis=0)

    def stddev(self):
        if len(self.runs) < 2:
            return np.zeros(1 + len(self.class_labels))
        return np.nanstd(self._table(), axis=0, ddof=1)


def evaluate_runs(samples, labels, method, objects, config, runs=1, seed=0,
                  sensor_features=None, ds_discount=0.0, workers=1):
    """
    Evaluate once on all samples and, for runs > 1, on bootstrap resamples.

    Every sample is fused once; resamples reuse the fused reports. Resample
    indices come from child seeds of `seed`, so results depend on nothing
    but the inputs and the seed.
    """
    if int(runs) < 1:
        raise ValueError(f"runs must be at least 1, got {runs}")
    labels = list(labels)
    fused = fuse_dataset(samples, method, objects, config, sensor_features, ds_discount, workers)
    full = metrics_from_fused(fused, labels, config.class_labels)
    if runs == 1:
        return EvaluationSummary(full, (full,))

    reports = []
    n = len(labels)
    for child in np.random.SeedSequence(seed).spawn(int(runs)):
        rng = np.random.default_rng(child)
        indices = rng.integers(0, n, size=n)
        reports.append(metrics_from_fused([fused[i] for i in indices], [labels[i] for i in indices],
                                          config.class_labels))
    summary = EvaluationSummary(full, tuple(reports))
    syslog.info(SystemLogger.HARNESS, "evaluate_runs: bootstrap finished", {
        'method': FusionMethod(method).value,
        'runs': int(runs),
        'mean_accuracy': float(summary.mean()[0]),
    })
    return summary
