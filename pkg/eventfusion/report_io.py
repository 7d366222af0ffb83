"""
Reading and writing harness files: reports JSON, labels / features / scores
CSV, and the result tables (fused reports, couplings, metrics, ROC,
confusion matrices, Platt models).

Floats are written with repr, so identical runs give byte-identical files.
"""
import csv
import itertools
import json
import math

import numpy as np

from .errors import DataError, EventFusionError
from .fusion_engine import classify, merge_reports
from .probability_model import Event, EventSpace, normalize_report
from .system_logger import SystemLogger, syslog


def _float_text(value):
    return repr(float(value))


def _load_json(path):
    with open(path, encoding='utf-8') as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: invalid JSON: {e}") from e


def _dump_json(path, data):
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        json.dump(data, fh, indent=2)
        fh.write('\n')


def _read_csv(path):
    with open(path, encoding='utf-8', newline='') as fh:
        rows = list(csv.reader(fh))
    rows = [row for row in rows if row]
    if not rows:
        raise DataError(f"{path}: empty CSV file")
    return rows[0], rows[1:]


def _write_csv(path, header, rows):
    with open(path, 'w', encoding='utf-8', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)


def _ordered_by_index(path, header, rows):
    """Rows sorted by their sample_index column, which must run 0..n-1."""
    if not header or header[0] != 'sample_index':
        raise DataError(f"{path}: first column must be 'sample_index'")
    keyed = []
    for line, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{line}: expected {len(header)} columns, got {len(row)}")
        try:
            keyed.append((int(row[0]), row[1:]))
        except ValueError:
            raise DataError(f"{path}:{line}: sample_index {row[0]!r} is not an integer") from None
    keyed.sort(key=lambda item: item[0])
    if [k for k, _ in keyed] != list(range(len(keyed))):
        raise DataError(f"{path}: sample_index values must be 0..{len(keyed) - 1} without gaps")
    return [values for _, values in keyed]


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def _space_from_json(entry, path):
    try:
        feature_id = entry['feature_id']
        events = entry['events']
    except (KeyError, TypeError):
        raise DataError(f"{path}: every space needs 'feature_id' and 'events'") from None
    sensors = entry.get('sensor_ids') or []
    try:
        return EventSpace(feature_id, ','.join(sensors), tuple(Event(label) for label in events))
    except ValueError as e:
        raise DataError(f"{path}: space {feature_id!r}: {e}") from e


def _check_against(file_spaces, spaces, path):
    expected = {s.feature_id: s for s in spaces}
    for space in file_spaces:
        if space.feature_id not in expected:
            raise DataError(f"{path}: feature {space.feature_id!r} is not declared in the definitions")
        if not expected[space.feature_id].declared().same_atoms(space):
            raise DataError(
                f"{path}: feature {space.feature_id!r} has events {list(space.labels)}, "
                f"definitions declare {list(expected[space.feature_id].declared().labels)}")
    missing = sorted(set(expected) - {s.feature_id for s in file_spaces})
    if missing:
        raise DataError(f"{path}: no reports for features {missing}")
    # Keep the definitions' metadata (ranges, sensors)
    return tuple(expected[s.feature_id].declared() for s in file_spaces)


def _report(probs, space):
    # One entry more than the declared events: a trailing complement
    if isinstance(probs, list) and len(probs) == space.size + 1:
        space = space.with_complement()
    return normalize_report(probs, space)


def read_reports(path, spaces=None, sensor_weights=None):
    """
    Load a reports file.

    A sample maps each feature id to a probability list, or to a mapping
    sensor_id -> list when several sensors report the feature; those are
    merged with sensor_weights.

    Args:
        path: Reports JSON file.
        spaces: EventSpaces from the definitions to check the file against.
        sensor_weights: sensor_id -> merge weight.

    Returns:
        tuple: (EventSpaces, list of ProbReport lists in space order)

    Raises:
        DataError: Malformed file, unknown feature or event lists that do not
                   match the definitions, or an invalid probability list.
    """
    data = _load_json(path)
    if not isinstance(data, dict) or 'spaces' not in data or 'samples' not in data:
        raise DataError(f"{path}: expected an object with 'spaces' and 'samples'")
    file_spaces = tuple(_space_from_json(entry, path) for entry in data['spaces'])
    if spaces is not None:
        file_spaces = _check_against(file_spaces, spaces, path)

    samples = []
    for i, sample in enumerate(data['samples']):
        if not isinstance(sample, dict):
            raise DataError(f"{path}: sample {i} is not an object")
        reports = []
        for space in file_spaces:
            if space.feature_id not in sample:
                raise DataError(f"{path}: sample {i} has no report for feature {space.feature_id!r}")
            value = sample[space.feature_id]
            try:
                if isinstance(value, dict):
                    per_sensor = {sensor: _report(probs, space) for sensor, probs in value.items()}
                    reports.append(merge_reports(per_sensor, sensor_weights))
                else:
                    reports.append(_report(value, space))
            except (EventFusionError, TypeError, ValueError) as e:
                raise DataError(f"{path}: sample {i}, feature {space.feature_id!r}: {e}") from e
        samples.append(reports)

    syslog.debug(SystemLogger.HARNESS, "read_reports: loaded", {
        'path': str(path),
        'samples': len(samples),
        'features': [s.feature_id for s in file_spaces],
    })
    return file_spaces, samples


def write_reports(path, spaces, samples):
    """Write reports with every atom's probability, complement included."""
    data = {
        'spaces': [
            {
                'feature_id': s.feature_id,
                'sensor_ids': [x for x in s.sensor_id.split(',') if x],
                'events': [e.label for e in s.declared_events],
            }
            for s in spaces
        ],
        'samples': [
            {r.feature_id: [float(p) for p in r.probs] for r in reports}
            for reports in samples
        ],
    }
    _dump_json(path, data)


# ---------------------------------------------------------------------------
# Labels, features and scores
# ---------------------------------------------------------------------------

def read_labels(path):
    """Class labels from a `sample_index,class_label` CSV, in index order."""
    header, rows = _read_csv(path)
    if header != ['sample_index', 'class_label']:
        raise DataError(f"{path}: header must be 'sample_index,class_label'")
    return [values[0] for values in _ordered_by_index(path, header, rows)]


def write_labels(path, labels):
    _write_csv(path, ['sample_index', 'class_label'], [[i, label] for i, label in enumerate(labels)])


def read_table(path):
    """
    Numeric columns of a `sample_index,<columns...>` CSV.

    Returns:
        tuple: (column names, float array of shape (samples, columns))
    """
    header, rows = _read_csv(path)
    ordered = _ordered_by_index(path, header, rows)
    try:
        values = np.array([[float(v) for v in row] for row in ordered], dtype=float)
    except ValueError as e:
        raise DataError(f"{path}: {e}") from e
    return tuple(header[1:]), values.reshape(len(ordered), len(header) - 1)


def write_table(path, columns, values):
    _write_csv(path, ['sample_index', *columns],
               [[i, *(_float_text(v) for v in row)] for i, row in enumerate(np.asarray(values))])


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

def write_fused(path, fused):
    """One row per sample: class probabilities, then the decision."""
    if not fused:
        raise DataError("no fused reports to write")
    labels = fused[0].class_labels
    rows = [[i, *(_float_text(p) for p in f.class_probs), classify(f)] for i, f in enumerate(fused)]
    _write_csv(path, ['sample_index', *labels, 'decision'], rows)


def write_coupling(path, table):
    """Every cell in C order, indexed by atom position on each axis."""
    header = [f"i{k}" for k in range(table.ndim)] + ['probability']
    rows = [[*index, _float_text(table.cells[index])]
            for index in itertools.product(*(range(n) for n in table.shape))]
    _write_csv(path, header, rows)


def read_marginals(path):
    """Probability vectors from JSON: a list of lists or {"marginals": [...]}."""
    data = _load_json(path)
    if isinstance(data, dict):
        data = data.get('marginals')
    if not isinstance(data, list) or not all(isinstance(m, list) for m in data):
        raise DataError(f"{path}: expected a list of probability lists")
    try:
        return [np.array(m, dtype=float) for m in data]
    except (TypeError, ValueError) as e:
        raise DataError(f"{path}: {e}") from e


def write_metrics(path, summary):
    """Per-run rows, then mean and stddev rows."""
    labels = summary.class_labels
    header = ['run', 'accuracy', *(f"auc_{c}" for c in labels)]
    rows = [[i, _float_text(r.accuracy), *(_float_text(r.auc[c]) for c in labels)]
            for i, r in enumerate(summary.runs)]
    rows.append(['mean', *(_float_text(v) for v in summary.mean())])
    rows.append(['stddev', *(_float_text(v) for v in summary.stddev())])
    _write_csv(path, header, rows)


def write_roc(path, report):
    rows = []
    for label in report.class_labels:
        if label not in report.roc:
            continue
        for fpr, tpr, threshold in report.roc[label]:
            rows.append([label, _float_text(fpr), _float_text(tpr), _float_text(threshold)])
    _write_csv(path, ['class_label', 'fpr', 'tpr', 'threshold'], rows)


def write_confusion(path, report):
    """Rows are true classes, columns predicted classes."""
    rows = [[label, *(int(v) for v in row)] for label, row in zip(report.class_labels, report.confusion)]
    _write_csv(path, ['true\\predicted', *report.class_labels], rows)


def write_platt(path, models):
    _dump_json(path, {event: {'a': m.a, 'b': m.b} for event, m in models.items()})


def write_ranges(path, ranges):
    """Derived event ranges: {class: {feature: [lower, upper]}} with inf as a string."""
    def bound(x):
        return x if math.isfinite(x) else ('inf' if x > 0 else '-inf')

    _dump_json(path, {
        label: {fid: [bound(iv.lower), bound(iv.upper)] for fid, iv in by_feature.items()}
        for label, by_feature in ranges.items()
    })
