"""
Command-line harness.

    eventfusion fuse --defs FILE --reports FILE [--rho R | --estimate-rho METHOD --train FILE] --out FILE
    eventfusion simulate --config FILE --out FILE
    eventfusion eval --defs FILE --reports FILE --labels FILE --method M --metrics-out FILE --roc-out FILE
    eventfusion calibrate --scores FILE --labels FILE --out FILE
    eventfusion couple --marginals FILE --rho R --out FILE
    eventfusion derive-ranges --features FILE --labels FILE --out FILE

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""
import os
import sys

import click
import numpy as np

from . import create_harness
from .calibration import derive_event_range, platt_fit_events
from .coupling import RhoMethod, blended_coupling
from .definitions import class_partition, parse_file, resolve, sensor_features, validate_ranges
from .errors import DataError, EventFusionError, ParseError
from .fusion_engine import EvaluationMode, FusionConfig, fuse_samples
from .metrics import FusionMethod, evaluate_runs
from .report_io import (
    read_labels,
    read_marginals,
    read_reports,
    read_table,
    write_confusion,
    write_coupling,
    write_fused,
    write_labels,
    write_metrics,
    write_platt,
    write_ranges,
    write_reports,
    write_roc,
    write_table,
)
from .scenario import ScenarioConfig, generate_scenario
from .system_logger import SystemLogger, syslog

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

_existing_file = click.Path(exists=True, dir_okay=False)
_output_file = click.Path(dir_okay=False, writable=True)


def _parse_weights(values):
    weights = {}
    for value in values:
        sensor, sep, weight = value.partition('=')
        try:
            if not sep or not sensor:
                raise ValueError(value)
            weights[sensor] = float(weight)
        except ValueError:
            raise click.BadParameter(f"expected SENSOR=WEIGHT, got {value!r}", param_hint='--sensor-weight')
    return weights


def _load_definitions(path):
    """Parse, check and resolve a definition file."""
    try:
        d = parse_file(path)
    except ParseError as e:
        raise DataError(f"{path}:{e}") from e
    validate_ranges(d)
    spaces, objects = resolve(d)
    classes, complement = class_partition(objects)
    return d, spaces, classes, complement


def _fusion_config(settings, classes, complement, rho, estimate_rho, train, mode):
    if rho is not None and estimate_rho is not None:
        raise click.UsageError("--rho and --estimate-rho are mutually exclusive")
    if estimate_rho is not None and train is None:
        raise click.UsageError("--estimate-rho needs --train FILE")

    options = dict(
        evaluation_mode=EvaluationMode(mode),
        complement_label=complement,
        sensor_weights=dict(settings['SENSOR_WEIGHTS']),
        max_joint_cells=int(settings['MAX_JOINT_CELLS']),
    )
    class_order = [obj.object_id for obj in classes]
    if estimate_rho is None:
        return FusionConfig(class_order, rho=0.0 if rho is None else rho, **options)

    columns, values = read_table(train)
    return FusionConfig.estimated(class_order, values, RhoMethod(estimate_rho), feature_ids=list(columns), **options)


def _default_sibling(path, suffix):
    root, _ = os.path.splitext(path)
    return f"{root}{suffix}"


# ---------------------------------------------------------------------------
# Command group
# ---------------------------------------------------------------------------

@click.group(help='Decision-level sensor fusion over event formulas.')
@click.option('--config', 'config_file', type=_existing_file, help='JSON settings file.')
@click.option('--log-file', type=_output_file, help='Also log to this rotating file.')
@click.option('-v', '--verbose', is_flag=True, help='Log debug messages.')
@click.pass_context
def cli(ctx, config_file, log_file, verbose):
    overrides = {}
    if log_file:
        overrides['LOG_FILE'] = log_file
    if verbose:
        overrides['LOG_LEVEL'] = 'DEBUG'
    ctx.obj = create_harness(config_file=config_file, overrides=overrides)


rho_options = [
    click.option('--rho', type=click.FloatRange(0.0, 1.0), default=None, help='Fixed dependence rho in [0, 1].'),
    click.option('--estimate-rho', type=click.Choice([RhoMethod.PEARSON.value, RhoMethod.DISTANCE_CORRELATION.value]),
                 default=None, help='Estimate rho from training features.'),
    click.option('--train', type=_existing_file, default=None, help='Training features CSV for --estimate-rho.'),
    click.option('--mode', type=click.Choice([m.value for m in EvaluationMode]), default=EvaluationMode.GLOBAL_JOINT.value,
                 show_default=True, help='Joint evaluation mode.'),
    click.option('--sensor-weight', 'sensor_weights', multiple=True, metavar='SENSOR=WEIGHT',
                 help='Merge weight for a sensor reporting a shared feature.'),
]


def with_rho_options(f):
    for option in reversed(rho_options):
        f = option(f)
    return f


@cli.command('fuse')
@click.option('--defs', type=_existing_file, required=True, help='Definition file.')
@click.option('--reports', type=_existing_file, required=True, help='Reports JSON.')
@with_rho_options
@click.option('--out', type=_output_file, required=True, help='Fused reports CSV.')
@click.pass_obj
def fuse_command(settings, defs, reports, rho, estimate_rho, train, mode, sensor_weights, out):
    """Fuse every sample of a reports file."""
    settings['SENSOR_WEIGHTS'] = {**settings['SENSOR_WEIGHTS'], **_parse_weights(sensor_weights)}
    _, spaces, classes, complement = _load_definitions(defs)
    config = _fusion_config(settings, classes, complement, rho, estimate_rho, train, mode)
    _, samples = read_reports(reports, spaces, config.sensor_weights)
    if not samples:
        raise DataError(f"{reports}: no samples")

    fused = fuse_samples(samples, classes, config, workers=int(settings['WORKERS']))
    write_fused(out, fused)
    syslog.success(SystemLogger.CLI, "fuse: wrote fused reports", {'samples': len(fused), 'out': out, 'rho': config.rho})


@cli.command('simulate')
@click.option('--config', 'scenario_file', type=_existing_file, required=True, help='Scenario JSON.')
@click.option('--out', type=_output_file, required=True, help='Reports JSON to write.')
@click.option('--seed', type=int, default=None, help='Override the scenario seed.')
@click.option('--samples', 'n_samples', type=click.IntRange(min=1), default=None, help='Override the sample count.')
@click.option('--labels-out', type=_output_file, default=None, help='Labels CSV (default: <out>_labels.csv).')
@click.option('--features-out', type=_output_file, default=None, help='Feature values CSV.')
def simulate_command(scenario_file, out, seed, n_samples, labels_out, features_out):
    """Draw a synthetic labelled scenario."""
    scenario = ScenarioConfig.from_json(scenario_file).with_overrides(n_samples=n_samples, seed=seed)
    dataset = generate_scenario(scenario)

    write_reports(out, dataset.spaces, dataset.samples)
    write_labels(labels_out or _default_sibling(out, '_labels.csv'), dataset.labels)
    if features_out:
        write_table(features_out, dataset.feature_ids, dataset.features)
    syslog.success(SystemLogger.CLI, "simulate: scenario written", {'samples': len(dataset), 'seed': scenario.seed})


@cli.command('eval')
@click.option('--defs', type=_existing_file, required=True, help='Definition file.')
@click.option('--reports', type=_existing_file, required=True, help='Reports JSON.')
@click.option('--labels', type=_existing_file, required=True, help='Labels CSV.')
@click.option('--method', type=click.Choice([m.value for m in FusionMethod]), default=FusionMethod.PROPOSED.value,
              show_default=True, help='Fusion method.')
@with_rho_options
@click.option('--runs', type=click.IntRange(min=1), default=1, show_default=True,
              help='Bootstrap runs; 1 evaluates the data once.')
@click.option('--seed', type=int, default=0, show_default=True, help='Seed of the bootstrap resamples.')
@click.option('--metrics-out', type=_output_file, required=True, help='Metrics CSV.')
@click.option('--roc-out', type=_output_file, required=True, help='ROC points CSV.')
@click.option('--confusion-out', type=_output_file, default=None, help='Confusion matrix CSV.')
@click.pass_obj
def eval_command(settings, defs, reports, labels, method, rho, estimate_rho, train, mode, sensor_weights,
                 runs, seed, metrics_out, roc_out, confusion_out):
    """Score a fusion method against labelled samples."""
    settings['SENSOR_WEIGHTS'] = {**settings['SENSOR_WEIGHTS'], **_parse_weights(sensor_weights)}
    d, spaces, classes, complement = _load_definitions(defs)
    config = _fusion_config(settings, classes, complement, rho, estimate_rho, train, mode)
    _, samples = read_reports(reports, spaces, config.sensor_weights)
    truth = read_labels(labels)
    if len(truth) != len(samples):
        raise DataError(f"{labels}: {len(truth)} labels for {len(samples)} samples")

    summary = evaluate_runs(
        samples, truth, FusionMethod(method), classes, config,
        runs=runs,
        seed=seed,
        sensor_features=sensor_features(d),
        ds_discount=float(settings['DS_EVIDENCE_DISCOUNT']),
        workers=int(settings['WORKERS']),
    )
    write_metrics(metrics_out, summary)
    write_roc(roc_out, summary.full)
    if confusion_out:
        write_confusion(confusion_out, summary.full)
    click.echo(f"{method}: accuracy {summary.full.accuracy:.4f} over {summary.full.n_samples} samples")
    syslog.success(SystemLogger.CLI, "eval: metrics written", {
        'method': method,
        'runs': runs,
        'accuracy': summary.full.accuracy,
    })


@cli.command('calibrate')
@click.option('--scores', type=_existing_file, required=True, help='Scores CSV: sample_index,<event...>.')
@click.option('--labels', type=_existing_file, required=True, help='Binary labels CSV with the same columns.')
@click.option('--out', type=_output_file, required=True, help='Platt models JSON.')
def calibrate_command(scores, labels, out):
    """Fit one Platt model per event column."""
    score_columns, score_values = read_table(scores)
    label_columns, label_values = read_table(labels)
    if score_values.shape[0] != label_values.shape[0]:
        raise DataError(f"{scores} has {score_values.shape[0]} rows, {labels} has {label_values.shape[0]}")
    label_map = {c: label_values[:, k] for k, c in enumerate(label_columns)}
    models = platt_fit_events({c: score_values[:, k] for k, c in enumerate(score_columns)}, label_map)
    write_platt(out, models)
    syslog.success(SystemLogger.CLI, "calibrate: models written", {'events': list(models), 'out': out})


@cli.command('couple')
@click.option('--marginals', type=_existing_file, required=True, help='JSON list of probability vectors.')
@click.option('--rho', type=click.FloatRange(0.0, 1.0), required=True, help='Dependence rho in [0, 1].')
@click.option('--out', type=_output_file, required=True, help='Coupling CSV.')
def couple_command(marginals, rho, out):
    """Write the blended coupling of a set of marginals."""
    table = blended_coupling(read_marginals(marginals), rho)
    write_coupling(out, table)


@cli.command('derive-ranges')
@click.option('--features', type=_existing_file, required=True, help='Feature values CSV.')
@click.option('--labels', type=_existing_file, required=True, help='Labels CSV.')
@click.option('--out', type=_output_file, required=True, help='Ranges JSON.')
@click.option('--clamp-at-zero', is_flag=True, help='Clamp lower bounds at 0.')
def derive_ranges_command(features, labels, out, clamp_at_zero):
    """Two-sigma event ranges per class and feature."""
    columns, values = read_table(features)
    truth = np.array(read_labels(labels))
    if truth.size != values.shape[0]:
        raise DataError(f"{labels}: {truth.size} labels for {values.shape[0]} samples")
    ranges = {}
    for label in dict.fromkeys(truth.tolist()):
        rows = values[truth == label]
        ranges[label] = {c: derive_event_range(rows[:, k], clamp_at_zero) for k, c in enumerate(columns)}
    write_ranges(out, ranges)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv=None):
    """
    Run the CLI and map failures to exit codes.

    Returns:
        int: 0 on success, 1 on usage errors, 2 on data or validation errors.
    """
    args = sys.argv[1:] if argv is None else list(argv)
    try:
        rv = cli.main(args=args, prog_name='eventfusion', standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.Abort:
        click.echo('Aborted.', err=True)
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except (EventFusionError, OSError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        syslog.error(SystemLogger.CLI, f"main: {type(e).__name__}", {'error': str(e), 'argv': args})
        return EXIT_DATA
    return rv if isinstance(rv, int) else EXIT_OK
