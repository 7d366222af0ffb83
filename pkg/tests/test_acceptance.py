"""
End-to-end check on the shipped correlated scenario: fusing with a rho
estimated from training features must do at least as well as treating the
features as independent.
"""
import time
from importlib import resources

import pytest

from eventfusion.definitions import class_partition, parse_file, resolve, validate_ranges
from eventfusion.fusion_engine import FusionConfig
from eventfusion.metrics import evaluate
from eventfusion.scenario import ScenarioConfig, generate_scenario

# Values observed on the shipped scenario (seed 42, training seed 43)
EXPECTED_RHO = 0.66826
EXPECTED_ACCURACY = {'proposed': 0.8745, 'independent': 0.8665}
EXPECTED_MINORITY_AUC = {'proposed': 0.96356, 'independent': 0.95786}


@pytest.fixture(scope='module')
def outcome():
    data = resources.files('eventfusion') / 'data'
    started = time.perf_counter()

    d = parse_file(str(data / 'dataset1.defs'))
    validate_ranges(d)
    _, objects = resolve(d)
    classes, complement = class_partition(objects)
    class_order = [o.object_id for o in classes]

    scenario = ScenarioConfig.from_json(str(data / 'correlated_scenario.json'))
    test_set = generate_scenario(scenario)
    training = generate_scenario(scenario.with_overrides(seed=scenario.seed + 1))

    proposed_config = FusionConfig.estimated(class_order, training.features, 'pearson',
                                             complement_label=complement)
    independent_config = FusionConfig(class_order, rho=0.0, complement_label=complement)
    proposed = evaluate(test_set.samples, test_set.labels, 'proposed', classes, proposed_config)
    independent = evaluate(test_set.samples, test_set.labels, 'independent', classes, independent_config)
    return {
        'rho': proposed_config.rho,
        'proposed': proposed,
        'independent': independent,
        'seconds': time.perf_counter() - started,
    }


def test_estimated_rho_reflects_correlation(outcome):
    assert 0.0 < outcome['rho'] <= 1.0


def test_proposed_accuracy_not_below_independent(outcome):
    assert outcome['proposed'].accuracy >= outcome['independent'].accuracy


def test_minority_class_auc_not_below_independent(outcome):
    assert outcome['proposed'].auc['o2'] >= outcome['independent'].auc['o2']


def test_estimated_rho_is_pinned(outcome):
    assert outcome['rho'] == pytest.approx(EXPECTED_RHO, abs=5e-5)


@pytest.mark.parametrize('method', ['proposed', 'independent'])
def test_metrics_are_pinned(outcome, method):
    assert outcome[method].accuracy == pytest.approx(EXPECTED_ACCURACY[method], abs=1e-6)
    assert outcome[method].auc['o2'] == pytest.approx(EXPECTED_MINORITY_AUC[method], abs=5e-5)


def test_runs_in_under_thirty_seconds(outcome):
    assert outcome['seconds'] < 30.0
