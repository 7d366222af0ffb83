import logging

import numpy as np
import pytest

from eventfusion.coupling import blended_coupling
from eventfusion.errors import (
    AxisMismatch,
    CapacityError,
    EventNotFound,
    InsufficientMarginals,
    LabelMismatch,
    RhoOutOfRange,
    UnresolvedAtom,
    ZeroWeights,
)
from eventfusion.fusion_engine import (
    EvaluationMode,
    FusionConfig,
    build_global_joint,
    classify,
    eval_formula_on_joint,
    eval_pairwise,
    fuse,
    fuse_samples,
    merge_duplicate_feature,
    merge_reports,
)
from eventfusion.probability_model import (
    PROB_TOL,
    And,
    Atom,
    FusedReport,
    Not,
    ObjectDefinition,
    Or,
    ProbReport,
    normalize_report,
)

from factories import random_distribution, report, space


def atom(feature_id, index):
    return Atom(f"{feature_id}{index}", feature_id, index)


def random_formula(rng, sizes, depth=3):
    """Random resolved formula over features f0, f1, ... with the given sizes."""
    if depth == 0 or rng.random() < 0.3:
        k = int(rng.integers(len(sizes)))
        return atom(f"f{k}", int(rng.integers(sizes[k])))
    kind = rng.integers(3)
    if kind == 0:
        return Not(random_formula(rng, sizes, depth - 1))
    children = tuple(random_formula(rng, sizes, depth - 1) for _ in range(int(rng.integers(1, 4))))
    return And(children) if kind == 1 else Or(children)


def random_joint(rng):
    sizes = [int(n) for n in rng.integers(2, 4, size=int(rng.integers(2, 4)))]
    reports = [report(f"f{k}", random_distribution(rng, n, zeros=True)) for k, n in enumerate(sizes)]
    return sizes, build_global_joint(reports, float(rng.random()))


# --- Joint construction ---

def test_single_report_joint_is_the_report():
    joint = build_global_joint([report('v', [0.6, 0.4])], 0.7)
    assert joint.ndim == 1
    np.testing.assert_array_equal(joint.cells, [0.6, 0.4])


def test_two_report_joints():
    reports = [report('a', [0.5, 0.5]), report('b', [0.6, 0.4])]
    np.testing.assert_allclose(build_global_joint(reports, 0.0).cells, np.outer([0.5, 0.5], [0.6, 0.4]))
    np.testing.assert_allclose(build_global_joint(reports, 0.5).cells, [[0.4, 0.1], [0.2, 0.3]])


def test_joint_errors():
    with pytest.raises(InsufficientMarginals):
        build_global_joint([], 0.5)
    reports = [report(f"f{k}", np.full(10, 0.1)) for k in range(4)]
    with pytest.raises(CapacityError) as info:
        build_global_joint(reports, 0.5, max_cells=1000)
    assert info.value.cells == 10_000


# --- Formula evaluation ---

def test_eval_examples():
    joint = build_global_joint([report('a', [0.5, 0.5]), report('b', [0.6, 0.4])], 1.0)
    a, b = atom('a', 0), atom('b', 0)
    assert eval_formula_on_joint(joint, a) == pytest.approx(0.5)
    assert eval_formula_on_joint(joint, Or((a, b))) == pytest.approx(0.6)
    product = build_global_joint([report('a', [0.5, 0.5]), report('b', [0.6, 0.4])], 0.0)
    assert eval_formula_on_joint(product, And((a, b))) == pytest.approx(0.3)


def test_eval_unresolved_atoms():
    joint = build_global_joint([report('a', [0.5, 0.5]), report('b', [0.6, 0.4])], 0.5)
    with pytest.raises(UnresolvedAtom):
        eval_formula_on_joint(joint, Atom('a0'))
    with pytest.raises(UnresolvedAtom):
        eval_formula_on_joint(joint, atom('zz', 0))
    with pytest.raises(UnresolvedAtom):
        eval_formula_on_joint(joint, Atom('a7', 'a', 7))


def test_coherence_on_random_joints():
    rng = np.random.default_rng(11)
    for _ in range(200):
        sizes, joint = random_joint(rng)
        for _ in range(5):
            f = random_formula(rng, sizes)
            g = random_formula(rng, sizes)
            pf = eval_formula_on_joint(joint, f)
            pg = eval_formula_on_joint(joint, g)
            p_and = eval_formula_on_joint(joint, And((f, g)))
            p_or = eval_formula_on_joint(joint, Or((f, g)))
            assert abs(p_or - (pf + pg - p_and)) < 1e-12
            assert abs(eval_formula_on_joint(joint, Not(f)) - (1.0 - pf)) < 1e-12
            assert p_and <= min(pf, pg) + 1e-12
            assert p_or >= max(pf, pg) - 1e-12


def test_pairwise_examples():
    ra, rb = report('a', [0.5, 0.5]), report('b', [0.6, 0.4])
    assert eval_pairwise('a0', 'b0', 'and', ra, rb, 0.0) == pytest.approx(0.30)
    assert eval_pairwise('a0', 'b0', 'or', ra, rb, 0.0) == pytest.approx(0.80)
    assert eval_pairwise('a0', 'b0', 'and', ra, rb, 1.0) == pytest.approx(0.50)
    with pytest.raises(EventNotFound):
        eval_pairwise('zz', 'b0', 'and', ra, rb, 0.5)
    with pytest.raises(ValueError):
        eval_pairwise('a0', 'b0', 'xor', ra, rb, 0.5)


def test_pairwise_agrees_with_global_joint():
    rng = np.random.default_rng(12)
    for _ in range(200):
        ra = report('a', random_distribution(rng, int(rng.integers(2, 5)), zeros=True))
        rb = report('b', random_distribution(rng, int(rng.integers(2, 5)), zeros=True))
        rho = float(rng.random())
        joint = blended_coupling([ra, rb], rho)
        i, j = int(rng.integers(ra.space.size)), int(rng.integers(rb.space.size))
        x, y = atom('a', i), atom('b', j)
        assert abs(eval_pairwise(x.label, y.label, 'and', ra, rb, rho)
                   - eval_formula_on_joint(joint, And((x, y)))) < 1e-12
        assert abs(eval_pairwise(x.label, y.label, 'or', ra, rb, rho)
                   - eval_formula_on_joint(joint, Or((x, y)))) < 1e-12


# --- Duplicate features ---

def test_merge_duplicate_feature_examples():
    a = ProbReport(space('s', 2, 'seismic'), [0.8, 0.2])
    b = ProbReport(space('s', 2, 'acoustic'), [0.6, 0.4])
    np.testing.assert_allclose(merge_duplicate_feature(a, b, (1, 1)).probs, [0.7, 0.3])
    np.testing.assert_allclose(merge_duplicate_feature(a, b, (1, 0)).probs, a.probs)
    np.testing.assert_allclose(merge_duplicate_feature(a, b, (0.9, 0.3)).probs,
                               0.75 * a.probs + 0.25 * b.probs)


def test_merge_duplicate_feature_errors():
    a = ProbReport(space('s', 2), [0.8, 0.2])
    with pytest.raises(ZeroWeights):
        merge_duplicate_feature(a, a, (0, 0))
    with pytest.raises(ValueError):
        merge_duplicate_feature(a, a, (-1, 2))
    with pytest.raises(LabelMismatch):
        merge_duplicate_feature(a, ProbReport(space('s', 3), [0.2, 0.3, 0.5]), (1, 1))


def test_merge_reports_pads_the_complement():
    s = space('s', 2)
    per_sensor = {
        'seismic': normalize_report([0.6, 0.2], s),
        'acoustic': normalize_report([0.5, 0.5], s),
    }
    merged = merge_reports(per_sensor, {'seismic': 3.0, 'acoustic': 1.0})
    assert merged.space.has_complement
    np.testing.assert_allclose(merged.probs, [0.575, 0.275, 0.15])


def test_merge_reports_folds_three_sensors_evenly():
    s = space('s', 2)
    per_sensor = {name: ProbReport(s, p) for name, p in
                  [('x', [1.0, 0.0]), ('y', [0.0, 1.0]), ('z', [0.5, 0.5])]}
    np.testing.assert_allclose(merge_reports(per_sensor).probs, [0.5, 0.5])


# --- Fused reports ---

def test_fuse_exhaustive_pair_has_empty_complement():
    r = report('a', [0.7, 0.3])
    objects = [ObjectDefinition('x', atom('a', 0)), ObjectDefinition('y', Not(atom('a', 0)))]
    fused = fuse([r], objects, FusionConfig(('x', 'y')))
    np.testing.assert_allclose(fused.class_probs, [0.7, 0.3, 0.0], atol=1e-12)
    assert fused.class_labels == ('x', 'y', 'complement')


def test_fuse_product_and_complement():
    reports = [report('a', [0.5, 0.5]), report('b', [0.6, 0.4])]
    objects = [ObjectDefinition('o', And((atom('a', 0), atom('b', 0))))]
    fused = fuse(reports, objects, FusionConfig(('o',), rho=0.0))
    np.testing.assert_allclose(fused.class_probs, [0.3, 0.7])


def test_fuse_five_event_conjunction_is_product(rng):
    probs = [random_distribution(rng, 2) for _ in range(5)]
    reports = [report(f"f{k}", p) for k, p in enumerate(probs)]
    o2 = And(tuple(atom(f"f{k}", 0) for k in range(5)))
    fused = fuse(reports, [ObjectDefinition('o2', o2)], FusionConfig(('o2',)))
    assert fused.probability('o2') == pytest.approx(np.prod([p[0] for p in probs]), abs=1e-12)


def test_fuse_probabilities_sum_to_one():
    rng = np.random.default_rng(13)
    for _ in range(100):
        sizes, _ = random_joint(rng)
        reports = [report(f"f{k}", random_distribution(rng, n)) for k, n in enumerate(sizes)]
        objects = [ObjectDefinition(f"o{i}", random_formula(rng, sizes)) for i in range(3)]
        for mode in EvaluationMode:
            config = FusionConfig(('o0', 'o1', 'o2'), rho=float(rng.random()), evaluation_mode=mode)
            fused = fuse(reports, objects, config)
            assert abs(fused.class_probs.sum() - 1.0) < PROB_TOL
            assert np.all(fused.class_probs >= 0)


def test_overlapping_objects_are_renormalized(caplog):
    r = report('a', [0.6, 0.4])
    objects = [ObjectDefinition('x', atom('a', 0)), ObjectDefinition('y', atom('a', 0))]
    with caplog.at_level(logging.WARNING, logger='eventfusion'):
        fused = fuse([r], objects, FusionConfig(('x', 'y')))
    np.testing.assert_allclose(fused.class_probs, [0.375, 0.375, 0.25])
    assert 'renormalized' in caplog.text


def test_pairwise_mode_matches_global_on_disjoint_features():
    reports = [report('a', [0.5, 0.5]), report('b', [0.6, 0.4]), report('c', [0.2, 0.8])]
    objects = [
        ObjectDefinition('x', And((atom('a', 0), atom('b', 0)))),
        ObjectDefinition('y', Or((atom('c', 0), atom('a', 1)))),
    ]
    pairwise = fuse(reports, objects, FusionConfig(('x', 'y'), rho=0.0, evaluation_mode='pairwise'))
    global_ = fuse(reports, objects, FusionConfig(('x', 'y'), rho=0.0))
    np.testing.assert_allclose(pairwise.class_probs, global_.class_probs, atol=1e-12)


def test_fuse_rejects_mismatched_inputs():
    reports = [report('a', [0.5, 0.5])]
    objects = [ObjectDefinition('x', atom('a', 0))]
    with pytest.raises(LabelMismatch):
        fuse(reports, objects, FusionConfig(('x', 'missing')))
    with pytest.raises(AxisMismatch):
        fuse(reports + reports, objects, FusionConfig(('x',)))
    with pytest.raises(UnresolvedAtom):
        fuse(reports, [ObjectDefinition('x', atom('b', 0))], FusionConfig(('x',)))


def test_fusion_config_validation():
    with pytest.raises(RhoOutOfRange):
        FusionConfig(('x',), rho=1.5)
    with pytest.raises(ValueError):
        FusionConfig(())
    with pytest.raises(ValueError):
        FusionConfig(('x', 'x'))
    with pytest.raises(ValueError):
        FusionConfig(('x',), complement_label='x')
    config = FusionConfig(('x',), rho=0.2, rho_pairs={('a', 'b'): 0.9})
    assert config.rho_for('b', 'a') == 0.9
    assert config.rho_for('a', 'c') == 0.2


def test_estimated_config(rng):
    x = rng.normal(size=300)
    training = np.column_stack([x, x + 0.01 * rng.normal(size=300)])
    config = FusionConfig.estimated(('x',), training, 'pearson', feature_ids=['a', 'b'])
    assert config.rho == pytest.approx(1.0, abs=1e-3)
    assert config.rho_for('a', 'b') == pytest.approx(config.rho)


def test_fuse_samples_preserves_order(rng):
    objects = [ObjectDefinition('x', atom('a', 0))]
    samples = [[report('a', random_distribution(rng, 2))] for _ in range(40)]
    config = FusionConfig(('x',))
    serial = fuse_samples(samples, objects, config)
    threaded = fuse_samples(samples, objects, config, workers=4)
    assert [f.class_probs.tolist() for f in serial] == [f.class_probs.tolist() for f in threaded]


# --- Decisions ---

def test_classify_examples():
    labels = ('o1', 'o2', 'c3')
    assert classify(FusedReport(labels, [0.2, 0.7, 0.1])) == 'o2'
    assert classify(FusedReport(labels, [0.4, 0.4, 0.2])) == 'o1'
    assert classify(FusedReport(labels, [1.0, 0.0, 0.0])) == 'o1'


def test_classify_is_invariant_under_increasing_transforms(rng):
    for _ in range(100):
        p = random_distribution(rng, 4)
        q = np.sqrt(p)
        q = q / q.sum()
        labels = ('a', 'b', 'c', 'd')
        assert classify(FusedReport(labels, p)) == classify(FusedReport(labels, q))
