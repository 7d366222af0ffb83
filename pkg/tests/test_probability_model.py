import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from eventfusion.errors import (
    AxisMismatch,
    AxisOutOfRange,
    EventNotFound,
    InvalidDistribution,
    LabelMismatch,
    MassExceedsUnity,
    NegativeMass,
)
from eventfusion.probability_model import (
    COMPLEMENT_LABEL,
    And,
    Atom,
    CouplingTable,
    Event,
    EventSpace,
    FusedReport,
    Interval,
    Not,
    Or,
    ProbReport,
    as_distribution,
    entropy,
    event_probability,
    formula_features,
    iter_atoms,
    joint_entropy,
    marginalize,
    mutual_information,
    normalize_report,
)

from factories import space

GREEDY_TABLE = [[0.5, 0.0], [0.1, 0.4]]


def table(cells):
    cells = np.asarray(cells, dtype=float)
    return CouplingTable(tuple(space(f"x{k}", n) for k, n in enumerate(cells.shape)), cells)


# --- Event spaces ---

def test_event_space_needs_an_event():
    with pytest.raises(ValueError):
        EventSpace('v', 'radar', ())


def test_event_space_rejects_duplicate_labels():
    with pytest.raises(ValueError):
        EventSpace('v', 'radar', (Event('a1_v'), Event('a1_v')))


def test_complement_atom_is_last_and_has_no_range():
    s = space('v', 2).with_complement()
    assert s.has_complement
    assert s.labels[-1] == COMPLEMENT_LABEL
    assert s.events[-1].interval is None
    assert s.declared().labels == ('v0', 'v1')
    with pytest.raises(ValueError):
        EventSpace('v', 'radar', (Event(COMPLEMENT_LABEL), Event('a1_v')))
    with pytest.raises(ValueError):
        EventSpace('v', 'radar', (Event('a1_v'), Event(COMPLEMENT_LABEL, Interval(0, 1))), True)


def test_index_of_unknown_event():
    with pytest.raises(EventNotFound):
        space('v', 2).index_of('nope')


def test_interval_bounds():
    assert str(Interval(300)) == '[300, inf)'
    assert str(Interval(-math.inf, -30)) == '[-inf, -30)'
    assert Interval(0, 10).contains(0) and not Interval(0, 10).contains(10)
    assert Interval(0, 20).intersects(Interval(15, 50))
    assert not Interval(0, 10).intersects(Interval(10, 20))
    with pytest.raises(ValueError):
        Interval(5, 5)
    with pytest.raises(ValueError):
        Interval(math.nan, 1)


# --- Reports ---

def test_normalize_report_full_mass():
    r = normalize_report([0.6, 0.4], space('v', 2))
    assert not r.space.has_complement
    np.testing.assert_allclose(r.probs, [0.6, 0.4])


def test_normalize_report_appends_complement():
    r = normalize_report([0.5, 0.3], space('v', 2))
    assert r.space.has_complement
    np.testing.assert_allclose(r.probs, [0.5, 0.3, 0.2], atol=1e-12)
    assert r.probability_of(COMPLEMENT_LABEL) == pytest.approx(0.2)


def test_normalize_report_clamps_near_unit_sums():
    over = normalize_report([0.5, 0.5 + 9e-10], space('a', 2))
    under = normalize_report([0.6, 0.4 - 9e-10], space('b', 2))
    assert not over.space.has_complement and not under.space.has_complement
    assert over.probs.sum() == pytest.approx(1.0, abs=1e-15)
    assert under.probs.sum() == pytest.approx(1.0, abs=1e-15)


def test_normalize_report_exceeds_unity():
    with pytest.raises(MassExceedsUnity) as info:
        normalize_report([0.7, 0.6], space('v', 2))
    assert info.value.total == pytest.approx(1.3)


def test_normalize_report_negative_entry():
    with pytest.raises(NegativeMass):
        normalize_report([-0.1, 0.5], space('v', 2))


def test_normalize_report_wrong_length():
    with pytest.raises(LabelMismatch):
        normalize_report([0.2, 0.3, 0.1], space('v', 2))


@given(arrays(np.float64, 3, elements=st.floats(0.0, 0.33)))
def test_normalize_report_is_idempotent(raw):
    first = normalize_report(raw, space('v', 3))
    second = normalize_report(first.probs, first.space)
    assert second.space == first.space
    assert np.array_equal(second.probs, first.probs)


def test_prob_report_validates():
    with pytest.raises(InvalidDistribution):
        ProbReport(space('v', 2), [0.5, 0.4])
    with pytest.raises(LabelMismatch):
        ProbReport(space('v', 2), [1.0])


def test_report_arrays_are_read_only():
    r = ProbReport(space('v', 2), [0.5, 0.5])
    with pytest.raises(ValueError):
        r.probs[0] = 1.0


def test_event_probability_of_atom_subsets():
    r = normalize_report([0.5, 0.3], space('v', 2))
    assert event_probability(r, 'v0') == pytest.approx(0.5)
    assert event_probability(r, ['v0', 'v1']) == pytest.approx(0.8)
    assert event_probability(r, ['v0', 'v0']) == pytest.approx(0.5)


# --- Information measures ---

def test_entropy_examples():
    assert entropy([0.5, 0.5]) == pytest.approx(1.0)
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy([0.5, 0.3, 0.2]) == pytest.approx(1.48548, abs=1e-5)


def test_entropy_rejects_invalid_vectors():
    with pytest.raises(InvalidDistribution):
        entropy([0.5, 0.6])
    with pytest.raises(NegativeMass):
        entropy([1.5, -0.5])


@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=8), st.randoms(use_true_random=False))
def test_entropy_is_permutation_invariant(weights, random):
    p = np.array(weights) / sum(weights)
    shuffled = p.copy()
    random.shuffle(shuffled)
    assert entropy(shuffled) == pytest.approx(entropy(p), abs=1e-12)


def test_mutual_information_examples():
    product = table(np.outer([0.5, 0.5], [0.6, 0.4]))
    assert mutual_information(product) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(table([[0.5, 0.0], [0.0, 0.5]])) == pytest.approx(1.0)
    assert mutual_information(table(GREEDY_TABLE)) == pytest.approx(0.60999, abs=1e-5)


def test_mutual_information_needs_two_axes():
    with pytest.raises(AxisMismatch):
        mutual_information(table(np.full((2, 2, 2), 0.125)))


def test_mutual_information_matches_entropy_identity(rng):
    for _ in range(1000):
        shape = tuple(rng.integers(2, 6, size=2))
        t = table(rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape))
        hx = entropy(marginalize(t, 0))
        hy = entropy(marginalize(t, 1))
        mi = mutual_information(t)
        assert abs(mi - (hx + hy - joint_entropy(t))) < 1e-9
        assert -1e-12 <= mi <= min(hx, hy) + 1e-9


def test_marginalize_examples():
    t = table(GREEDY_TABLE)
    np.testing.assert_allclose(marginalize(t, 0), [0.5, 0.5])
    np.testing.assert_allclose(marginalize(t, 1), [0.6, 0.4])
    one_axis = CouplingTable.from_report(ProbReport(space('v', 3), [0.2, 0.3, 0.5]))
    np.testing.assert_array_equal(marginalize(one_axis, 0), [0.2, 0.3, 0.5])
    with pytest.raises(AxisOutOfRange):
        marginalize(t, 2)


def test_coupling_table_validation():
    with pytest.raises(AxisMismatch):
        CouplingTable((space('x', 2),), [[0.5, 0.5]])
    with pytest.raises(NegativeMass):
        table([[0.6, -0.1], [0.25, 0.25]])
    with pytest.raises(InvalidDistribution):
        table([[0.5, 0.1], [0.1, 0.1]])
    with pytest.raises(AxisMismatch):
        CouplingTable((space('x', 2), space('x', 2)), np.full((2, 2), 0.25))


def test_as_distribution_returns_copy():
    p = np.array([0.25, 0.75])
    q = as_distribution(p)
    q[0] = 1.0
    assert p[0] == 0.25


# --- Formulas and fused reports ---

def test_formula_walkers():
    a = Atom('a1_v', 'v', 0)
    b = Atom('a2_r', 'r', 1)
    f = Or((And((a, b)), Not(a)))
    assert [x.label for x in iter_atoms(f)] == ['a1_v', 'a2_r', 'a1_v']
    assert formula_features(f) == ('v', 'r')
    assert a.resolved and not Atom('x').resolved
    with pytest.raises(ValueError):
        And(())


def test_fused_report_validation():
    f = FusedReport(('o1', 'o2', 'c3'), [0.2, 0.7, 0.1])
    assert f.probability('o2') == pytest.approx(0.7)
    with pytest.raises(LabelMismatch):
        FusedReport(('o1', 'o1'), [0.5, 0.5])
    with pytest.raises(InvalidDistribution):
        FusedReport(('o1', 'o2'), [0.5, 0.4])


@settings(max_examples=50)
@given(arrays(np.float64, (3, 4), elements=st.floats(0.0, 1.0)).filter(lambda a: a.sum() > 1e-3))
def test_joint_entropy_bounds(raw):
    t = table(raw / raw.sum())
    h = joint_entropy(t)
    assert max(entropy(marginalize(t, 0)), entropy(marginalize(t, 1))) <= h + 1e-9
    assert h <= math.log2(12) + 1e-9
