"""
Joint distributions over products of event spaces with prescribed marginals.

The minimum-MI coupling is the outer product of the marginals. The maximum-MI
coupling is approximated by greedily minimizing joint entropy: large residual
masses are kept together in a single cell. Both are blended with a scalar rho
measuring how strongly the features depend on each other.
"""
import functools
import itertools
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.distance import pdist, squareform
from scipy.stats import pearsonr

from .errors import (
    AxisMismatch,
    CouplingError,
    DegenerateInputWarning,
    InsufficientMarginals,
    RhoOutOfRange,
    SampleError,
)
from .probability_model import (
    PROB_TOL,
    CouplingTable,
    EventSpace,
    ProbReport,
    as_distribution,
    unit_mass,
)
from .system_logger import SystemLogger, syslog

# Residual masses below this are treated as exhausted
RESIDUAL_EPS = 1e-12


class RhoMethod(str, Enum):
    PEARSON = 'pearson'
    DISTANCE_CORRELATION = 'distance-correlation'
    FIXED = 'fixed'


@dataclass(frozen=True)
class RhoEstimate:
    value: float
    method: RhoMethod
    pair: tuple = ('x', 'y')

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise RhoOutOfRange(self.value)

    def __float__(self):
        return float(self.value)


def _prepare_marginals(marginals, axes=None):
    marginals = list(marginals)
    if len(marginals) < 2:
        raise InsufficientMarginals(f"a coupling needs at least 2 marginals, got {len(marginals)}")

    arrays = []
    spaces = []
    for i, m in enumerate(marginals):
        if isinstance(m, ProbReport):
            arrays.append(unit_mass(np.array(m.probs, dtype=float)))
            spaces.append(m.space)
        else:
            arr = as_distribution(m, f"marginal {i}")
            arrays.append(unit_mass(arr))
            spaces.append(EventSpace.anonymous(arr.size, f"x{i}"))

    if axes is not None:
        spaces = list(axes)
        if [s.size for s in spaces] != [a.size for a in arrays]:
            raise AxisMismatch("axes do not match the marginal lengths")
    return arrays, tuple(spaces)


def min_mi_coupling(marginals, axes=None):
    """
    Product (independence) coupling of the marginals.

    Args:
        marginals: ProbReports or probability vectors, at least two.
        axes: Optional EventSpaces naming the axes of bare vectors.

    Returns:
        CouplingTable: cell(i, j, ...) = p0[i] * p1[j] * ...
    """
    arrays, spaces = _prepare_marginals(marginals, axes)
    cells = functools.reduce(np.multiply.outer, arrays)
    return CouplingTable(spaces, cells)


def max_mi_coupling(marginals, axes=None):
    """
    Greedy approximation of the minimum-joint-entropy coupling.

    Repeatedly takes the largest residual mass in every axis (lowest index on
    ties), assigns the smallest of them to the joint cell they index, and
    subtracts it from each chosen residual.

    Raises:
        CouplingError: If the marginals carry different total mass.
    """
    arrays, spaces = _prepare_marginals(marginals, axes)
    residuals = [a.copy() for a in arrays]
    cells = np.zeros(tuple(a.size for a in arrays), dtype=float)

    assigned = 0.0
    # Every step exhausts at least one residual entry
    max_steps = sum(a.size for a in arrays)
    for _ in range(max_steps):
        idx = tuple(int(np.argmax(r)) for r in residuals)
        mass = min(float(r[i]) for r, i in zip(residuals, idx))
        if mass <= RESIDUAL_EPS:
            break
        cells[idx] += mass
        for r, i in zip(residuals, idx):
            r[i] -= mass
            if r[i] < RESIDUAL_EPS:
                r[i] = 0.0
        assigned += mass
        if assigned >= 1.0 - RESIDUAL_EPS:
            break

    leftover = max(float(r.sum()) for r in residuals)
    if leftover > PROB_TOL:
        syslog.error(SystemLogger.COUPLING, "max_mi_coupling: marginals not exhausted", {
            'leftover': leftover,
            'totals': [float(a.sum()) for a in arrays],
        })
        raise CouplingError(f"marginals have mismatched mass; {leftover!r} left unassigned")
    return CouplingTable(spaces, cells)


def blend_couplings(t_max, t_min, rho):
    """
    Convex combination rho * t_max + (1 - rho) * t_min.

    Raises:
        RhoOutOfRange: If rho is not in [0, 1].
        AxisMismatch: If the tables differ in axes or marginals.
    """
    rho = float(rho)
    if not 0.0 <= rho <= 1.0:
        raise RhoOutOfRange(rho)
    if t_max.shape != t_min.shape:
        raise AxisMismatch(f"cannot blend tables of shapes {t_max.shape} and {t_min.shape}")
    if [a.feature_id for a in t_max.axes] != [a.feature_id for a in t_min.axes]:
        raise AxisMismatch("tables are defined over different features")
    for axis in range(t_max.ndim):
        others = tuple(i for i in range(t_max.ndim) if i != axis)
        if not np.allclose(t_max.cells.sum(axis=others), t_min.cells.sum(axis=others),
                           rtol=0.0, atol=PROB_TOL):
            raise AxisMismatch(f"tables disagree on the marginal of axis {axis}")

    cells = rho * t_max.cells + (1.0 - rho) * t_min.cells
    return CouplingTable(t_max.axes, cells)


def blended_coupling(marginals, rho, axes=None):
    """Blend of the greedy max-MI and the product coupling of the same marginals."""
    return blend_couplings(max_mi_coupling(marginals, axes), min_mi_coupling(marginals, axes), rho)


# ---------------------------------------------------------------------------
# Dependence estimates
# ---------------------------------------------------------------------------

def _paired_samples(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise SampleError(f"sample lengths differ: {x.size} != {y.size}")
    if x.size < 2:
        raise SampleError("at least 2 paired samples are required")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise SampleError("samples must be finite")
    return x, y


def pearson_rho(x, y, pair=('x', 'y')):
    """Absolute Pearson correlation; 0 with a warning if either sample is constant."""
    x, y = _paired_samples(x, y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        warnings.warn(f"pearson_rho: zero variance in pair {pair}", DegenerateInputWarning, stacklevel=2)
        syslog.warning(SystemLogger.COUPLING, "pearson_rho: zero-variance sample, rho set to 0",
                       {'pair': list(pair)})
        return RhoEstimate(0.0, RhoMethod.PEARSON, tuple(pair))
    r, _ = pearsonr(x, y)
    return RhoEstimate(float(min(1.0, abs(r))), RhoMethod.PEARSON, tuple(pair))


def _double_centered(values):
    d = squareform(pdist(values[:, None]))
    return d - d.mean(axis=0)[None, :] - d.mean(axis=1)[:, None] + d.mean()


def distance_correlation(x, y, pair=('x', 'y')):
    """Sample distance correlation from double-centered distance matrices."""
    x, y = _paired_samples(x, y)
    a = _double_centered(x)
    b = _double_centered(y)
    dvar_x = float((a * a).mean())
    dvar_y = float((b * b).mean())
    if dvar_x <= 0.0 or dvar_y <= 0.0:
        return RhoEstimate(0.0, RhoMethod.DISTANCE_CORRELATION, tuple(pair))
    dcov2 = max(0.0, float((a * b).mean()))
    value = float(np.sqrt(dcov2 / np.sqrt(dvar_x * dvar_y)))
    return RhoEstimate(min(1.0, value), RhoMethod.DISTANCE_CORRELATION, tuple(pair))


_ESTIMATORS = {
    RhoMethod.PEARSON: pearson_rho,
    RhoMethod.DISTANCE_CORRELATION: distance_correlation,
}


def _estimator(method):
    method = RhoMethod(method)
    if method not in _ESTIMATORS:
        raise ValueError(f"rho cannot be estimated with method {method.value!r}")
    return _ESTIMATORS[method]


def estimate_rho_matrix(training_features, method=RhoMethod.PEARSON, feature_ids=None):
    """
    Pairwise dependence estimates between training feature columns.

    Returns:
        dict: (feature_a, feature_b) -> RhoEstimate for every unordered pair,
              keyed in column order.
    """
    data = np.asarray(training_features, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise SampleError("rho estimation needs a samples x features matrix with at least 2 columns")
    if feature_ids is None:
        feature_ids = [f"x{i}" for i in range(data.shape[1])]
    if len(feature_ids) != data.shape[1]:
        raise SampleError("feature_ids do not match the number of columns")

    estimate = _estimator(method)
    return {
        (feature_ids[i], feature_ids[j]): estimate(data[:, i], data[:, j], pair=(feature_ids[i], feature_ids[j]))
        for i, j in itertools.combinations(range(data.shape[1]), 2)
    }


def estimate_rho_for_set(training_features, method=RhoMethod.PEARSON):
    """Mean of the pairwise estimates over all unordered column pairs."""
    estimates = estimate_rho_matrix(training_features, method)
    value = float(np.mean([e.value for e in estimates.values()]))
    syslog.debug(SystemLogger.COUPLING, "estimate_rho_for_set", {
        'method': RhoMethod(method).value,
        'pairs': len(estimates),
        'rho': value,
    })
    return min(1.0, max(0.0, value))
