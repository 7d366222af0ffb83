"""Platt scaling for classifier scores and 2-sigma event ranges from training data."""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .errors import NonFiniteScores, SampleError, SingleClassLabels
from .probability_model import Interval
from .system_logger import SystemLogger, syslog

PROB_CLAMP = 1e-12
MAX_NEWTON_ITER = 200
GRADIENT_TOL = 1e-8
MIN_STEP = 1e-10
# Ridge added to the Hessian diagonal so separable data stays solvable
HESSIAN_RIDGE = 1e-12


@dataclass(frozen=True)
class PlattModel:
    """p(s) = 1 / (1 + exp(a*s + b))"""
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError(f"Platt parameters must be finite, got a={self.a}, b={self.b}")

    def apply(self, s):
        return platt_apply(s, self)


def _negative_log_likelihood(a, b, scores, targets):
    z = a * scores + b
    # log p = log sigmoid(-z), log(1 - p) = log sigmoid(z)
    return -float(np.sum(targets * log_expit(-z) + (1.0 - targets) * log_expit(z)))


def platt_targets(labels):
    """Smoothed regression targets for positive and negative labels."""
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    return np.where(labels, hi, lo)


def platt_log_likelihood(model, scores, labels):
    """Log-likelihood of the smoothed targets under a model (higher is better)."""
    scores = np.asarray(scores, dtype=float)
    return -_negative_log_likelihood(model.a, model.b, scores, platt_targets(labels))


def platt_fit(scores, labels):
    """
    Fit a PlattModel by damped Newton iterations on the smoothed targets.

    Args:
        scores: Classifier scores.
        labels: Binary labels (truthy = positive).

    Returns:
        PlattModel: Maximum-likelihood (a, b).

    Raises:
        SampleError: Fewer than 2 samples or mismatched lengths.
        NonFiniteScores: A score is NaN or infinite.
        SingleClassLabels: Only one label value is present.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.size != labels.size:
        raise SampleError(f"{scores.size} scores for {labels.size} labels")
    if scores.size < 2:
        raise SampleError("platt_fit needs at least 2 samples")
    if not np.all(np.isfinite(scores)):
        raise NonFiniteScores("platt_fit: scores contain NaN or infinite values")
    positive = labels.astype(bool)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassLabels("platt_fit needs both positive and negative labels")

    targets = platt_targets(positive)
    a, b = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    objective = _negative_log_likelihood(a, b, scores, targets)

    iteration = 0
    for iteration in range(1, MAX_NEWTON_ITER + 1):
        p = expit(-(a * scores + b))
        residual = targets - p
        gradient = np.array([np.dot(residual, scores), residual.sum()])
        if np.linalg.norm(gradient) < GRADIENT_TOL:
            break

        w = p * (1.0 - p)
        hessian = np.array([
            [np.dot(w, scores * scores) + HESSIAN_RIDGE, np.dot(w, scores)],
            [np.dot(w, scores), w.sum() + HESSIAN_RIDGE],
        ])
        step = -np.linalg.solve(hessian, gradient)
        decrease = float(np.dot(gradient, step))

        # Step halving until the objective drops enough
        size = 1.0
        while size >= MIN_STEP:
            new_a, new_b = a + size * step[0], b + size * step[1]
            new_objective = _negative_log_likelihood(new_a, new_b, scores, targets)
            if new_objective < objective + 1e-4 * size * decrease:
                break
            size /= 2.0
        else:
            syslog.warning(SystemLogger.CALIBRATION, "platt_fit: line search failed", {
                'iteration': iteration,
                'gradient': gradient.tolist(),
            })
            break
        a, b, objective = new_a, new_b, new_objective

    syslog.debug(SystemLogger.CALIBRATION, "platt_fit: converged", {
        'a': a,
        'b': b,
        'iterations': iteration,
        'samples': int(scores.size),
    })
    return PlattModel(float(a), float(b))


def platt_apply(s, m):
    """Calibrated probability for a score, clamped to [1e-12, 1 - 1e-12]."""
    p = expit(-(m.a * np.asarray(s, dtype=float) + m.b))
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(p) if np.ndim(p) == 0 else p


def platt_fit_events(scores, labels):
    """
    One PlattModel per event column.

    Args:
        scores: Mapping event -> score vector.
        labels: Mapping event -> binary label vector.

    Returns:
        dict: event -> PlattModel, in the order of `scores`.
    """
    missing = [event for event in scores if event not in labels]
    if missing:
        raise SampleError(f"no labels for events {missing}")
    return {event: platt_fit(scores[event], labels[event]) for event in scores}


def derive_event_range(samples, clamp_at_zero=False):
    """
    Event range of two sample standard deviations around the mean.

    Returns:
        Interval: [mu - 2 sigma, mu + 2 sigma), lower bound clamped at zero on
                  request, widened by 1e-6 * max(1, |mu|) when sigma is zero.
    """
    values = np.asarray(samples, dtype=float).ravel()
    if values.size < 2:
        raise SampleError("derive_event_range needs at least 2 samples")
    if not np.all(np.isfinite(values)):
        raise SampleError("derive_event_range: samples must be finite")
    mu = float(values.mean())
    sigma = float(values.std(ddof=1))
    if sigma == 0.0:
        half_width = 1e-6 * max(1.0, abs(mu))
    else:
        half_width = 2.0 * sigma
    lower, upper = mu - half_width, mu + half_width
    if clamp_at_zero:
        lower = max(0.0, lower)
    return Interval(lower, upper)
