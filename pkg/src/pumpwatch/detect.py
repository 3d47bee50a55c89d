"""Scoring, threshold calibration, majority vote, and evaluation metrics.

The detection protocol is the same for every detector: score each 64-point
window, calibrate threshold = mean + population standard deviation of the
window scores on held-out healthy data, let each window of a sample vote
(score strictly above threshold = anomalous), and flag the sample when at
least half of its windows vote anomalous (ties count as anomalous, biasing
toward recall).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import CalibrationError, ShapeError, UsageError


@dataclass
class AnomalyScore:
    """Per-sample window scores plus the vote outcome filled in by classify."""

    sample_id: int
    window_errors: List[float]
    sample_score: float = 0.0
    votes_anomalous: int = 0
    is_flagged: bool = False


@dataclass
class Threshold:
    value: float
    mean: float
    std: float
    calibration_count: int


@dataclass
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int


def window_error(input_window, output_window) -> float:
    """Mean over all elements of the squared difference."""
    a = np.asarray(input_window, dtype=np.float64)
    b = np.asarray(output_window, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"window shapes differ: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(d * d))


def make_score(sample_id, window_errors) -> AnomalyScore:
    errors = [float(e) for e in window_errors]
    if not errors:
        raise UsageError("a sample needs at least one window error")
    return AnomalyScore(sample_id=sample_id, window_errors=errors,
                        sample_score=float(np.mean(errors)))


def calibrate_threshold(errors) -> Threshold:
    """mean + population standard deviation (divisor N) of healthy errors."""
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        raise CalibrationError(f"need at least 2 calibration errors, got {len(errors)}")
    if any(not math.isfinite(e) or e < 0 for e in errors):
        raise CalibrationError("calibration errors must be finite and non-negative")
    mean = float(np.mean(errors))
    std = float(np.sqrt(np.mean([(e - mean) ** 2 for e in errors])))
    return Threshold(value=mean + std, mean=mean, std=std,
                     calibration_count=len(errors))


def classify(score: AnomalyScore, th: Threshold) -> bool:
    """Majority vote over windows; fills votes_anomalous and is_flagged."""
    if not score.window_errors:
        raise UsageError("cannot classify a sample with no window errors")
    votes = sum(1 for e in score.window_errors if e > th.value)
    score.votes_anomalous = votes
    score.is_flagged = votes * 2 >= len(score.window_errors)
    return score.is_flagged


def evaluate(predicted, truth) -> Metrics:
    """Confusion counts and Acc/P/R/F1 with anomalous as the positive class.

    Zero-denominator conventions: precision, recall and F1 are 0 when their
    denominators are 0, so all-negative predictors still yield defined rows.
    """
    predicted = list(predicted)
    truth = list(truth)
    if len(predicted) != len(truth):
        raise UsageError(f"length mismatch: {len(predicted)} predictions "
                         f"vs {len(truth)} truths")
    if not predicted:
        raise UsageError("evaluate needs at least one pair")
    tp = sum(1 for p, t in zip(predicted, truth) if p and t)
    fp = sum(1 for p, t in zip(predicted, truth) if p and not t)
    tn = sum(1 for p, t in zip(predicted, truth) if not p and not t)
    fn = sum(1 for p, t in zip(predicted, truth) if not p and t)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = (2.0 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return Metrics(accuracy=(tp + tn) / len(predicted), precision=precision,
                   recall=recall, f1=f1, tp=tp, fp=fp, tn=tn, fn=fn)
