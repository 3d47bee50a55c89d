"""Scoring, thresholding, voting and metric tests.

The metric oracle is an independent brute-force confusion loop; the vote
properties are exercised on seeded random fixtures.
"""

import math

import numpy as np
import pytest

from pumpwatch.detect import (AnomalyScore, Metrics, Threshold,
                              calibrate_threshold, classify, evaluate,
                              make_score, window_error)
from pumpwatch.errors import CalibrationError, ShapeError, UsageError


# ---------------------------------------------------------------- scoring

def test_window_error_zero_at_identity():
    w = np.arange(8.0).reshape(2, 4)
    assert window_error(w, w.copy()) == 0.0


def test_window_error_unit_case():
    assert window_error(np.ones((3, 5)), np.zeros((3, 5))) == 1.0


def test_window_error_hand_case():
    got = window_error([[1.0, 2.0], [3.0, 4.0]], [[1.0, 1.0], [1.0, 1.0]])
    assert got == (0 + 1 + 4 + 9) / 4  # 3.5


def test_window_error_shape_mismatch():
    with pytest.raises(ShapeError):
        window_error(np.zeros((2, 3)), np.zeros((3, 2)))


def test_make_score_takes_mean():
    score = make_score(7, [1.0, 2.0, 6.0])
    assert score.sample_id == 7
    assert score.sample_score == 3.0
    assert score.window_errors == [1.0, 2.0, 6.0]
    with pytest.raises(UsageError):
        make_score(0, [])


# ---------------------------------------------------------------- threshold

def test_calibrate_hand_case():
    th = calibrate_threshold([1.0, 2.0, 3.0])
    assert th.mean == 2.0
    assert abs(th.std - math.sqrt(2.0 / 3.0)) < 1e-12
    assert abs(th.value - (2.0 + math.sqrt(2.0 / 3.0))) < 1e-12
    assert th.calibration_count == 3


def test_calibrate_constant_errors():
    th = calibrate_threshold([0.25] * 10)
    assert th.value == 0.25 and th.std == 0.0


def test_calibrate_preconditions():
    with pytest.raises(CalibrationError):
        calibrate_threshold([1.0])
    with pytest.raises(CalibrationError):
        calibrate_threshold([])
    with pytest.raises(CalibrationError):
        calibrate_threshold([1.0, float("nan")])
    with pytest.raises(CalibrationError):
        calibrate_threshold([1.0, -0.5])


def test_calibrate_uses_population_std():
    errors = [0.0, 1.0, 2.0, 5.0]
    th = calibrate_threshold(errors)
    mean = sum(errors) / 4
    var = sum((e - mean) ** 2 for e in errors) / 4  # divisor N, not N-1
    assert abs(th.std - math.sqrt(var)) < 1e-12


# ---------------------------------------------------------------- voting

def _score_with(above, below, threshold=1.0):
    errors = [threshold + 1.0] * above + [threshold - 0.5] * below
    return make_score(0, errors)


def test_majority_vote_flags():
    th = Threshold(value=1.0, mean=1.0, std=0.0, calibration_count=2)
    s = _score_with(9, 7)
    assert classify(s, th) is True
    assert s.votes_anomalous == 9 and s.is_flagged is True


def test_tie_vote_flags_anomalous():
    th = Threshold(value=1.0, mean=1.0, std=0.0, calibration_count=2)
    s = _score_with(8, 8)
    assert classify(s, th) is True


def test_minority_vote_stays_healthy():
    th = Threshold(value=1.0, mean=1.0, std=0.0, calibration_count=2)
    assert classify(_score_with(0, 16), th) is False
    assert classify(_score_with(7, 9), th) is False


def test_vote_is_strictly_above():
    th = Threshold(value=1.0, mean=1.0, std=0.0, calibration_count=2)
    s = make_score(0, [1.0] * 16)  # exactly at the threshold
    assert classify(s, th) is False
    assert s.votes_anomalous == 0


def test_classify_rejects_empty():
    th = Threshold(value=1.0, mean=1.0, std=0.0, calibration_count=2)
    with pytest.raises(UsageError):
        classify(AnomalyScore(sample_id=0, window_errors=[]), th)


def test_votes_monotone_in_threshold():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        errors = rng.uniform(0, 2, size=rng.integers(1, 20)).tolist()
        t1, t2 = sorted(rng.uniform(0, 2, size=2))
        s1 = make_score(0, errors)
        s2 = make_score(0, errors)
        classify(s1, Threshold(t1, t1, 0.0, 2))
        classify(s2, Threshold(t2, t2, 0.0, 2))
        assert s2.votes_anomalous <= s1.votes_anomalous


def test_classify_permutation_invariant():
    rng = np.random.default_rng(1)
    errors = rng.uniform(0, 2, size=16).tolist()
    th = Threshold(0.9, 0.9, 0.0, 2)
    base = make_score(0, errors)
    classify(base, th)
    for _ in range(10):
        shuffled = make_score(0, list(rng.permutation(errors)))
        classify(shuffled, th)
        assert shuffled.is_flagged == base.is_flagged
        assert shuffled.votes_anomalous == base.votes_anomalous


def test_healthy_gaussian_fixture_rarely_flags():
    # errors ~ N(1, 0.1); at mean + std roughly 16% of windows vote, so a
    # 16-window majority almost never fires on healthy samples
    rng = np.random.default_rng(2)
    th = calibrate_threshold(np.abs(rng.normal(1.0, 0.1, size=200)))
    flagged = 0
    for _ in range(100):
        s = make_score(0, np.abs(rng.normal(1.0, 0.1, size=16)))
        if classify(s, th):
            flagged += 1
    assert flagged / 100 < 0.5


# ---------------------------------------------------------------- metrics

def test_evaluate_perfect_prediction():
    truth = [True, False, True, False, True]
    m = evaluate(truth, truth)
    assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)
    assert (m.tp, m.fp, m.tn, m.fn) == (3, 0, 2, 0)


def test_evaluate_hand_confusion():
    # tp=3, fp=1, fn=2, tn=4
    predicted = [True] * 3 + [True] + [False] * 2 + [False] * 4
    truth = [True] * 3 + [False] + [True] * 2 + [False] * 4
    m = evaluate(predicted, truth)
    assert m.accuracy == 0.7
    assert m.precision == 0.75
    assert abs(m.recall - 0.6) < 1e-12
    assert abs(m.f1 - 2.0 / 3.0) < 1e-12
    assert (m.tp, m.fp, m.tn, m.fn) == (3, 1, 4, 2)


def test_evaluate_zero_denominator_conventions():
    m = evaluate([False, False, False], [True, False, True])
    assert m.precision == 0.0 and m.recall == 0.0 and m.f1 == 0.0
    assert m.accuracy == 1.0 / 3.0

    # no true positives possible: recall denominator zero
    m2 = evaluate([False, False], [False, False])
    assert m2.recall == 0.0 and m2.precision == 0.0 and m2.f1 == 0.0
    assert m2.accuracy == 1.0


def test_evaluate_matches_bruteforce_oracle():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        n = int(rng.integers(1, 30))
        predicted = [bool(b) for b in rng.integers(0, 2, size=n)]
        truth = [bool(b) for b in rng.integers(0, 2, size=n)]
        m = evaluate(predicted, truth)

        tp = fp = tn = fn = 0
        for p, t in zip(predicted, truth):
            if p and t:
                tp += 1
            elif p and not t:
                fp += 1
            elif not p and t:
                fn += 1
            else:
                tn += 1
        assert (m.tp, m.fp, m.tn, m.fn) == (tp, fp, tn, fn)
        assert m.accuracy == (tp + tn) / n
        assert m.precision == (tp / (tp + fp) if tp + fp else 0.0)
        assert m.recall == (tp / (tp + fn) if tp + fn else 0.0)
        pr = m.precision + m.recall
        assert m.f1 == (2 * m.precision * m.recall / pr if pr else 0.0)


def test_evaluate_errors():
    with pytest.raises(UsageError):
        evaluate([True], [True, False])
    with pytest.raises(UsageError):
        evaluate([], [])
