import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drivestress.exceptions import DataError
from drivestress.labeling import (GSRStressLabeler, LabelThresholds, StressLabel, classify_value,
                                  compute_thresholds, label_window)

# {1..5} repeated to satisfy the 100-sample minimum; median and population std are unchanged.
FIVE = np.tile([1.0, 2.0, 3.0, 4.0, 5.0], 20)


def test_thresholds_hand_example():
    th = compute_thresholds(FIVE)
    assert th.median == 3.0
    assert th.alpha == pytest.approx(np.sqrt(2) / 2, rel=1e-12)
    assert (th.lower, th.upper) == pytest.approx((2.2928932, 3.7071068), abs=1e-7)


def test_thresholds_constant():
    th = compute_thresholds(np.full(200, 4.2))
    assert th.alpha == 0 and th.lower == th.upper == 4.2


def test_thresholds_short_channel():
    with pytest.raises(DataError):
        compute_thresholds(np.arange(5.0))


def test_sample_std_option():
    th = compute_thresholds(FIVE, std_kind="sample")
    assert th.alpha == pytest.approx(np.std(FIVE, ddof=1) / 2)


@settings(max_examples=30, deadline=None)
@given(st.floats(-100, 100))
def test_thresholds_translation(k):
    rng = np.random.default_rng(0)
    x = rng.random(150)
    a, b = compute_thresholds(x), compute_thresholds(x + k)
    assert b.lower == pytest.approx(a.lower + k, abs=1e-9)
    assert b.upper == pytest.approx(a.upper + k, abs=1e-9)


TH = LabelThresholds(3.0, 0.71)


@pytest.mark.parametrize("median,label", [
    (4.0, StressLabel.STRESS),
    (3.0, StressLabel.UNLABELED),
    (TH.lower - 1, StressLabel.NO_STRESS),
    (TH.upper, StressLabel.UNLABELED),
    (TH.lower, StressLabel.UNLABELED),
])
def test_label_window_examples(median, label):
    assert label_window(np.array([median - 1, median, median + 1]), TH) is label


def test_label_window_empty():
    with pytest.raises(DataError):
        label_window(np.array([]), TH)


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), st.floats(0, 5))
def test_label_monotone(v, dv):
    order = {StressLabel.NO_STRESS: 0, StressLabel.UNLABELED: 1, StressLabel.STRESS: 2}
    assert order[classify_value(v + dv, TH)] >= order[classify_value(v, TH)]


def test_signs():
    assert [s.sign for s in StressLabel] == [1, -1, 0]


def test_labeler_estimator():
    lab = GSRStressLabeler().fit(FIVE)
    out = lab.transform([np.array([5.0]), np.array([1.0]), np.array([3.0])])
    np.testing.assert_array_equal(out, [1, -1, 0])
    assert lab.get_params() == {"std_kind": "population"}
