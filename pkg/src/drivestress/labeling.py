"""Stress labels from hand GSR with a ``median +/- alpha`` dead zone, ``alpha = sigma / 2``."""

import enum
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import DataError

MIN_GSR_SAMPLES = 100


class StressLabel(enum.Enum):
    STRESS = "Stress"
    NO_STRESS = "NoStress"
    UNLABELED = "Unlabeled"

    @property
    def sign(self):
        """+1 for Stress (positive class), -1 for NoStress, 0 otherwise."""
        return {"Stress": 1, "NoStress": -1}.get(self.value, 0)


@dataclass(frozen=True)
class LabelThresholds:
    median: float
    alpha: float

    def __post_init__(self):
        if self.alpha < 0:
            raise DataError("alpha must be >= 0")

    @property
    def lower(self):
        return self.median - self.alpha

    @property
    def upper(self):
        return self.median + self.alpha


def _samples(gsr):
    return np.asarray(getattr(gsr, "samples", gsr), dtype=float)


def compute_thresholds(gsr_full, std_kind="population"):
    """Median and ``alpha = std / 2`` over every sample of one record's GSR."""
    x = _samples(gsr_full)
    if x.size < MIN_GSR_SAMPLES:
        raise DataError(f"GSR channel has {x.size} samples (< {MIN_GSR_SAMPLES})")
    ddof = {"population": 0, "sample": 1}.get(std_kind)
    if ddof is None:
        raise DataError(f"unknown std_kind {std_kind!r}")
    # shifting by a sample keeps a constant channel at exactly zero spread
    return LabelThresholds(float(np.median(x)), float(np.std(x - x[0], ddof=ddof)) / 2.0)


def classify_value(v, th):
    if v > th.upper:
        return StressLabel.STRESS
    if v < th.lower:
        return StressLabel.NO_STRESS
    return StressLabel.UNLABELED


def label_window(gsr_slice, th):
    """Label from the window's median GSR; threshold ties fall in the dead zone."""
    x = _samples(gsr_slice)
    if x.size == 0:
        raise DataError("empty GSR slice")
    return classify_value(float(np.median(x)), th)


class GSRStressLabeler(TransformerMixin, BaseEstimator):
    """Fit thresholds on a full GSR channel, then map window slices to +1/-1/0.

    ``transform`` takes a sequence of GSR slices (channels or arrays) and
    returns the label signs; ``0`` marks the dead zone.
    """

    def __init__(self, std_kind="population"):
        self.std_kind = std_kind

    def fit(self, X, y=None):
        self.thresholds_ = compute_thresholds(X, self.std_kind)
        return self

    def transform(self, X):
        return np.array([label_window(s, self.thresholds_).sign for s in X], dtype=int)
