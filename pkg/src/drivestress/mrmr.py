"""Plug-in mutual information on discretized columns and greedy mRMR ranking."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DataError

logger = logging.getLogger(__name__)

# Scores closer than this are treated as tied and resolved by feature name.
TIE_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteColumn:
    codes: np.ndarray
    bin_count: int
    bin_edges: np.ndarray


@dataclass(frozen=True)
class RankedFeatures:
    ordered: list
    context: str = "global"
    bins: int = 8
    variant: str = "MID"
    relevance: dict = field(default_factory=dict, compare=False)

    @property
    def names(self):
        return [n for n, _ in self.ordered]

    @property
    def scores(self):
        return [s for _, s in self.ordered]

    def top(self, k):
        return self.names[:k]

    def to_dict(self):
        return {
            "context": self.context,
            "names": self.names,
            "scores": [float(s) for s in self.scores],
            "bins": self.bins,
            "variant": self.variant,
            "discretization": "equal-frequency",
        }

    @classmethod
    def from_dict(cls, d):
        return cls(list(zip(d["names"], d["scores"])), d["context"], d["bins"], d["variant"])


def discretize(column, bins=8):
    """Equal-frequency codes in ``[0, bins)``.

    A value's code is ``floor(r * bins / n)`` where ``r`` counts the values
    strictly smaller than it, so equal values always share a bin.
    """
    x = np.asarray(column, dtype=float).ravel()
    if x.size == 0:
        raise DataError("cannot discretize an empty column")
    if bins < 2:
        raise DataError("bins must be >= 2")
    s = np.sort(x)
    ranks = np.searchsorted(s, x, side="left")
    codes = (ranks * bins) // x.size
    if s[0] == s[-1]:
        logger.warning("constant column discretized into a single bin")
    used = np.unique(codes)
    edges = np.array([x[codes == c].min() for c in used] + [s[-1]])
    if edges.size > 1 and edges[-1] == edges[-2]:
        edges = edges[:-1]
    return DiscreteColumn(codes.astype(np.int64), int(bins), edges)


def _codes(x):
    if isinstance(x, DiscreteColumn):
        return x.codes
    x = np.asarray(x)
    if x.dtype.kind in "iub":
        return x.astype(np.int64).ravel()
    # arbitrary labels -> dense integer codes
    return np.unique(x.ravel(), return_inverse=True)[1]


def mutual_information(x, y):
    """Plug-in ``I(X;Y)`` in nats over observed cells.

    Terms are summed with ``math.fsum`` so the result does not depend on
    cell order; in particular ``I(X;Y) == I(Y;X)`` bit for bit.
    """
    a, b = _codes(x), _codes(y)
    if a.size != b.size:
        raise DataError(f"length mismatch: {a.size} vs {b.size}")
    n = a.size
    if n == 0:
        raise DataError("empty columns")
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    joint = np.zeros((ua.size, ub.size))
    np.add.at(joint, (ia, ib), 1.0)
    pa = joint.sum(axis=1) / n
    pb = joint.sum(axis=0) / n
    r, c = np.nonzero(joint)
    pab = joint[r, c] / n
    terms = pab * np.log(pab / (pa[r] * pb[c]))
    return max(math.fsum(terms.tolist()), 0.0)


def entropy(x):
    a = _codes(x)
    p = np.unique(a, return_counts=True)[1] / a.size
    return max(math.fsum((-p * np.log(p)).tolist()), 0.0)


def _pick(candidates, scores, names):
    best = max(scores[c] for c in candidates)
    tied = [c for c in candidates if scores[c] >= best - TIE_TOL]
    return min(tied, key=lambda c: names[c])


def mrmr_rank(features, labels, k, feature_names=None, bins=8, variant="MID", context="global"):
    """Greedy minimal-redundancy maximal-relevance ranking.

    The first pick maximizes ``I(f; label)``. Each later pick maximizes
    ``I(f; label) - mean_{s in S} I(f; s)`` (MID) or the ratio of the two
    (MIQ) over the selected set ``S``. Near-ties go to the smaller name.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise DataError("features must be a 2-D array")
    p = X.shape[1]
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(p)]
    if len(names) != p or len(set(names)) != p:
        raise DataError("feature names must be unique and match the column count")
    if k > p:
        raise DataError(f"k = {k} exceeds the {p} available features")
    if variant not in ("MID", "MIQ"):
        raise DataError(f"unknown mRMR variant {variant!r}")
    y = _codes(labels)
    if y.size != X.shape[0]:
        raise DataError("labels and features differ in length")

    codes = [discretize(X[:, j], bins).codes for j in range(p)]
    relevance = [mutual_information(c, y) for c in codes]
    rel_by_name = {names[j]: relevance[j] for j in range(p)}
    if k <= 0:
        return RankedFeatures([], context, bins, variant, rel_by_name)

    remaining = set(range(p))
    first = _pick(remaining, relevance, names)
    ordered = [(names[first], relevance[first])]
    selected = [first]
    remaining.discard(first)
    redundancy = np.zeros(p)
    while len(ordered) < k:
        last = selected[-1]
        for j in remaining:
            redundancy[j] += mutual_information(codes[j], codes[last])
        scores = {}
        for j in remaining:
            red = redundancy[j] / len(selected)
            if variant == "MID":
                scores[j] = relevance[j] - red
            else:
                scores[j] = relevance[j] / max(red, TIE_TOL)
        nxt = _pick(remaining, scores, names)
        ordered.append((names[nxt], scores[nxt]))
        selected.append(nxt)
        remaining.discard(nxt)
    return RankedFeatures(ordered, context, bins, variant, rel_by_name)


class MRMRSelector(SelectorMixin, BaseEstimator):
    """Feature selector keeping the first ``n_features_to_select`` mRMR picks.

    Parameters
    ----------
    n_features_to_select : int
        Number of features kept by ``transform``.
    n_bins : int
        Equal-frequency bins per feature for the MI estimates.
    variant : {"MID", "MIQ"}
        Difference or quotient criterion.
    feature_names : sequence of str, optional
        Names used for deterministic tie-breaking; taken from DataFrame
        columns when ``X`` has them, else ``x0, x1, ...``.
    """

    def __init__(self, n_features_to_select=20, n_bins=8, variant="MID", feature_names=None):
        self.n_features_to_select = n_features_to_select
        self.n_bins = n_bins
        self.variant = variant
        self.feature_names = feature_names

    def fit(self, X, y):
        names = self.feature_names
        if names is None and hasattr(X, "columns"):
            names = [str(c) for c in X.columns]
        X = check_array(X)
        if names is None:
            names = [f"x{i}" for i in range(X.shape[1])]
        self.feature_names_ = np.asarray(names, dtype=object)
        self.n_features_in_ = X.shape[1]
        self.ranking_ = mrmr_rank(X, y, self.n_features_to_select, names, self.n_bins, self.variant)
        pos = {n: i for i, n in enumerate(names)}
        self.selected_indices_ = np.array([pos[n] for n in self.ranking_.names], dtype=int)
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "ranking_")
        mask = np.zeros(self.n_features_in_, dtype=bool)
        mask[self.selected_indices_] = True
        return mask
