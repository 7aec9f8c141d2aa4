"""Binary soft-margin RBF SVM trained on the dual by pairwise coordinate ascent.

Kernel convention: ``K(x, z) = exp(-||x - z||^2 / s^2)``, i.e. the
"scale" ``s`` relates to the usual ``gamma`` by ``gamma = 1 / s^2``.
"""

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.pipeline import Pipeline
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import DataError

logger = logging.getLogger(__name__)

TAU = 1e-12


@dataclass(frozen=True)
class SvmHyper:
    c: float = 4.0
    kernel_scale: float = 0.5
    tol: float = 1e-3
    max_iter: int = 1_000_000

    def __post_init__(self):
        if not (self.c > 0 and self.kernel_scale > 0 and self.tol > 0):
            raise DataError("c, kernel_scale and tol must all be > 0")


def rbf_kernel(A, B, scale):
    """Gaussian kernel matrix; ``K(x, x) == 1`` exactly."""
    return np.exp(-cdist(A, B, "sqeuclidean") / scale ** 2)


@dataclass
class DualSolution:
    alpha: np.ndarray
    rho: float
    n_iter: int
    converged: bool
    objective: list = field(default_factory=list)


def solve_dual(K, y, C, tol=1e-3, max_iter=1_000_000, track_objective=False):
    """Maximize ``sum(a) - 1/2 a'Qa`` s.t. ``0 <= a <= C``, ``y'a = 0``.

    ``Q = (y y') * K``. Pairs are chosen by the maximal-violating-pair rule
    with second-order gain for the second index, and the stopping criterion
    is ``max_up(-yG) - min_low(-yG) < tol``. The decision function is
    ``sum(a y K) - rho``.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    Q = np.outer(y, y) * K
    QD = np.diag(K).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    objective = []
    converged = False
    it = 0
    while it < max_iter:
        if track_objective:
            objective.append(-0.5 * float(alpha @ (G - 1.0)))
        minus_yG = -y * G
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        up_idx = np.flatnonzero(up)
        i = up_idx[np.argmax(minus_yG[up_idx])]
        g_max = minus_yG[i]
        low_idx = np.flatnonzero(low)
        g_min = minus_yG[low_idx].min()
        if g_max - g_min < tol:
            converged = True
            break
        cand = low_idx[minus_yG[low_idx] < g_max]
        b = g_max - minus_yG[cand]
        a = QD[i] + QD[cand] - 2.0 * K[i, cand]
        a = np.where(a > 0, a, TAU)
        j = cand[np.argmin(-(b * b) / a)]

        ai_old, aj_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Q[i, j]
            quad = quad if quad > 0 else TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Q[i, j]
            quad = quad if quad > 0 else TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        G += Q[:, i] * (alpha[i] - ai_old) + Q[:, j] * (alpha[j] - aj_old)
        it += 1
    if not converged:
        logger.warning("SMO stopped after %d iterations without meeting tol=%g", it, tol)
    if track_objective:
        objective.append(-0.5 * float(alpha @ (G - 1.0)))
    return DualSolution(alpha, _rho(alpha, y, G, C), it, converged, objective)


def _rho(alpha, y, G, C):
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(yG[free].mean())
    at_upper = alpha >= C
    # bounds from the KKT conditions of the points sitting at 0 or C
    ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (~at_upper & (y < 0))
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


class ZScoreNormalizer(TransformerMixin, BaseEstimator):
    """Per-feature z-scoring with population std; zero-variance columns dropped."""

    def fit(self, X, y=None, feature_names=None):
        X = check_array(X)
        if X.shape[0] < 2:
            raise DataError("normalizer needs at least 2 rows")
        self.n_features_in_ = X.shape[1]
        self.mean_ = X.mean(axis=0)
        # shifted by the first row so constant columns give exactly zero spread
        self.scale_ = (X - X[0]).std(axis=0)
        self.support_ = self.scale_ > 0
        if not self.support_.all():
            dropped = [int(k) for k in np.flatnonzero(~self.support_)]
            if feature_names is not None:
                dropped = [feature_names[k] for k in dropped]
            logger.warning("dropping zero-variance feature(s): %s", list(dropped))
        return self

    def transform(self, X):
        check_is_fitted(self, "support_")
        X = check_array(X)
        s = self.support_
        return (X[:, s] - self.mean_[s]) / self.scale_[s]


class RBFSupportVectorClassifier(ClassifierMixin, BaseEstimator):
    """Two-class RBF SVM.

    Parameters
    ----------
    C : float
        Box constraint.
    kernel_scale : float
        ``s`` in ``exp(-||x - z||^2 / s^2)``.
    tol : float
        KKT violation tolerance of the solver.
    max_iter : int
        Hard cap on pair updates.
    track_objective : bool
        Record the dual objective after every update in ``objective_``.
    """

    def __init__(self, C=4.0, kernel_scale=0.5, tol=1e-3, max_iter=1_000_000, track_objective=False):
        self.C = C
        self.kernel_scale = kernel_scale
        self.tol = tol
        self.max_iter = max_iter
        self.track_objective = track_objective

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise DataError(f"SVM training needs exactly two classes, got {self.classes_.size}")
        ys = np.where(y == self.classes_[1], 1.0, -1.0)
        self.n_features_in_ = X.shape[1]
        K = rbf_kernel(X, X, self.kernel_scale)
        sol = solve_dual(K, ys, self.C, self.tol, self.max_iter, self.track_objective)
        sv = sol.alpha > 0
        self.alpha_ = sol.alpha
        self.support_ = np.flatnonzero(sv)
        self.support_vectors_ = X[sv]
        self.dual_coef_ = sol.alpha[sv] * ys[sv]
        self.intercept_ = -sol.rho
        self.n_iter_ = sol.n_iter
        self.converged_ = sol.converged
        self.objective_ = sol.objective
        return self

    def decision_function(self, X):
        check_is_fitted(self, "dual_coef_")
        X = check_array(X)
        return rbf_kernel(X, self.support_vectors_, self.kernel_scale) @ self.dual_coef_ + self.intercept_

    def predict(self, X):
        # sign(0) counts as the positive class
        return np.where(self.decision_function(X) >= 0, self.classes_[1], self.classes_[0])


def make_svm_pipeline(hyper=None):
    """Normalizer + SVM, refit from scratch by ``sklearn.base.clone``."""
    h = hyper or SvmHyper()
    return Pipeline([
        ("normalize", ZScoreNormalizer()),
        ("svm", RBFSupportVectorClassifier(C=h.c, kernel_scale=h.kernel_scale, tol=h.tol,
                                           max_iter=h.max_iter)),
    ])


@dataclass
class SvmModel:
    """A trained, name-keyed model with its own normalization statistics."""

    feature_names: list
    mean: np.ndarray
    std: np.ndarray
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    hyper: SvmHyper
    dropped_features: list = field(default_factory=list)

    def decision_matrix(self, X):
        """Decision values for raw rows whose columns follow ``feature_names``."""
        Z = (np.asarray(X, dtype=float) - self.mean) / self.std
        return rbf_kernel(Z, self.support_vectors, self.hyper.kernel_scale) @ self.dual_coefs + self.bias

    def to_dict(self):
        return {
            "hyper": asdict(self.hyper),
            "feature_names": list(self.feature_names),
            "dropped_features": list(self.dropped_features),
            "norm_mean": self.mean.tolist(),
            "norm_std": self.std.tolist(),
            "support_vectors": self.support_vectors.tolist(),
            "dual_coefs": self.dual_coefs.tolist(),
            "bias": self.bias,
        }

    @classmethod
    def from_dict(cls, d):
        k = len(d["feature_names"])
        return cls(
            feature_names=list(d["feature_names"]),
            mean=np.array(d["norm_mean"], dtype=float),
            std=np.array(d["norm_std"], dtype=float),
            support_vectors=np.array(d["support_vectors"], dtype=float).reshape(-1, k),
            dual_coefs=np.array(d["dual_coefs"], dtype=float),
            bias=float(d["bias"]),
            hyper=SvmHyper(**d["hyper"]),
            dropped_features=list(d.get("dropped_features", [])),
        )


def fit_normalizer(train_rows, feature_names=None):
    """(mean, std, kept-mask) over training rows; constant columns are dropped."""
    norm = ZScoreNormalizer().fit(train_rows, feature_names=feature_names)
    return norm.mean_, norm.scale_, norm.support_


def train_svm(rows, labels, hyper=None, feature_names=None):
    """Fit normalizer and SVM on ``rows`` with labels in {-1, +1}."""
    hyper = hyper or SvmHyper()
    X = np.asarray(rows, dtype=float)
    y = np.asarray(labels)
    if X.ndim != 2:
        raise DataError("rows must be 2-D")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite feature values in training rows")
    if not set(np.unique(y)) <= {-1, 1}:
        raise DataError("labels must be -1/+1")
    if np.unique(y).size < 2:
        raise DataError("training data contains a single class")
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(X.shape[1])]
    mean, std, keep = fit_normalizer(X, names)
    Z = (X[:, keep] - mean[keep]) / std[keep]
    clf = RBFSupportVectorClassifier(C=hyper.c, kernel_scale=hyper.kernel_scale, tol=hyper.tol,
                                     max_iter=hyper.max_iter).fit(Z, y)
    # fit() orders classes as (-1, +1), so dual_coef_ is already alpha * y
    return SvmModel(
        feature_names=[n for n, k in zip(names, keep) if k],
        mean=mean[keep],
        std=std[keep],
        support_vectors=clf.support_vectors_,
        dual_coefs=clf.dual_coef_,
        bias=float(clf.intercept_),
        hyper=hyper,
        dropped_features=[n for n, k in zip(names, keep) if not k],
    )


def predict(model, row):
    """``(label, decision)`` for one name-keyed row; ``sign(0) -> +1``."""
    missing = [n for n in model.feature_names if n not in row]
    if missing:
        raise DataError(f"row lacks model feature(s) {missing}")
    x = np.array([[row[n] for n in model.feature_names]], dtype=float)
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite feature value in prediction row")
    d = float(model.decision_matrix(x)[0])
    return (1 if d >= 0 else -1), d


def save_model(model, path, meta=None):
    payload = {"meta": meta or {}, "model": model.to_dict()}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        return SvmModel.from_dict(json.load(fh)["model"])
