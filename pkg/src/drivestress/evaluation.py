"""Grouped leave-one-out evaluation and the two-step mRMR selection protocol.

Step 1 ranks each feature category on its own and keeps the prefix with
the best grouped-LOOCV accuracy. Step 2 ranks all features together and
keeps the top 20. The final set is the intersection of the step-2 list
with the union of the step-1 prefixes, in step-2 order.
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import clone
from sklearn.model_selection import LeaveOneGroupOut

from .exceptions import DataError, InvariantViolation
from .features import CATEGORIES, FEATURE_CATEGORY
from .mrmr import RankedFeatures, mrmr_rank
from .svm import SvmHyper, make_svm_pipeline

logger = logging.getLogger(__name__)

GLOBAL_TOP_K = 20

ROW_TITLES = {
    "time": "Time domain analysis",
    "freq": "Frequency domain analysis",
    "bis": "Bispectrum analysis",
    "nl": "Nonlinear analysis",
    "resp": "Respiration analysis",
    "global": "All Categories",
    "all": "All features without feature selection",
    "final": "Final Set",
}
ROW_ORDER = ("time", "freq", "bis", "nl", "resp", "global", "all", "final")

# Published ACC/SN/SP/F1 (%) for the same eight conditions, kept as reference
# data only; they come from a 9-driver dataset with an unstated window scheme.
PUBLISHED_REFERENCE = {
    "time": (69.2, 72.2, 67.0, 66.9),
    "freq": (50.7, 42.2, 57.2, 42.4),
    "bis": (46.0, 66.3, 30.8, 51.4),
    "nl": (59.8, 24.3, 86.7, 34.3),
    "resp": (87.0, 93.8, 81.8, 86.1),
    "global": (86.5, 94.0, 80.9, 85.7),
    "all": (84.0, 95.5, 75.2, 83.7),
    "final": (87.9, 93.3, 83.9, 86.9),
}


@dataclass
class LabeledDataset:
    """Feature rows of labeled windows, grouped by record.

    ``y`` holds +1 (Stress) / -1 (NoStress); Unlabeled windows must already
    be excluded.
    """

    X: np.ndarray
    feature_names: tuple
    y: np.ndarray
    groups: np.ndarray
    window_index: np.ndarray = None
    categories: dict = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        self.groups = np.asarray(self.groups).astype(str)
        self.feature_names = tuple(self.feature_names)
        if self.window_index is None:
            self.window_index = np.arange(self.y.size)
        self.window_index = np.asarray(self.window_index, dtype=int)
        if self.categories is None:
            self.categories = {n: FEATURE_CATEGORY.get(n) for n in self.feature_names}
        n = self.y.size
        if self.X.shape != (n, len(self.feature_names)) or self.groups.size != n:
            raise DataError("inconsistent dataset shapes")
        if not set(np.unique(self.y)) <= {-1, 1}:
            raise DataError("labels must be +1 (Stress) / -1 (NoStress); drop Unlabeled rows first")

    @property
    def records(self):
        return sorted(set(self.groups.tolist()))

    def check_usable(self):
        if len(self.records) < 2:
            raise DataError("dataset needs at least 2 records")
        if np.unique(self.y).size < 2:
            raise DataError("dataset needs both classes")

    def columns(self, names):
        pos = {n: i for i, n in enumerate(self.feature_names)}
        missing = [n for n in names if n not in pos]
        if missing:
            raise DataError(f"unknown feature(s) {missing}")
        return self.X[:, [pos[n] for n in names]]

    def take(self, mask):
        mask = np.asarray(mask)
        return LabeledDataset(self.X[mask], self.feature_names, self.y[mask], self.groups[mask],
                              self.window_index[mask], self.categories)

    def names_in(self, category):
        return [n for n in self.feature_names if self.categories.get(n) == category]


@dataclass
class EvalMetrics:
    tp: int
    tn: int
    fp: int
    fn: int
    acc: float = None
    sn: float = None
    sp: float = None
    f1: float = None
    n_folds: int = None
    skipped_folds: list = field(default_factory=list)

    def to_dict(self):
        return {k: getattr(self, k) for k in ("tp", "tn", "fp", "fn", "acc", "sn", "sp", "f1",
                                              "n_folds", "skipped_folds")}


def _ratio(num, den):
    return num / den if den > 0 else None


def compute_metrics(tp, tn, fp, fn):
    """ACC/SN/SP/F1 with Stress as the positive class; undefined -> ``None``."""
    counts = (tp, tn, fp, fn)
    if any(c < 0 for c in counts):
        raise DataError("confusion counts must be >= 0")
    if sum(counts) == 0:
        raise DataError("all confusion counts are zero")
    return EvalMetrics(
        tp, tn, fp, fn,
        acc=(tp + tn) / (tp + tn + fp + fn),
        sn=_ratio(tp, tp + fn),
        sp=_ratio(tn, tn + fp),
        f1=_ratio(2 * tp, 2 * tp + fp + fn),
    )


def split_dataset(data, policy="alternate"):
    """Record-level split into (selection, evaluation) subsets.

    ``alternate`` sends sorted records 0, 2, 4, ... to selection and the rest
    to evaluation; ``halves`` sends the first half to selection.
    """
    records = data.records
    if len(records) < 4:
        raise DataError(f"need at least 4 records to split, got {len(records)}")
    if policy == "alternate":
        sel = set(records[0::2])
    elif policy == "halves":
        sel = set(records[: (len(records) + 1) // 2])
    else:
        raise DataError(f"unknown split policy {policy!r}")
    in_sel = np.isin(data.groups, sorted(sel))
    parts = data.take(in_sel), data.take(~in_sel)
    for side, part in zip(("selection", "evaluation"), parts):
        if np.unique(part.y).size < 2:
            raise DataError(f"{side} subset is missing a class")
    return parts


def _run_fold(estimator, X, y, train, test):
    model = clone(estimator).fit(X[train], y[train])
    return model.predict(X[test])


def loocv(data, feature_subset, hyper=None, estimator=None, level="record", averaging="pooled",
          n_jobs=1):
    """Leave-one-group-out CV over ``feature_subset``.

    ``level="record"`` holds out one record per fold; ``"window"`` holds out
    single windows (leaky on overlapping windows; for comparison only).
    Confusion counts are pooled over folds unless ``averaging="per_fold"``.
    Folds whose training part lacks a class are skipped and reported.
    """
    names = list(feature_subset)
    if not names:
        raise DataError("feature subset is empty")
    data.check_usable()
    X = data.columns(names)
    y = data.y
    if level == "record":
        groups = data.groups
    elif level == "window":
        groups = np.array([f"{g}#{i}" for g, i in zip(data.groups, data.window_index)])
    else:
        raise DataError(f"unknown LOOCV level {level!r}")
    estimator = estimator if estimator is not None else make_svm_pipeline(hyper or SvmHyper())

    folds, skipped = [], []
    for train, test in LeaveOneGroupOut().split(X, y, groups):
        if np.intersect1d(data.groups[train], data.groups[test]).size and level == "record":
            raise InvariantViolation("a record appears in both training and test of one fold")
        held = groups[test[0]]
        if np.unique(y[train]).size < 2:
            logger.warning("fold %s skipped: training part has a single class", held)
            skipped.append(held)
            continue
        folds.append((held, train, test))

    preds = Parallel(n_jobs=n_jobs)(delayed(_run_fold)(estimator, X, y, tr, te) for _, tr, te in folds)

    per_fold = []
    tot = np.zeros(4, dtype=int)
    for (_, _, test), p in zip(folds, preds):
        t = y[test]
        c = np.array([np.sum((p == 1) & (t == 1)), np.sum((p == -1) & (t == -1)),
                      np.sum((p == 1) & (t == -1)), np.sum((p == -1) & (t == 1))])
        tot += c
        per_fold.append(c)
    if tot.sum() == 0:
        raise DataError("no fold could be evaluated")
    m = compute_metrics(*(int(v) for v in tot))
    if averaging == "per_fold":
        fm = [compute_metrics(*(int(v) for v in c)) for c in per_fold]
        for key in ("acc", "sn", "sp", "f1"):
            vals = [getattr(f, key) for f in fm if getattr(f, key) is not None]
            setattr(m, key, float(np.mean(vals)) if vals else None)
    elif averaging != "pooled":
        raise DataError(f"unknown averaging {averaging!r}")
    m.n_folds = len(folds)
    m.skipped_folds = skipped
    return m


@dataclass
class CategorySelection:
    ranking: object
    k: int
    accuracy_curve: list


def _ranking(data, names, k, bins, variant, context):
    return mrmr_rank(data.columns(names), data.y, k, names, bins, variant, context)


def select_per_category(data, hyper=None, bins=8, variant="MID", categories=CATEGORIES, **cv):
    """Step 1: per-category ranking and best-accuracy prefix length ``k_c``.

    Ties in accuracy go to the smaller ``k``.
    """
    out = {}
    for cat in categories:
        names = data.names_in(cat)
        if not names:
            continue
        ranking = _ranking(data, names, len(names), bins, variant, cat)
        curve = [loocv(data, ranking.top(k), hyper, **cv).acc for k in range(1, len(names) + 1)]
        best = max(curve)
        k_c = curve.index(best) + 1
        logger.info("category %s: k_c = %d (acc %.3f)", cat, k_c, best)
        out[cat] = CategorySelection(ranking, k_c, curve)
    return out


def select_global(data, k=GLOBAL_TOP_K, bins=8, variant="MID"):
    """Step 2: mRMR over every feature together, first ``k`` picks."""
    names = list(data.feature_names)
    return _ranking(data, names, k, bins, variant, "global")


def final_feature_set(step1, step2):
    """Step-2 names that also made some category's step-1 prefix, in step-2 order."""
    union = set()
    for sel in step1.values():
        if isinstance(sel, CategorySelection):
            union.update(sel.ranking.top(sel.k))
        else:
            union.update(sel)
    names = step2.names if hasattr(step2, "names") else list(step2)
    final = [n for n in names if n in union]
    if not final:
        raise DataError("step-1 and step-2 selections do not intersect; review the selection config")
    if not (set(final) <= set(names) and set(final) <= union):
        raise InvariantViolation("final set escapes its defining selections")
    return final


@dataclass
class SelectionResult:
    per_category: dict
    global_top: object
    final_set: list
    stage_metrics: dict = field(default_factory=dict)

    @property
    def k_map(self):
        return {c: s.k for c, s in self.per_category.items()}

    def category_prefix(self, cat):
        s = self.per_category[cat]
        return s.ranking.top(s.k)

    def to_dict(self):
        return {
            "per_category": {
                c: {"k": s.k, "accuracy_curve": s.accuracy_curve, "ranking": s.ranking.to_dict()}
                for c, s in self.per_category.items()
            },
            "k_map": self.k_map,
            "global": self.global_top.to_dict(),
            "final_set": list(self.final_set),
            "stage_metrics": {k: v.to_dict() for k, v in self.stage_metrics.items()},
        }

    @classmethod
    def from_dict(cls, d):
        per_cat = {
            c: CategorySelection(RankedFeatures.from_dict(s["ranking"]), s["k"], s["accuracy_curve"])
            for c, s in d["per_category"].items()
        }
        return cls(per_cat, RankedFeatures.from_dict(d["global"]), list(d["final_set"]))


def run_selection(data, hyper=None, bins=8, variant="MID", global_k=GLOBAL_TOP_K, **cv):
    """Both selection steps plus their intersection on the selection subset."""
    step1 = select_per_category(data, hyper, bins, variant, **cv)
    step2 = select_global(data, min(global_k, len(data.feature_names)), bins, variant)
    final = final_feature_set(step1, step2)
    stages = {
        "global": loocv(data, step2.names, hyper, **cv),
        "final": loocv(data, final, hyper, **cv),
    }
    return SelectionResult(step1, step2, final, stages)


def comparison_conditions(selection, all_names):
    """The eight evaluated feature sets, keyed as in ``ROW_ORDER``."""
    conds = {}
    for cat in CATEGORIES:
        if cat in selection.per_category:
            conds[cat] = selection.category_prefix(cat)
    conds["global"] = selection.global_top.names
    conds["all"] = list(all_names)
    conds["final"] = list(selection.final_set)
    return conds


def evaluate_final(eval_set, selection, hyper=None, **cv):
    """Grouped LOOCV on the evaluation subset for every comparison condition."""
    rows = []
    for key, names in comparison_conditions(selection, eval_set.feature_names).items():
        m = loocv(eval_set, names, hyper, **cv)
        noun = "features" if key in ("global", "all") else "selected features"
        rows.append({
            "condition": key,
            "row": f"{ROW_TITLES[key]} ({len(names)} {noun})",
            "n_features": len(names),
            "features": list(names),
            **m.to_dict(),
        })
    return rows


def grid_search_hyper(data, feature_subset, cs=(1, 2, 4, 8, 16), scales=(0.25, 0.5, 1, 2), **cv):
    """Best (C, scale) by grouped-LOOCV accuracy; ties keep the earlier grid point."""
    best, best_acc = None, -1.0
    for c, s in itertools.product(cs, scales):
        h = SvmHyper(c=float(c), kernel_scale=float(s))
        acc = loocv(data, feature_subset, h, **cv).acc
        if acc > best_acc:
            best, best_acc = h, acc
    return best, best_acc
