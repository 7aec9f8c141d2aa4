import numpy as np
import pytest
from sklearn.dummy import DummyClassifier

from drivestress import evaluation as E
from drivestress.exceptions import DataError, InvariantViolation
from drivestress.features import CATEGORIES, FEATURE_NAMES
from drivestress.mrmr import RankedFeatures
from drivestress.svm import SvmHyper
from drivestress.synthetic import informative_dataset


def _dataset(n_records=6, per=10, rng=None, signal=3.0, names=("a", "b", "c")):
    rng = np.random.default_rng(rng)
    n = n_records * per
    y = np.tile(np.r_[np.ones(per // 2, int), -np.ones(per - per // 2, int)], n_records)
    X = rng.standard_normal((n, len(names)))
    X[:, 0] += signal * y
    groups = np.repeat([f"r{i}" for i in range(n_records)], per)
    return E.LabeledDataset(X, names, y, groups, categories={n_: "time" for n_ in names})


def test_metrics_examples():
    m = E.compute_metrics(50, 50, 0, 0)
    assert (m.acc, m.sn, m.sp, m.f1) == (1.0, 1.0, 1.0, 1.0)
    m = E.compute_metrics(0, 50, 0, 50)
    assert (m.acc, m.sn, m.sp, m.f1) == (0.5, 0.0, 1.0, 0.0)
    m = E.compute_metrics(93, 84, 16, 7)
    assert m.acc == pytest.approx(0.885)
    assert (m.sn, m.sp) == pytest.approx((0.93, 0.84))
    assert m.f1 == pytest.approx(186 / 209)


def test_metrics_undefined_and_errors():
    assert E.compute_metrics(0, 5, 0, 0).sn is None
    with pytest.raises(DataError):
        E.compute_metrics(0, 0, 0, 0)
    with pytest.raises(DataError):
        E.compute_metrics(-1, 2, 0, 0)


def test_split_alternate():
    data = _dataset(n_records=8, rng=0)
    sel, ev = E.split_dataset(data, "alternate")
    assert len(sel.records) == len(ev.records) == 4
    assert not set(sel.records) & set(ev.records)
    assert sel.y.size + ev.y.size == data.y.size


def test_split_needs_four_records():
    with pytest.raises(DataError):
        E.split_dataset(_dataset(n_records=3, rng=0))


def test_loocv_separable():
    m = E.loocv(_dataset(rng=1, signal=10.0), ["a"], SvmHyper(c=4.0, kernel_scale=2.0))
    assert (m.acc, m.sn, m.sp, m.f1) == (1.0, 1.0, 1.0, 1.0)
    assert m.n_folds == 6 and m.skipped_folds == []


def test_loocv_constant_predictor():
    data = _dataset(rng=2)
    m = E.loocv(data, ["a", "b"], estimator=DummyClassifier(strategy="constant", constant=1))
    assert m.acc == 0.5
    assert 0.0 in (m.sn, m.sp)


def test_loocv_counts_and_weighted_mean(rng):
    data = _dataset(rng=3, signal=0.7)
    m = E.loocv(data, ["a", "b", "c"])
    assert m.tp + m.tn + m.fp + m.fn == data.y.size
    assert min(m.sn, m.sp) <= m.acc <= max(m.sn, m.sp)


def test_loocv_window_level_and_per_fold():
    data = _dataset(n_records=4, per=6, rng=4)
    m = E.loocv(data, ["a"], level="window")
    assert m.n_folds == data.y.size
    m2 = E.loocv(data, ["a"], averaging="per_fold")
    assert 0.0 <= m2.acc <= 1.0


def test_loocv_skips_single_class_training():
    data = _dataset(n_records=3, per=4, rng=5)
    y = data.y.copy()
    y[data.groups != "r0"] = 1
    y[data.groups == "r0"] = -1
    skewed = E.LabeledDataset(data.X, data.feature_names, y, data.groups)
    m = E.loocv(skewed, ["a"])
    assert m.skipped_folds == ["r0"]
    assert m.n_folds == 2


def test_leakage_guard_fires(monkeypatch):
    class Leaky:
        def split(self, X, y, groups):
            idx = np.arange(len(y))
            yield idx[1:], idx[:2]

    monkeypatch.setattr(E, "LeaveOneGroupOut", Leaky)
    with pytest.raises(InvariantViolation):
        E.loocv(_dataset(rng=6), ["a"])


def test_per_category_single_signal_feature():
    data = _dataset(rng=7, signal=10.0)
    sel = E.select_per_category(data, SvmHyper(c=4.0, kernel_scale=2.0), categories=("time",))
    assert sel["time"].ranking.names[0] == "a"
    assert sel["time"].k == 1


def test_per_category_deterministic():
    data = informative_dataset(n_records=4, windows_per_record=12, rng=8)
    a = E.select_per_category(data, categories=("nl", "freq"))
    b = E.select_per_category(data, categories=("nl", "freq"))
    assert {c: s.k for c, s in a.items()} == {c: s.k for c, s in b.items()}
    assert {c: s.ranking.names for c, s in a.items()} == {c: s.ranking.names for c, s in b.items()}


def test_select_global_sizes():
    data = informative_dataset(n_records=4, windows_per_record=12, rng=9)
    assert len(E.select_global(data, 20).names) == 20
    full = E.select_global(data, 76)
    assert sorted(full.names) == sorted(FEATURE_NAMES)


def test_select_global_column_order():
    data = informative_dataset(n_records=4, windows_per_record=12, rng=10)
    perm = np.random.default_rng(0).permutation(76)
    shuffled = E.LabeledDataset(data.X[:, perm], [FEATURE_NAMES[i] for i in perm], data.y, data.groups)
    assert E.select_global(data, 20).names == E.select_global(shuffled, 20).names


def test_final_set_intersection_order():
    step2 = RankedFeatures([("b", 1.0), ("d", 0.5), ("a", 0.2)])
    assert E.final_feature_set({"x": ["a", "b", "c"]}, step2) == ["b", "a"]


def test_final_set_disjoint():
    with pytest.raises(DataError, match="config"):
        E.final_feature_set({"x": ["a"]}, RankedFeatures([("z", 1.0)]))


def test_evaluate_final_table_shape():
    data = informative_dataset(n_records=8, windows_per_record=10, rng=11)
    sel, ev = E.split_dataset(data)
    result = E.run_selection(sel, global_k=20)
    rows = E.evaluate_final(ev, result)
    assert [r["condition"] for r in rows] == list(E.ROW_ORDER)
    assert rows[6]["n_features"] == 76
    assert rows[5]["n_features"] == 20
    for r in rows:
        assert r["tp"] + r["tn"] + r["fp"] + r["fn"] == ev.y.size


def test_selection_round_trip():
    data = informative_dataset(n_records=4, windows_per_record=10, rng=12)
    result = E.run_selection(data, global_k=10)
    back = E.SelectionResult.from_dict(result.to_dict())
    assert back.final_set == result.final_set
    assert back.k_map == result.k_map
    assert set(back.k_map) == set(CATEGORIES)
