"""Record-level orchestration: windows -> feature rows and label rows -> dataset."""

import logging

import numpy as np
from joblib import Parallel, delayed

from .evaluation import LabeledDataset
from .exceptions import DataError, WindowRejected
from .features import FEATURE_NAMES, extract_all
from .labeling import StressLabel, compute_thresholds, label_window
from .records import WaveformChannel, segment_windows

logger = logging.getLogger(__name__)


def windows_for(record, cfg):
    return segment_windows(
        record, cfg.window.len_s, cfg.window.step_s,
        median_half_width=cfg.preprocess.median_halfwidth, rel_tol=cfg.preprocess.rel_tol,
    )


def _extract_record(record, cfg):
    fcfg = cfg.feature_config()
    rows, rejected = [], []
    for w in windows_for(record, cfg):
        try:
            fv = extract_all(w, fcfg)
        except WindowRejected as exc:
            rejected.append({"record_id": w.record_id, "window_index": w.index, "reason": exc.reason})
            continue
        rows.append({"record_id": w.record_id, "window_index": w.index, "start_s": w.start_s, **fv})
    return rows, rejected


def extract_features(records, cfg, n_jobs=1):
    """Feature rows for every accepted window plus a list of rejections."""
    results = Parallel(n_jobs=n_jobs)(delayed(_extract_record)(r, cfg) for r in records)
    rows = [row for res in results for row in res[0]]
    rejected = [rej for res in results for rej in res[1]]
    logger.info("extracted %d windows (%d rejected)", len(rows), len(rejected))
    return rows, rejected


def label_records(records, cfg):
    """One label row per window. Thresholds come from each record's full GSR
    unless ``labeling.per_record`` is off, in which case all records are pooled."""
    pooled = None
    if not cfg.labeling.per_record:
        allgsr = np.concatenate([r.gsr.samples for r in records])
        pooled = compute_thresholds(WaveformChannel("gsr", 1.0, allgsr), cfg.labeling.std_kind)
    rows = []
    for r in records:
        th = pooled or compute_thresholds(r.gsr, cfg.labeling.std_kind)
        for w in windows_for(r, cfg):
            if w.gsr_slice.samples.size == 0:
                raise DataError(f"{r.record_id}[{w.index}]: empty GSR slice")
            rows.append({
                "record_id": r.record_id,
                "window_index": w.index,
                "label": label_window(w.gsr_slice, th).value,
                "gsr_median": float(np.median(w.gsr_slice.samples)),
                "lower": th.lower,
                "upper": th.upper,
            })
    return rows


def build_dataset(feature_rows, label_rows, feature_names=FEATURE_NAMES):
    """Join features and labels on (record, window); drop Unlabeled windows."""
    labels = {(r["record_id"], int(r["window_index"])): r["label"] for r in label_rows}
    X, y, groups, idx = [], [], [], []
    for row in feature_rows:
        key = (row["record_id"], int(row["window_index"]))
        lab = labels.get(key)
        if lab is None:
            raise DataError(f"no label for window {key}")
        sign = StressLabel(lab).sign
        if sign == 0:
            continue
        X.append([float(row[n]) for n in feature_names])
        y.append(sign)
        groups.append(key[0])
        idx.append(key[1])
    if not X:
        raise DataError("no labeled windows with features")
    return LabeledDataset(np.array(X), feature_names, np.array(y), np.array(groups), np.array(idx))
