import dataclasses
import json

import numpy as np
import pytest
from sklearn.base import clone

from drivestress import features as F
from drivestress.exceptions import WindowRejected
from drivestress.preprocess import NNSeries, UniformSeries
from drivestress.records import WaveformChannel, segment_windows
from drivestress.spectral import REGIONS, PSDEstimate, estimate_bispectrum, region_mask
from drivestress.synthetic import qpc_series, synthetic_drive, tone_series


def _nn(values):
    values = np.asarray(values, dtype=float)
    return NNSeries(np.cumsum(values), values)


@pytest.fixture(scope="module")
def drive_windows():
    rec = synthetic_drive("d0", rng=7)
    return [w for w in segment_windows(rec) if not w.rejected]


def test_feature_counts():
    counts = {c: len(F.FEATURES_BY_CATEGORY[c]) for c in F.CATEGORIES}
    assert counts == {"time": 12, "freq": 14, "bis": 31, "nl": 5, "resp": 14}
    assert len(F.FEATURE_NAMES) == len(set(F.FEATURE_NAMES)) == 76


def test_feature_dictionary_is_frozen():
    d = F.feature_dictionary()
    assert list(d) == list(F.FEATURE_NAMES)
    assert all(d[n]["category"] == F.FEATURE_CATEGORY[n] for n in d)
    json.dumps(d)


def test_constant_series_helpers():
    x = np.array([800.0] * 4)
    assert F.successive_count(x, 50) == 0
    assert F.hrv_triangular_index(x) == 1.0
    assert np.sum(x ** 2) == 2_560_000


def test_nn50_hand_count():
    x = np.array([800.0, 860.0, 865.0, 920.0])
    assert F.successive_count(x, 50) == 2
    assert F.successive_count(x, 50) / x.size == 0.5


def test_time_features_on_clean_series():
    x = 800 + 40 * np.sin(np.arange(120) / 3.0)
    fv = F.time_domain_features(_nn(x))
    assert list(fv) == list(F.TIME_FEATURES)
    assert fv["t_mean_nn"] == pytest.approx(x.mean())
    assert fv["t_sdnn"] == pytest.approx(x.std())
    assert fv["t_pnn50"] <= fv["t_pnn20"]


def test_alternating_zero_crossings():
    x = np.tile([700.0, 900.0], 60)
    subs = list(F._subwindows(_nn(x), 30.0))
    assert subs
    for s in subs:
        assert F.zero_crossings(s - s.mean()) == s.size - 1


def test_time_features_need_16_intervals():
    with pytest.raises(WindowRejected, match="time-domain: too few intervals"):
        F.time_domain_features(_nn([800.0] * 10))


def test_constant_series_rejected_for_autocorrelation():
    with pytest.raises(WindowRejected, match="not finite"):
        F.time_domain_features(_nn([800.0] * 120))


def test_freq_tone_010():
    fv = F.frequency_domain_features(tone_series(0.10, duration_s=100.0, offset=800.0))
    assert fv["f_norm_lf"] >= 0.95
    assert fv["f_lf_hf_ratio"] >= 19
    assert fv["f_norm_lf"] + fv["f_norm_hf"] == pytest.approx(1.0, abs=1e-12)


def test_freq_peak_hf():
    fv = F.frequency_domain_features(tone_series(0.30, duration_s=100.0, offset=800.0))
    assert abs(fv["f_peak_hf"] - 0.30) <= 4.0 / 512


def test_freq_flat_density_relative_lf(monkeypatch):
    f = np.linspace(0, 2, 513)
    monkeypatch.setattr(F.spectral, "estimate_psd",
                        lambda *a, **k: PSDEstimate(f, np.ones_like(f), f[1]))
    fv = F.frequency_domain_features(tone_series(0.1))
    assert fv["f_rel_lf"] == pytest.approx(0.275, rel=1e-12)


def test_bis_scale_invariance(rng):
    x = 800 + 30 * rng.standard_normal(400)
    a = F.bispectrum_features(UniformSeries(4.0, x))
    b = F.bispectrum_features(UniformSeries(4.0, 2 * x))
    for name in F.BIS_FEATURES:
        if "_enb_" in name or "_esnb_" in name:
            assert a[name] == b[name]


def test_bis_qpc_centroid():
    series = qpc_series(rng=5, n_blocks=8)
    fv = F.bispectrum_features(series)
    res = 4.0 / 512
    assert abs(fv["b_wcobi_lh"] - 0.10 / res) <= 2
    assert abs(fv["b_wcobj_lh"] - 0.25 / res) <= 2


def test_bis_white_noise_entropy(rng):
    grid = estimate_bispectrum(UniformSeries(4.0, rng.standard_normal(400)))
    rows, cols = region_mask(grid.freqs_hz, REGIONS["roi"])
    n_roi = rows.size * cols.size
    vals = [F.bispectrum_features(UniformSeries(4.0, rng.standard_normal(400)))["b_enb_roi"]
            for _ in range(20)]
    assert np.mean(vals) >= 0.9 * np.log(n_roi)


def test_poincare_constant():
    assert F.poincare_sd([800.0] * 20) == (0.0, 0.0)
    assert F.histogram_entropies([800.0] * 20) == (0.0, 0.0)


def test_poincare_alternating():
    sd1, _ = F.poincare_sd(np.r_[np.tile([800.0, 900.0], 20), 800.0])
    assert sd1 == pytest.approx(100 / np.sqrt(2), rel=1e-12)


@pytest.mark.parametrize("k", [2, 5, 17])
def test_uniform_histogram_entropies(k):
    renyi, tsallis = F.histogram_entropies(800.0 + 10.0 * np.arange(k))
    assert renyi == pytest.approx(np.log(k), rel=1e-12)
    assert tsallis == pytest.approx(1 - 1 / k, rel=1e-12)


def test_nonlinear_rejects_zero_sd2():
    with pytest.raises(WindowRejected, match="SD2"):
        F.nonlinear_features(_nn([800.0] * 30))


def _resp(freq, fs=16.0, duration=100.0, c=0.0):
    t = np.arange(int(fs * duration)) / fs
    return WaveformChannel("resp", fs, c + np.sin(2 * np.pi * freq * t))


def test_resp_constant():
    ch = WaveformChannel("resp", 16.0, np.full(1600, 2.5))
    assert np.all(F.respiration_band_powers(ch) == 0)
    with pytest.raises(WindowRejected, match="r_rel_power"):
        F.respiration_features(ch)


def test_resp_constant_stats():
    ch = WaveformChannel("resp", 16.0, np.full(1600, 2.5))
    x = ch.samples
    assert np.mean(x) == np.median(x) == np.max(x) == np.min(x) == 2.5 and np.std(x) == 0


def test_resp_030():
    fv = F.respiration_features(_resp(0.30))
    bands = [fv[n] for n in F.RESP_FEATURES[5:11]]
    assert F.RESP_FEATURES[5 + int(np.argmax(bands))] == "r_psd_p34"
    assert fv["r_max_sum_ratio"] >= 0.9
    assert fv["r_rel_power"] <= 0.1


def test_resp_150():
    fv = F.respiration_features(_resp(1.50))
    bands = [fv[n] for n in F.RESP_FEATURES[5:11]]
    assert F.RESP_FEATURES[5 + int(np.argmax(bands))] == "r_psd_p56"
    assert fv["r_rel_power"] >= 9


def test_resp_rejects_slow_rate():
    ch = WaveformChannel("resp", 4.0, np.sin(np.arange(400)))
    with pytest.raises(WindowRejected, match="8 Hz"):
        F.respiration_features(ch)


def test_extract_all_valid_window(drive_windows):
    fv = F.extract_all(drive_windows[0])
    assert list(fv) == list(F.FEATURE_NAMES)
    assert np.all(np.isfinite(fv.as_array()))


def test_extract_all_deterministic(drive_windows):
    a = F.extract_all(drive_windows[1]).as_array()
    b = F.extract_all(drive_windows[1]).as_array()
    assert np.array_equal(a, b)


def test_extract_all_too_few_intervals(drive_windows):
    w = drive_windows[0]
    short = dataclasses.replace(w, nn=NNSeries(w.nn.t_ms[:10], w.nn.rri_ms[:10]))
    with pytest.raises(WindowRejected, match="time-domain: too few intervals"):
        F.extract_all(short)


def test_extractor_estimator(drive_windows):
    ext = clone(F.WindowFeatureExtractor())
    X = ext.fit_transform(drive_windows[:3])
    assert X.shape == (3, 76)
    assert ext.kept_ == [0, 1, 2] and ext.rejections_ == []
    assert list(ext.get_feature_names_out()) == list(F.FEATURE_NAMES)
