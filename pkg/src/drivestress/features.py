"""The 76 window features in five categories: time, freq, bis, nl, resp."""

import json
import logging
from dataclasses import dataclass
from importlib import resources

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import spectral
from .exceptions import DataError, WindowRejected
from .preprocess import UniformSeries, resample_nn
from .spectral import EPS, HF, LF, ROI, TOTAL, VLF, FrequencyBand

logger = logging.getLogger(__name__)

CATEGORIES = ("time", "freq", "bis", "nl", "resp")

TIME_FEATURES = (
    "t_mean_nn", "t_sdnn", "t_msd", "t_nn20", "t_nn50", "t_pnn20", "t_pnn50",
    "t_hrv_tri", "t_energy", "t_zc_mean", "t_ac_mean", "t_ac_min",
)
FREQ_FEATURES = (
    "f_psd_vlf", "f_psd_lf", "f_psd_hf", "f_psd_roi", "f_lf_hf_ratio", "f_peak_hf",
    "f_rel_vlf", "f_rel_lf", "f_rel_hf", "f_log_vlf", "f_log_lf", "f_log_hf",
    "f_norm_lf", "f_norm_hf",
)
_REGION_KEYS = ("ll", "lh", "hh", "roi")
BIS_FEATURES = tuple(
    [f"b_{stat}_{r}" for stat in ("mavg", "pavg", "enb", "esnb", "lm") for r in _REGION_KEYS]
    + [f"b_ldm_{r}" for r in ("ll", "hh", "roi")]
    + [f"b_{stat}_{r}" for stat in ("wcobi", "wcobj") for r in _REGION_KEYS]
)
NL_FEATURES = ("n_sd1", "n_sd2", "n_sd_ratio", "n_renyi", "n_tsallis")
RESP_FEATURES = (
    "r_mean", "r_median", "r_sd", "r_max", "r_min",
    "r_psd_p12", "r_psd_p23", "r_psd_p34", "r_psd_p45", "r_psd_p56", "r_psd_p67",
    "r_rel_power", "r_sum_power", "r_max_sum_ratio",
)

FEATURES_BY_CATEGORY = {
    "time": TIME_FEATURES,
    "freq": FREQ_FEATURES,
    "bis": BIS_FEATURES,
    "nl": NL_FEATURES,
    "resp": RESP_FEATURES,
}
FEATURE_NAMES = tuple(n for c in CATEGORIES for n in FEATURES_BY_CATEGORY[c])
FEATURE_CATEGORY = {n: c for c in CATEGORIES for n in FEATURES_BY_CATEGORY[c]}

# Respiration band edges P1..P7 in Hz.
RESP_EDGES = (0.06, 0.12, 0.24, 0.49, 0.98, 1.95, 3.91)
RESP_BANDS = tuple(FrequencyBand(lo, hi) for lo, hi in zip(RESP_EDGES[:-1], RESP_EDGES[1:]))

HIST_BIN_MS = 1000.0 / 128.0


def feature_dictionary():
    """The frozen, published name -> {category, description} mapping."""
    text = resources.files("drivestress").joinpath("feature_dictionary.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class FeatureConfig:
    resample_hz: float = 4.0
    seg_len: int = 256
    overlap: float = 0.5
    taper: str = "hann"
    fft_len: int = 512
    bis_seg_len: int = 128
    resp_seg_s: float = 60.0
    subwin_s: float = 30.0
    ac_lags: int = 10
    entropy_order: float = 2.0


class FeatureVector(dict):
    """Ordered ``name -> value`` mapping that knows each name's category."""

    def categories(self):
        return {n: FEATURE_CATEGORY.get(n) for n in self}

    def as_array(self, names=FEATURE_NAMES):
        return np.array([self[n] for n in names], dtype=float)


def _check_finite(fv, category):
    for name, v in fv.items():
        if not np.isfinite(v):
            raise WindowRejected(f"{category}: {name} is not finite", name)
    return fv


# -- time domain -----------------------------------------------------------

def successive_count(nn, threshold_ms):
    """Number of successive differences with ``|d| > threshold_ms``."""
    return int(np.count_nonzero(np.abs(np.diff(nn)) > threshold_ms))


def nn_histogram(nn, bin_ms=HIST_BIN_MS):
    """Counts of the non-empty fixed-width bins (anchored at 0 ms)."""
    _, counts = np.unique(np.floor(np.asarray(nn) / bin_ms).astype(np.int64), return_counts=True)
    return counts


def hrv_triangular_index(nn, bin_ms=HIST_BIN_MS):
    return len(nn) / nn_histogram(nn, bin_ms).max()


def zero_crossings(x):
    """Sign changes of ``x``; exact zeros are skipped, not counted twice."""
    s = np.sign(np.asarray(x, dtype=float))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def autocorrelation(x, max_lag):
    """Biased normalized autocorrelation at lags ``1..max_lag``."""
    x = np.asarray(x, dtype=float) - np.mean(x)
    denom = np.dot(x, x)
    if denom == 0:
        return np.full(max_lag, np.nan)
    return np.array([np.dot(x[:-k], x[k:]) / denom for k in range(1, max_lag + 1)])


def _subwindows(nn, subwin_s):
    t = nn.t_ms
    start = t[0] - nn.rri_ms[0]
    span = t[-1] - start
    n_sub = int(np.floor(span / (1000.0 * subwin_s) + 1e-9))
    for k in range(n_sub):
        lo = start + 1000.0 * subwin_s * k
        yield nn.rri_ms[(t > lo) & (t <= lo + 1000.0 * subwin_s)]


def time_domain_features(nn, subwin_s=30.0, ac_lags=10):
    x = nn.rri_ms
    if x.size < 16:
        raise WindowRejected("time-domain: too few intervals")
    subs = [s for s in _subwindows(nn, subwin_s) if s.size > ac_lags + 1]
    if not subs:
        raise WindowRejected(f"time-domain: no {subwin_s:g} s sub-window with enough intervals "
                             "(subwin longer than window?)")
    d = np.diff(x)
    ac = np.concatenate([autocorrelation(s, ac_lags) for s in subs])
    nn20 = successive_count(x, 20)
    nn50 = successive_count(x, 50)
    fv = FeatureVector(
        t_mean_nn=float(x.mean()),
        t_sdnn=float(x.std()),
        t_msd=float(np.mean(d ** 2)),
        t_nn20=float(nn20),
        t_nn50=float(nn50),
        t_pnn20=nn20 / x.size,
        t_pnn50=nn50 / x.size,
        t_hrv_tri=float(hrv_triangular_index(x)),
        t_energy=float(np.sum(x ** 2)),
        t_zc_mean=float(np.mean([zero_crossings(s - s.mean()) for s in subs])),
        t_ac_mean=float(np.mean(ac)),
        t_ac_min=float(np.min(ac)),
    )
    return _check_finite(fv, "time-domain")


# -- frequency domain ------------------------------------------------------

def frequency_domain_features(tach, seg_len=256, overlap=0.5, taper="hann", fft_len=512):
    try:
        psd = spectral.estimate_psd(tach, seg_len, overlap, taper, fft_len)
    except DataError as exc:
        raise WindowRejected(f"frequency-domain: {exc}") from None
    vlf = spectral.band_power(psd, VLF)
    lf = spectral.band_power(psd, LF)
    hf = spectral.band_power(psd, HF)
    total = spectral.band_power(psd, TOTAL)
    if hf <= 0:
        raise WindowRejected("frequency-domain: HF power is zero, f_lf_hf_ratio undefined", "f_lf_hf_ratio")
    in_hf = HF.contains(psd.freqs_hz)
    peak = psd.freqs_hz[in_hf][np.argmax(psd.density[in_hf])]
    fv = FeatureVector(
        f_psd_vlf=vlf,
        f_psd_lf=lf,
        f_psd_hf=hf,
        f_psd_roi=spectral.band_power(psd, ROI),
        f_lf_hf_ratio=lf / hf,
        f_peak_hf=float(peak),
        f_rel_vlf=vlf / total,
        f_rel_lf=lf / total,
        f_rel_hf=hf / total,
        f_log_vlf=float(np.log(vlf + EPS)),
        f_log_lf=float(np.log(lf + EPS)),
        f_log_hf=float(np.log(hf + EPS)),
        f_norm_lf=lf / (lf + hf),
        f_norm_hf=hf / (lf + hf),
    )
    return _check_finite(fv, "frequency-domain")


# -- bispectrum ------------------------------------------------------------

def bispectrum_features(tach, seg_len=128, overlap=0.5, taper="hann", fft_len=512):
    try:
        grid = spectral.estimate_bispectrum(tach, seg_len, overlap, taper, fft_len)
    except DataError as exc:
        raise WindowRejected(f"bispectrum: {exc}") from None
    stats = {key: spectral.region_stats(grid, region) for key, region in spectral.REGIONS.items()}
    fields = {"mavg": "m_avg", "pavg": "p_avg", "enb": "e_nb", "esnb": "e_snb", "lm": "l_m",
              "ldm": "l_dm", "wcobi": "wcob_i", "wcobj": "wcob_j"}
    fv = FeatureVector()
    for name in BIS_FEATURES:
        _, stat, region = name.split("_")
        fv[name] = getattr(stats[region], fields[stat])
    return _check_finite(fv, "bispectrum")


# -- nonlinear -------------------------------------------------------------

def poincare_sd(nn):
    """(SD1, SD2) of the Poincare plot of successive intervals."""
    x = np.asarray(nn, dtype=float)
    d = np.diff(x)
    sd1 = d.std() / np.sqrt(2.0)
    sd2 = np.sqrt(max(2.0 * x.var() - d.var() / 2.0, 0.0))
    return float(sd1), float(sd2)


def histogram_entropies(nn, order=2.0, bin_ms=HIST_BIN_MS):
    """(Renyi, Tsallis) entropies of the NN histogram, both of ``order``."""
    counts = nn_histogram(nn, bin_ms)
    p = counts / counts.sum()
    if order == 1:
        h = float(-np.sum(p * np.log(p)))
        return h, h
    s = float(np.sum(p ** order))
    renyi = np.log(s) / (1.0 - order)
    tsallis = (1.0 - s) / (order - 1.0)
    return float(renyi) + 0.0, float(tsallis) + 0.0


def nonlinear_features(nn, entropy_order=2.0):
    x = nn.rri_ms
    if x.size < 16:
        raise WindowRejected("nonlinear: too few intervals")
    sd1, sd2 = poincare_sd(x)
    if sd2 == 0:
        raise WindowRejected("nonlinear: SD2 is zero, n_sd_ratio undefined", "n_sd_ratio")
    renyi, tsallis = histogram_entropies(x, entropy_order)
    fv = FeatureVector(n_sd1=sd1, n_sd2=sd2, n_sd_ratio=sd1 / sd2, n_renyi=renyi, n_tsallis=tsallis)
    return _check_finite(fv, "nonlinear")


# -- respiration -----------------------------------------------------------

def respiration_band_powers(resp, seg_s=60.0, overlap=0.5, taper="hann"):
    """Powers of the demeaned waveform in the six bands between P1..P7."""
    x = np.asarray(resp.samples, dtype=float)
    fs = resp.sample_rate_hz
    seg_len = min(int(round(seg_s * fs)), x.size)
    fft_len = 1 << int(np.ceil(np.log2(4 * seg_len)))
    series = UniformSeries(fs, x - x.mean())
    psd = spectral.estimate_psd(series, seg_len, overlap, taper, fft_len)
    return np.array([spectral.band_power(psd, b) for b in RESP_BANDS])


def respiration_features(resp, seg_s=60.0, overlap=0.5, taper="hann"):
    x = resp.samples
    if resp.sample_rate_hz < 8.0:
        raise WindowRejected("respiration: sample rate below 8 Hz")
    if resp.duration_s < 30.0:
        raise WindowRejected("respiration: fewer than 30 s of samples")
    p = respiration_band_powers(resp, seg_s, overlap, taper)
    low = p[0] + p[1] + p[2]
    if low <= 0:
        raise WindowRejected("respiration: zero power below P4, r_rel_power undefined", "r_rel_power")
    total = float(p.sum())
    fv = FeatureVector(
        r_mean=float(np.mean(x)),
        r_median=float(np.median(x)),
        r_sd=float(np.std(x)),
        r_max=float(np.max(x)),
        r_min=float(np.min(x)),
    )
    for name, value in zip(RESP_FEATURES[5:11], p):
        fv[name] = float(value)
    fv["r_rel_power"] = float((p[3] + p[4] + p[5]) / low)
    fv["r_sum_power"] = total
    fv["r_max_sum_ratio"] = float(p.max() / total)
    return _check_finite(fv, "respiration")


# -- all -------------------------------------------------------------------

def extract_all(window, config=None):
    """Full 76-feature vector for one analysis window.

    Raises :class:`WindowRejected` naming the failing category/feature.
    """
    cfg = config or FeatureConfig()
    if window.rejected:
        raise WindowRejected(f"time-domain: too few intervals ({window.rejected_reason})")
    nn = window.nn
    if len(nn) < 16:
        raise WindowRejected("time-domain: too few intervals")
    fv = FeatureVector()
    fv.update(time_domain_features(nn, cfg.subwin_s, cfg.ac_lags))
    tach = resample_nn(nn, cfg.resample_hz)
    fv.update(frequency_domain_features(tach, cfg.seg_len, cfg.overlap, cfg.taper, cfg.fft_len))
    fv.update(bispectrum_features(tach, cfg.bis_seg_len, cfg.overlap, cfg.taper, cfg.fft_len))
    fv.update(nonlinear_features(nn, cfg.entropy_order))
    fv.update(respiration_features(window.resp_slice, cfg.resp_seg_s, cfg.overlap, cfg.taper))
    return FeatureVector((n, fv[n]) for n in FEATURE_NAMES)


class WindowFeatureExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer from a sequence of windows to a feature matrix.

    Rejected windows are dropped; their reasons are kept in ``rejections_``
    and ``kept_`` lists the indices of windows that produced a row.
    """

    def __init__(self, config=None):
        self.config = config

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        rows, self.kept_, self.rejections_ = [], [], []
        for i, window in enumerate(X):
            try:
                rows.append(extract_all(window, self.config).as_array())
                self.kept_.append(i)
            except WindowRejected as exc:
                logger.info("%s[%d] rejected: %s", window.record_id, window.index, exc.reason)
                self.rejections_.append((window.record_id, window.index, exc.reason))
        return np.array(rows).reshape(len(rows), len(FEATURE_NAMES))

    def get_feature_names_out(self, input_features=None):
        return np.array(FEATURE_NAMES, dtype=object)
