"""Power spectra, band powers and the third-order (bispectrum) estimator.

Both estimators share one segmentation scheme: overlapping segments,
per-segment mean removal, a taper, and a zero-padded FFT of ``fft_len``
points. The bispectrum lattice therefore has the same spacing
``rate / fft_len`` as the PSD frequency axis.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import get_window

from .exceptions import DataError

logger = logging.getLogger(__name__)

EPS = 1e-12


@dataclass(frozen=True)
class FrequencyBand:
    lo_hz: float
    hi_hz: float

    def __post_init__(self):
        if not 0 <= self.lo_hz < self.hi_hz:
            raise ValueError(f"invalid band [{self.lo_hz}, {self.hi_hz}]")

    def contains(self, f):
        return (f >= self.lo_hz) & (f <= self.hi_hz)


VLF = FrequencyBand(0.0, 0.04)
LF = FrequencyBand(0.04, 0.15)
HF = FrequencyBand(0.15, 0.4)
ROI = FrequencyBand(0.04, 0.4)
TOTAL = FrequencyBand(0.0, 0.4)


@dataclass(frozen=True)
class PSDEstimate:
    freqs_hz: np.ndarray
    density: np.ndarray
    resolution_hz: float
    segment_count: int = 1


@dataclass(frozen=True)
class BispectrumGrid:
    freqs_hz: np.ndarray
    values: np.ndarray
    segment_count: int

    @property
    def resolution_hz(self):
        return float(self.freqs_hz[1] - self.freqs_hz[0])


@dataclass(frozen=True)
class BispectrumRegion:
    kind: str
    f1_band: FrequencyBand
    f2_band: FrequencyBand


REGIONS = {
    "ll": BispectrumRegion("LL", LF, LF),
    "lh": BispectrumRegion("LH", LF, HF),
    "hh": BispectrumRegion("HH", HF, HF),
    "roi": BispectrumRegion("ROI", ROI, ROI),
}


@dataclass(frozen=True)
class RegionStats:
    m_avg: float
    p_avg: float
    e_nb: float
    e_snb: float
    l_m: float
    l_dm: float
    wcob_i: float
    wcob_j: float


def _segment_starts(n, seg_len, overlap_frac):
    if not 0 <= overlap_frac < 1:
        raise DataError("overlap_frac must lie in [0, 1)")
    step = max(1, int(round(seg_len * (1.0 - overlap_frac))))
    return np.arange(0, n - seg_len + 1, step)


def _segment_spectra(x, seg_len, overlap_frac, taper, fft_len):
    """Tapered, mean-removed, zero-padded FFTs of every segment."""
    starts = _segment_starts(x.size, seg_len, overlap_frac)
    segs = np.stack([x[s:s + seg_len] for s in starts])
    segs = segs - segs.mean(axis=1, keepdims=True)
    w = get_window(taper, seg_len, fftbins=True)
    nfft = max(fft_len or seg_len, seg_len)
    return np.fft.rfft(segs * w, n=nfft, axis=1), w, nfft


def estimate_psd(series, seg_len=256, overlap_frac=0.5, taper="hann", fft_len=512):
    """One-sided Welch PSD in units of power per Hz.

    The integral of the density over [0, rate/2] matches the variance of the
    (per-segment demeaned) input up to taper bias. A series shorter than one
    segment is an error rather than a silently shortened estimate.
    """
    x = np.asarray(series.values, dtype=float)
    fs = float(series.sample_rate_hz)
    if seg_len < 16:
        raise DataError("seg_len must be >= 16")
    if x.size < seg_len:
        raise DataError(f"series of {x.size} samples is shorter than one segment ({seg_len})")
    X, w, nfft = _segment_spectra(x, seg_len, overlap_frac, taper, fft_len)
    p = (np.abs(X) ** 2).mean(axis=0) / (fs * np.sum(w ** 2))
    p[1:] *= 2.0
    if nfft % 2 == 0:
        p[-1] /= 2.0
    freqs = np.fft.rfftfreq(nfft, d=1.0 / fs)
    return PSDEstimate(freqs, p, fs / nfft, X.shape[0])


def band_power(psd, band):
    """Trapezoidal integral of the density over ``[lo, hi]``.

    The density is linearly interpolated at the band edges, so adjacent
    bands add up exactly to their union.
    """
    f = psd.freqs_hz
    if band.lo_hz < f[0] or band.hi_hz > f[-1] + 1e-12:
        raise DataError(f"band [{band.lo_hz}, {band.hi_hz}] Hz outside PSD support [{f[0]}, {f[-1]}]")
    inner = f[(f > band.lo_hz) & (f < band.hi_hz)]
    xs = np.concatenate([[band.lo_hz], inner, [band.hi_hz]])
    ys = np.interp(xs, f, psd.density)
    return float(trapezoid(ys, xs))


def estimate_bispectrum(series, seg_len=128, overlap_frac=0.5, taper="hann", fft_len=512,
                        max_freq_hz=0.5):
    """Direct bispectrum estimate averaged over segments.

    ``B(f1, f2) = mean_k X_k(f1) X_k(f2) conj(X_k(f1 + f2))`` with each
    segment's spectrum normalized by the taper sum. The lattice runs from 0
    to the first bin at or above ``max_freq_hz`` on both axes and is made
    symmetric exactly.
    """
    x = np.asarray(series.values, dtype=float)
    fs = float(series.sample_rate_hz)
    if x.size < 2 * seg_len:
        raise DataError(f"bispectrum needs >= {2 * seg_len} samples, got {x.size}")
    X, w, nfft = _segment_spectra(x, seg_len, overlap_frac, taper, fft_len)
    if X.shape[0] < 4:
        raise DataError(f"bispectrum needs >= 4 segments, got {X.shape[0]}")
    X = X / w.sum()
    res = fs / nfft
    m = int(np.ceil(max_freq_hz / res - 1e-9)) + 1
    if 2 * (m - 1) > nfft // 2:
        raise DataError("max_freq_hz too high: f1 + f2 exceeds the Nyquist frequency")
    idx = np.arange(m)
    triple = X[:, idx, None] * X[:, None, idx] * np.conj(X[:, idx[:, None] + idx[None, :]])
    B = triple.mean(axis=0)
    B = 0.5 * (B + B.T)
    return BispectrumGrid(idx * res, B, X.shape[0])


def _entropy(p):
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def region_mask(freqs_hz, region):
    """Index ranges of the lattice points lying inside ``region``."""
    rows = np.flatnonzero(region.f1_band.contains(freqs_hz))
    cols = np.flatnonzero(region.f2_band.contains(freqs_hz))
    return rows, cols


def region_stats(grid, region):
    """Magnitude statistics of the bispectrum over one region.

    Lattice indices (not frequencies) enter the weighted centers. Magnitudes
    are clamped to ``EPS`` only inside logarithms of magnitudes; entropies use
    the ``0 ln 0 = 0`` convention.
    """
    rows, cols = region_mask(grid.freqs_hz, region)
    if rows.size == 0 or cols.size == 0:
        raise DataError(f"bispectrum region {region.kind} contains no lattice points")
    b = np.abs(grid.values[np.ix_(rows, cols)])
    n = b.size
    total = b.sum()
    if total == 0:
        logger.warning("bispectrum region %s is all zero; entropies set to 0", region.kind)
        e_nb = e_snb = 0.0
        wcob_i = float(rows.mean())
        wcob_j = float(cols.mean())
    else:
        e_nb = _entropy((b / total).ravel())
        sq = b ** 2
        e_snb = _entropy((sq / sq.sum()).ravel())
        wcob_i = float(np.sum(rows[:, None] * b) / total)
        wcob_j = float(np.sum(cols[None, :] * b) / total)
    diag = np.intersect1d(rows, cols)
    l_dm = float(np.sum(np.log(np.maximum(np.abs(grid.values[diag, diag]), EPS))))
    return RegionStats(
        m_avg=float(total / n),
        p_avg=float(np.sum(b ** 2) / n),
        e_nb=e_nb,
        e_snb=e_snb,
        l_m=float(np.sum(np.log(np.maximum(b, EPS)))),
        l_dm=l_dm,
        wcob_i=wcob_i,
        wcob_j=wcob_j,
    )
