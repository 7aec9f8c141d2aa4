"""From beat times to clean NN intervals, heart rate and a uniform tachogram."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import DataError

logger = logging.getLogger(__name__)

RRI_MIN_MS = 200.0
RRI_MAX_MS = 4000.0


@dataclass(frozen=True)
class RRISeries:
    """Beat-to-beat intervals; ``t_ms[i]`` is the time of the beat closing interval ``i``."""

    t_ms: np.ndarray
    rri_ms: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t_ms, dtype=float)
        r = np.asarray(self.rri_ms, dtype=float)
        if t.shape != r.shape or t.ndim != 1:
            raise DataError("t_ms and rri_ms must be 1-D sequences of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise DataError("interval timestamps must be strictly increasing")
        object.__setattr__(self, "t_ms", t)
        object.__setattr__(self, "rri_ms", r)

    def __len__(self):
        return self.rri_ms.size

    def between(self, start_ms, end_ms):
        """Intervals whose closing beat falls in ``[start_ms, end_ms)``."""
        keep = (self.t_ms >= start_ms) & (self.t_ms < end_ms)
        return type(self)(self.t_ms[keep], self.rri_ms[keep])


class NNSeries(RRISeries):
    """Normal-to-normal intervals: an RRISeries after ectopic removal."""

    @property
    def nn_ms(self):
        return self.rri_ms


@dataclass(frozen=True)
class UniformSeries:
    sample_rate_hz: float
    values: np.ndarray
    start_time_ms: float = 0.0

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise DataError("sample_rate_hz must be positive")
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise DataError("uniform series contains non-finite values")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def times_ms(self):
        return self.start_time_ms + 1000.0 * np.arange(self.values.size) / self.sample_rate_hz


@dataclass(frozen=True)
class IHRSeries:
    t_ms: np.ndarray
    ihr_bpm: np.ndarray


def rri_from_beats(beat_times_s):
    """Successive beat differences in ms, with out-of-bounds intervals dropped.

    Intervals outside (200, 4000) ms are treated as sensor glitches and
    removed with a warning rather than raising.
    """
    beats = np.asarray(beat_times_s, dtype=float)
    if beats.ndim != 1 or beats.size < 2:
        raise DataError("at least 2 beat times are required to derive R-R intervals")
    rri = 1000.0 * np.diff(beats)
    t = 1000.0 * beats[1:]
    ok = (rri > RRI_MIN_MS) & (rri < RRI_MAX_MS)
    n_bad = int(np.count_nonzero(~ok))
    if n_bad:
        logger.warning("removed %d R-R intervals outside (%g, %g) ms", n_bad, RRI_MIN_MS, RRI_MAX_MS)
    if not np.any(ok):
        logger.warning("no physiologic R-R intervals left")
    return RRISeries(t[ok], rri[ok])


def running_median(x, half_width):
    """Centered running median with truncated neighborhoods at the edges."""
    x = np.asarray(x, dtype=float)
    n = x.size
    out = np.empty(n)
    for i in range(n):
        out[i] = np.median(x[max(0, i - half_width): i + half_width + 1])
    return out


def remove_ectopic(rri, half_width=2, rel_tol=0.2):
    """Drop intervals deviating from their local median by more than ``rel_tol``.

    The median is taken over ``rri[i-half_width : i+half_width+1]`` of the
    *input* series (not iterated). Removed beats are not replaced.
    """
    if half_width < 1:
        raise DataError("half_width must be >= 1")
    if not 0 < rel_tol < 1:
        raise DataError("rel_tol must lie in (0, 1)")
    if len(rri) == 0:
        raise DataError("cannot filter an empty interval series")
    med = running_median(rri.rri_ms, half_width)
    keep = np.abs(rri.rri_ms - med) <= rel_tol * med
    return NNSeries(rri.t_ms[keep], rri.rri_ms[keep])


def ihr_from_nn(nn):
    """Instantaneous heart rate in bpm, ``60000 / NN``."""
    if len(nn) == 0:
        raise DataError("empty NN series")
    return IHRSeries(nn.t_ms.copy(), 60000.0 / nn.rri_ms)


def resample_nn(nn, rate_hz=4.0):
    """Cubic-spline tachogram on a uniform grid over ``[t_ms[0], t_ms[-1]]``.

    The mean is left in; spectral estimators remove it themselves.
    """
    if len(nn) < 4:
        raise DataError("cubic-spline resampling needs at least 4 intervals")
    if not rate_hz > 0:
        raise DataError("rate_hz must be positive")
    t = nn.t_ms
    step_ms = 1000.0 / rate_hz
    n = int(np.floor((t[-1] - t[0]) / step_ms + 1e-9)) + 1
    grid = t[0] + step_ms * np.arange(n)
    values = CubicSpline(t, nn.rri_ms)(grid)
    return UniformSeries(rate_hz, values, float(t[0]))
