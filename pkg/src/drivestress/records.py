"""Loading per-drive channel files and cutting them into analysis windows.

A record directory holds::

    beats.csv   header ``t_s``            one beat time per row
    rri.csv     header ``t_ms,rri_ms``    (alternative to beats.csv)
    resp.csv    header ``t_s,value``      uniformly sampled respiration
    gsr.csv     header ``t_s,value``      uniformly sampled hand GSR
    record.toml optional overrides: record_id, beats/rri/resp/gsr file
                names, resp_rate_hz, gsr_rate_hz
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DataError
from .preprocess import NNSeries, RRISeries, remove_ectopic, rri_from_beats

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger(__name__)

MIN_RESP_RATE_HZ = 8.0
MIN_WINDOW_NN = 16
RATE_PROBE = 100
RATE_TOLERANCE = 0.01


@dataclass(frozen=True)
class WaveformChannel:
    name: str
    sample_rate_hz: float
    samples: np.ndarray
    start_time_s: float = 0.0

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise DataError(f"{self.name}: sample rate must be > 0, got {self.sample_rate_hz}")
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise DataError(f"{self.name}: no samples")
        object.__setattr__(self, "samples", s)

    @property
    def duration_s(self):
        return self.samples.size / self.sample_rate_hz

    @property
    def end_time_s(self):
        return self.start_time_s + self.duration_s

    @property
    def times_s(self):
        return self.start_time_s + np.arange(self.samples.size) / self.sample_rate_hz

    def slice(self, start_s, end_s):
        """Samples whose timestamps fall in ``[start_s, end_s)``."""
        i0 = max(0, int(np.ceil((start_s - self.start_time_s) * self.sample_rate_hz - 1e-9)))
        i1 = max(i0, int(np.ceil((end_s - self.start_time_s) * self.sample_rate_hz - 1e-9)))
        i1 = min(i1, self.samples.size)
        return WaveformChannel(
            self.name, self.sample_rate_hz, self.samples[i0:i1],
            self.start_time_s + i0 / self.sample_rate_hz,
        )


@dataclass(frozen=True)
class BeatAnnotations:
    beat_times_s: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.beat_times_s, dtype=float)
        if b.ndim != 1:
            raise DataError("beat times must be 1-D")
        if np.any(b < 0):
            raise DataError("beat times must be >= 0")
        if np.any(np.diff(b) <= 0):
            raise DataError("beat times are non-monotonic")
        object.__setattr__(self, "beat_times_s", b)


@dataclass(frozen=True)
class DriveRecord:
    record_id: str
    resp: WaveformChannel
    gsr: WaveformChannel
    beats: BeatAnnotations = None
    rri: RRISeries = None

    def __post_init__(self):
        if (self.beats is None) == (self.rri is None):
            raise DataError(f"{self.record_id}: exactly one of beats or rri must be given")
        if self.resp.sample_rate_hz < MIN_RESP_RATE_HZ:
            raise DataError(
                f"{self.record_id}: respiration sample rate below {MIN_RESP_RATE_HZ:g} Hz "
                f"({self.resp.sample_rate_hz:g} Hz)"
            )

    def rr_intervals(self):
        if self.rri is not None:
            return self.rri
        return rri_from_beats(self.beats.beat_times_s)

    def heart_span_s(self):
        if self.beats is not None:
            b = self.beats.beat_times_s
            return float(b[0]), float(b[-1])
        t = self.rri.t_ms / 1000.0
        return float(t[0] - self.rri.rri_ms[0] / 1000.0), float(t[-1])

    def common_span_s(self):
        """Time span covered by every channel."""
        h0, h1 = self.heart_span_s()
        start = max(h0, self.resp.start_time_s, self.gsr.start_time_s)
        end = min(h1, self.resp.end_time_s, self.gsr.end_time_s)
        return start, end


@dataclass(frozen=True)
class AnalysisWindow:
    record_id: str
    index: int
    start_s: float
    end_s: float
    nn: NNSeries
    resp_slice: WaveformChannel
    gsr_slice: WaveformChannel
    rejected_reason: str = field(default=None, compare=False)

    @property
    def rejected(self):
        return self.rejected_reason is not None


def _read_csv(path, columns):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}; header is {header}")
        idx = [header.index(c) for c in columns]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            try:
                rows.append([float(row[i]) for i in idx])
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: unparsable row {row!r}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: non-finite values")
    return arr


def infer_sample_rate(t_s, path="<channel>"):
    """Rate from the first timestamps; spacing must be constant to within 1%."""
    probe = np.asarray(t_s[:RATE_PROBE], dtype=float)
    if probe.size < 2:
        raise DataError(f"{path}: need at least 2 samples to infer the sample rate")
    d = np.diff(probe)
    mean_step = d.mean()
    if mean_step <= 0:
        raise DataError(f"{path}: sample rate must be > 0 (timestamps not increasing)")
    if np.any(np.abs(d - mean_step) > RATE_TOLERANCE * mean_step):
        raise DataError(f"{path}: sampling is not uniform to within 1%")
    return 1.0 / mean_step


def _load_waveform(path, name, rate_override=None):
    arr = _read_csv(path, ["t_s", "value"])
    rate = float(rate_override) if rate_override is not None else infer_sample_rate(arr[:, 0], path)
    return WaveformChannel(name, rate, arr[:, 1], float(arr[0, 0]))


def load_record(path, fmt="csv", record_id=None, min_overlap_s=60.0):
    """Load and validate one record directory into a :class:`DriveRecord`.

    All channels must overlap for at least ``min_overlap_s`` seconds (the
    shortest admissible window).
    """
    if fmt != "csv":
        raise DataError(f"unsupported record format {fmt!r}")
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"{path}: not a record directory")
    manifest = {}
    if (path / "record.toml").exists():
        with open(path / "record.toml", "rb") as fh:
            try:
                manifest = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise DataError(f"{path / 'record.toml'}: {exc}") from None
    rid = record_id or manifest.get("record_id") or path.name

    beats_file = path / manifest.get("beats_file", "beats.csv")
    rri_file = path / manifest.get("rri_file", "rri.csv")
    beats = rri = None
    if beats_file.exists():
        beats = BeatAnnotations(_read_csv(beats_file, ["t_s"])[:, 0])
        if beats.beat_times_s.size < 2:
            raise DataError(f"{beats_file}: at least 2 beats required")
    elif rri_file.exists():
        arr = _read_csv(rri_file, ["t_ms", "rri_ms"])
        rri = RRISeries(arr[:, 0], arr[:, 1])
    else:
        raise DataError(f"{path}: missing channel file beats.csv or rri.csv")

    channels = {}
    for name in ("resp", "gsr"):
        f = path / manifest.get(f"{name}_file", f"{name}.csv")
        if not f.exists():
            raise DataError(f"{path}: missing channel file {f.name}")
        channels[name] = _load_waveform(f, name, manifest.get(f"{name}_rate_hz"))

    record = DriveRecord(rid, channels["resp"], channels["gsr"], beats=beats, rri=rri)
    start, end = record.common_span_s()
    if end - start < min_overlap_s:
        raise DataError(f"{rid}: channels overlap for {max(end - start, 0):.1f} s (< {min_overlap_s:g} s)")
    return record


def load_records(data_dir):
    """All record directories under ``data_dir``, sorted by id."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"{data_dir}: data directory not found")
    dirs = sorted(p for p in data_dir.iterdir() if p.is_dir())
    if not dirs:
        raise DataError(f"{data_dir}: no record directories")
    records = [load_record(d) for d in dirs]
    return sorted(records, key=lambda r: r.record_id)


def write_record(path, record):
    """Write a record in the directory layout understood by :func:`load_record`."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if record.beats is not None:
        with open(path / "beats.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s"])
            w.writerows([[repr(float(t))] for t in record.beats.beat_times_s])
    else:
        with open(path / "rri.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_ms", "rri_ms"])
            w.writerows([[repr(float(t)), repr(float(r))] for t, r in zip(record.rri.t_ms, record.rri.rri_ms)])
    for ch in (record.resp, record.gsr):
        with open(path / f"{ch.name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "value"])
            w.writerows([[repr(float(t)), repr(float(v))] for t, v in zip(ch.times_s, ch.samples)])
    with open(path / "record.toml", "w") as fh:
        fh.write(f'record_id = "{record.record_id}"\n')
        fh.write(f"resp_rate_hz = {record.resp.sample_rate_hz!r}\n")
        fh.write(f"gsr_rate_hz = {record.gsr.sample_rate_hz!r}\n")


def segment_windows(record, window_len_s=100.0, step_s=50.0, *,
                    median_half_width=2, rel_tol=0.2, min_nn=MIN_WINDOW_NN):
    """Left-aligned fixed-length windows over the span shared by all channels.

    The NN series is derived once for the whole record (ectopic removal
    included) and then sliced, so filter edges do not depend on the window
    grid. Windows with fewer than ``min_nn`` intervals are kept but carry a
    ``rejected_reason``. The trailing partial window is dropped.
    """
    if step_s <= 0:
        raise DataError("step_s must be > 0")
    if window_len_s < 60:
        raise DataError("window_len_s must be >= 60 s")
    t0, t_end = record.common_span_s()
    duration = t_end - t0
    if duration < window_len_s:
        logger.warning("%s: record span %.1f s shorter than window %.1f s; no windows",
                       record.record_id, duration, window_len_s)
        return []
    count = int(np.floor((duration - window_len_s) / step_s + 1e-9)) + 1

    rri = record.rr_intervals()
    nn = remove_ectopic(rri, median_half_width, rel_tol) if len(rri) else NNSeries(rri.t_ms, rri.rri_ms)

    windows = []
    for k in range(count):
        start = t0 + k * step_s
        end = start + window_len_s
        nn_k = nn.between(1000.0 * start, 1000.0 * end)
        reason = None
        if len(nn_k) < min_nn:
            reason = f"window has {len(nn_k)} NN intervals (< {min_nn})"
        windows.append(AnalysisWindow(
            record.record_id, k, start, end, nn_k,
            record.resp.slice(start, end), record.gsr.slice(start, end), reason,
        ))
    return windows
