"""Synthetic fixtures so the whole pipeline runs without the public dataset."""

import numpy as np

from .evaluation import LabeledDataset
from .features import FEATURE_NAMES
from .preprocess import UniformSeries
from .records import BeatAnnotations, DriveRecord, WaveformChannel


def qpc_series(f1=0.10, f2=0.25, coupled=True, n_blocks=64, block_len=128, fs=4.0,
               noise=0.05, rng=None):
    """Three cosines at ``f1``, ``f2``, ``f1 + f2`` with fresh phases per block.

    With ``coupled`` the third phase is the sum of the first two, otherwise
    it is drawn independently. Blocks line up with non-overlapping
    estimator segments of ``block_len`` samples.
    """
    rng = np.random.default_rng(rng)
    t = np.arange(block_len) / fs
    blocks = []
    for _ in range(n_blocks):
        p1, p2, p3 = rng.uniform(0, 2 * np.pi, 3)
        if coupled:
            p3 = p1 + p2
        blocks.append(np.cos(2 * np.pi * f1 * t + p1) + np.cos(2 * np.pi * f2 * t + p2)
                      + np.cos(2 * np.pi * (f1 + f2) * t + p3))
    x = np.concatenate(blocks) + noise * rng.standard_normal(n_blocks * block_len)
    return UniformSeries(fs, x)


def tone_series(freq_hz, duration_s=400.0, fs=4.0, amplitude=1.0, phase=0.0, offset=0.0):
    t = np.arange(int(round(duration_s * fs))) / fs
    return UniformSeries(fs, offset + amplitude * np.sin(2 * np.pi * freq_hz * t + phase))


def gaussian_blobs(n_per_class=50, center=3.0, rng=None):
    """Two unit-variance 2-D blobs at ``+/-(center, center)``; labels +1/-1."""
    rng = np.random.default_rng(rng)
    pos = rng.standard_normal((n_per_class, 2)) + center
    neg = rng.standard_normal((n_per_class, 2)) - center
    X = np.vstack([pos, neg])
    y = np.r_[np.ones(n_per_class, int), -np.ones(n_per_class, int)]
    return X, y


def xor_clusters(n_per_cluster=25, spread=0.2, rng=None):
    """Four clusters at (+-1, +-1) labeled by the sign of x*y."""
    rng = np.random.default_rng(rng)
    centers = np.array([[1, 1], [-1, -1], [1, -1], [-1, 1]], dtype=float)
    labels = np.array([1, 1, -1, -1])
    X = np.vstack([c + spread * rng.standard_normal((n_per_cluster, 2)) for c in centers])
    y = np.repeat(labels, n_per_cluster)
    return X, y


DEFAULT_INFORMATIVE = (
    "t_hrv_tri", "f_psd_hf", "b_wcobi_ll", "b_esnb_hh", "b_lm_hh",
    "n_tsallis", "r_median", "r_max",
)


def informative_dataset(n_records=8, windows_per_record=30, informative=DEFAULT_INFORMATIVE,
                        separation=1.6, record_offset=0.3, rng=None):
    """76 canonically named features, of which ``informative`` carry the label.

    Each informative column is ``separation/2 * y`` plus unit noise; the other
    columns are noise. Every column also gets a per-record offset so records
    differ the way drives do.
    """
    rng = np.random.default_rng(rng)
    n = n_records * windows_per_record
    groups = np.repeat([f"rec{r:02d}" for r in range(n_records)], windows_per_record)
    y = np.where(rng.random(n) < 0.5, 1, -1)
    X = rng.standard_normal((n, len(FEATURE_NAMES)))
    X += np.repeat(record_offset * rng.standard_normal((n_records, len(FEATURE_NAMES))),
                   windows_per_record, axis=0)
    pos = {name: i for i, name in enumerate(FEATURE_NAMES)}
    for name in informative:
        X[:, pos[name]] += 0.5 * separation * y
    idx = np.tile(np.arange(windows_per_record), n_records)
    return LabeledDataset(X, FEATURE_NAMES, y, groups, idx)


def leak_dataset(n_records=6, windows_per_record=12, n_noise=3, rng=None):
    """Noise features plus one column that identifies the record.

    Each record is half Stress, half NoStress in two contiguous blocks (in
    random order), like a drive with a stress phase. The ``leak`` column is
    ``record index + position / windows_per_record``, so neighbouring windows
    of the same record sit next to each other and share their label. Only a
    split that sees the held-out record during training can exploit it.
    """
    rng = np.random.default_rng(rng)
    n = n_records * windows_per_record
    rec = np.repeat(np.arange(n_records), windows_per_record)
    pos = np.tile(np.arange(windows_per_record), n_records)
    half = windows_per_record // 2
    first = np.where(rng.random(n_records) < 0.5, 1, -1)[rec]
    y = np.where(pos < half, first, -first)
    noise = rng.standard_normal((n, n_noise))
    leak = rec + pos / windows_per_record
    X = np.column_stack([noise, leak])
    names = tuple(f"noise{i}" for i in range(n_noise)) + ("leak",)
    groups = np.array([f"rec{r:02d}" for r in rec])
    return LabeledDataset(X, names, y, groups, pos, {n_: "other" for n_ in names})


# -- stress-correlated drive records ---------------------------------------

# (duration s, stress level) phases: rest, city, highway, city, highway, rest
DRIVE_PROTOCOL = ((150, 0.0), (150, 1.0), (150, 0.5), (150, 1.0), (150, 0.5), (150, 0.0))


def _stress_profile(t, protocol, smooth_s=10.0):
    edges = np.cumsum([0] + [d for d, _ in protocol])
    level = np.zeros_like(t)
    for (d, s), lo in zip(protocol, edges[:-1]):
        level[(t >= lo) & (t < lo + d)] = s
    level[t >= edges[-1]] = protocol[-1][1]
    k = max(1, int(smooth_s / (t[1] - t[0])))
    return np.convolve(np.pad(level, (k // 2, k - 1 - k // 2), mode="edge"), np.ones(k) / k, mode="valid")


def synthetic_drive(record_id, rng=None, protocol=DRIVE_PROTOCOL, fs=16.0, ectopic_every=180):
    """One drive whose heart, breathing and GSR respond to a stress schedule.

    Stress shortens R-R intervals and damps their respiratory and 0.1 Hz
    modulation, speeds up breathing, and raises skin conductance.
    """
    rng = np.random.default_rng(rng)
    duration = float(sum(d for d, _ in protocol))
    t = np.arange(int(duration * fs)) / fs
    stress = _stress_profile(t, protocol)

    base_rr = rng.uniform(820, 920)
    hr_gain = rng.uniform(150, 220)
    resp_f = 0.22 + 0.18 * stress + 0.01 * rng.standard_normal()
    resp_phase = 2 * np.pi * np.cumsum(resp_f) / fs
    resp_amp = 1.0 - 0.35 * stress
    resp = (rng.uniform(-0.2, 0.2) + resp_amp * np.sin(resp_phase)
            + 0.15 * np.sin(2 * np.pi * 1.3 * t + rng.uniform(0, 2 * np.pi)) * stress
            + 0.05 * rng.standard_normal(t.size))

    gsr_base = rng.uniform(3, 8)
    drift = 0.3 * np.sin(2 * np.pi * t / duration + rng.uniform(0, 2 * np.pi))
    gsr = gsr_base + rng.uniform(2.5, 4.0) * stress + drift + 0.1 * rng.standard_normal(t.size)

    lf_phase = rng.uniform(0, 2 * np.pi)
    beats = [rng.uniform(0.2, 0.8)]
    k = 0
    while True:
        tb = beats[-1]
        i = min(int(tb * fs), t.size - 1)
        s = stress[i]
        rr = (base_rr - hr_gain * s
              + 30.0 * (1 - 0.6 * s) * np.sin(resp_phase[i])
              + 25.0 * (1 - 0.5 * s) * np.sin(2 * np.pi * 0.1 * tb + lf_phase)
              + 8.0 * rng.standard_normal())
        k += 1
        if ectopic_every and k % ectopic_every == 0:
            beats.append(tb + 0.6 * rr / 1000.0)
            beats.append(beats[-1] + 1.4 * rr / 1000.0)
            continue
        nxt = tb + rr / 1000.0
        if nxt >= duration:
            break
        beats.append(nxt)
    beats = np.asarray(beats)
    return DriveRecord(
        record_id,
        WaveformChannel("resp", fs, resp),
        WaveformChannel("gsr", fs, gsr),
        beats=BeatAnnotations(beats[beats < duration]),
    )


def synthetic_drives(n_records=8, seed=0, **kwargs):
    seeds = np.random.SeedSequence(seed).spawn(n_records)
    return [synthetic_drive(f"drive{r:02d}", np.random.default_rng(s), **kwargs)
            for r, s in enumerate(seeds)]
