import numpy as np
import pytest

from drivestress.records import BeatAnnotations, DriveRecord, WaveformChannel


def make_record(duration_s, record_id="r0", rr_s=0.8, fs=16.0, resp_hz=0.25, gsr=None):
    """Regular beats plus sinusoidal breathing over ``duration_s``."""
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    beats = np.arange(0.0, duration_s + 1e-9, rr_s)
    gsr_samples = np.full(n, 5.0) if gsr is None else np.asarray(gsr, dtype=float)
    return DriveRecord(
        record_id,
        WaveformChannel("resp", fs, np.sin(2 * np.pi * resp_hz * t)),
        WaveformChannel("gsr", fs, gsr_samples),
        beats=BeatAnnotations(beats),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (title, passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[n]
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        terminalreporter.write_line(f"[{status}] {n:2d}. {title}: {detail}")
