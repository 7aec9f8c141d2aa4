"""Run configuration: a TOML file of sections, validated against known keys."""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from . import __version__
from .exceptions import ConfigError
from .features import FeatureConfig
from .svm import SvmHyper

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass
class WindowSection:
    len_s: float = 100.0
    step_s: float = 50.0


@dataclass
class PreprocessSection:
    median_halfwidth: int = 2
    rel_tol: float = 0.2
    resample_hz: float = 4.0


@dataclass
class SpectralSection:
    seg_len: int = 256
    overlap: float = 0.5
    taper: str = "hann"
    fft_len: int = 512
    bis_seg_len: int = 128
    resp_seg_s: float = 60.0


@dataclass
class FeaturesSection:
    subwin_s: float = 30.0
    ac_lags: int = 10
    entropy_order: float = 2.0


@dataclass
class LabelingSection:
    std_kind: str = "population"
    per_record: bool = True


@dataclass
class MrmrSection:
    bins: int = 8
    variant: str = "MID"
    global_k: int = 20


@dataclass
class SvmSection:
    c: float = 4.0
    scale: float = 0.5
    tol: float = 1e-3
    seed: int = 0
    grid_search: bool = False


@dataclass
class SplitSection:
    policy: str = "alternate"


@dataclass
class CvSection:
    level: str = "record"
    averaging: str = "pooled"


@dataclass
class RunConfig:
    data_dir: str = "data"
    output_dir: str = "out"
    window: WindowSection = field(default_factory=WindowSection)
    preprocess: PreprocessSection = field(default_factory=PreprocessSection)
    spectral: SpectralSection = field(default_factory=SpectralSection)
    features: FeaturesSection = field(default_factory=FeaturesSection)
    labeling: LabelingSection = field(default_factory=LabelingSection)
    mrmr: MrmrSection = field(default_factory=MrmrSection)
    svm: SvmSection = field(default_factory=SvmSection)
    split: SplitSection = field(default_factory=SplitSection)
    cv: CvSection = field(default_factory=CvSection)

    def to_dict(self):
        return dataclasses.asdict(self)

    def hash(self):
        """Stable digest of every setting except where outputs are written."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def feature_config(self):
        return FeatureConfig(
            resample_hz=self.preprocess.resample_hz,
            seg_len=self.spectral.seg_len,
            overlap=self.spectral.overlap,
            taper=self.spectral.taper,
            fft_len=self.spectral.fft_len,
            bis_seg_len=self.spectral.bis_seg_len,
            resp_seg_s=self.spectral.resp_seg_s,
            subwin_s=self.features.subwin_s,
            ac_lags=self.features.ac_lags,
            entropy_order=self.features.entropy_order,
        )

    def hyper(self):
        return SvmHyper(c=self.svm.c, kernel_scale=self.svm.scale, tol=self.svm.tol)

    def cv_options(self):
        return {"level": self.cv.level, "averaging": self.cv.averaging}

    def stamp(self):
        return {"artifact_version": __version__, "config_hash": self.hash()}


_CHOICES = {
    ("spectral", "taper"): {"hann", "hamming", "blackman", "boxcar"},
    ("labeling", "std_kind"): {"population", "sample"},
    ("mrmr", "variant"): {"MID", "MIQ"},
    ("split", "policy"): {"alternate", "halves"},
    ("cv", "level"): {"record", "window"},
    ("cv", "averaging"): {"pooled", "per_fold"},
}

_RANGES = {
    ("window", "len_s"): lambda v: v >= 60,
    ("window", "step_s"): lambda v: v > 0,
    ("preprocess", "median_halfwidth"): lambda v: v >= 1,
    ("preprocess", "rel_tol"): lambda v: 0 < v < 1,
    ("preprocess", "resample_hz"): lambda v: v >= 1,
    ("spectral", "seg_len"): lambda v: v >= 16,
    ("spectral", "overlap"): lambda v: 0 <= v < 1,
    ("spectral", "fft_len"): lambda v: v >= 16,
    ("spectral", "bis_seg_len"): lambda v: v >= 16,
    ("spectral", "resp_seg_s"): lambda v: v >= 10,
    ("features", "subwin_s"): lambda v: v > 0,
    ("features", "ac_lags"): lambda v: v >= 1,
    ("features", "entropy_order"): lambda v: v > 0,
    ("mrmr", "bins"): lambda v: v >= 2,
    ("mrmr", "global_k"): lambda v: v >= 1,
    ("svm", "c"): lambda v: v > 0,
    ("svm", "scale"): lambda v: v > 0,
    ("svm", "tol"): lambda v: v > 0,
}


def _coerce(value, default, key):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
    elif isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                pass
    elif isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
    elif isinstance(default, str):
        if isinstance(value, str):
            return value
    raise ConfigError(f"invalid value {value!r} for config key '{key}'")


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        else:
            yield key, v


def apply_settings(cfg, settings):
    """Apply ``{"section.key": value}`` pairs, rejecting unknown keys."""
    for key, value in settings.items():
        parts = key.split(".")
        if len(parts) == 1 and parts[0] in ("data_dir", "output_dir"):
            setattr(cfg, parts[0], str(value))
            continue
        if len(parts) != 2 or not hasattr(cfg, parts[0]) or parts[0] in ("data_dir", "output_dir"):
            raise ConfigError(f"unknown config key '{key}'")
        section = getattr(cfg, parts[0])
        names = {f.name for f in dataclasses.fields(section)}
        if parts[1] not in names:
            raise ConfigError(f"unknown config key '{key}'")
        setattr(section, parts[1], _coerce(value, getattr(section, parts[1]), key))
    validate(cfg)
    return cfg


def validate(cfg):
    for (sec, name), ok in _RANGES.items():
        v = getattr(getattr(cfg, sec), name)
        if not ok(v):
            raise ConfigError(f"config value {sec}.{name} = {v!r} out of range")
    for (sec, name), allowed in _CHOICES.items():
        v = getattr(getattr(cfg, sec), name)
        if v not in allowed:
            raise ConfigError(f"config value {sec}.{name} = {v!r} not one of {sorted(allowed)}")


def load_config(path=None, overrides=None):
    """Defaults, then the TOML file at ``path``, then ``key=value`` overrides."""
    cfg = RunConfig()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config file: {exc}") from None
        apply_settings(cfg, dict(_flatten(raw)))
    if overrides:
        apply_settings(cfg, dict(overrides))
    validate(cfg)
    return cfg
