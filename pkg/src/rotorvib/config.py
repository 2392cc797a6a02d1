"""Run configuration: one JSON document, overridable by command-line flags.

Keys are flat.  Unknown keys and ill-typed values are rejected before any
work starts.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .exceptions import ConfigInvalid
from .features.extractor import FeatureParams
from .features.schema import Family
from .features.transforms import StftParams
from .synth import SnrConfig

ALGORITHMS = ("dt", "rf", "knn", "svm")
STUDIES = ("pca-scenarios", "pca-sweep", "isolation", "importance")


@dataclass
class RunConfig:
    # paths
    out_dir: str = "out"
    manifest: str | None = None
    features: str | None = None
    model: str | None = None
    reports: str | None = None
    format: str = "json"
    seed: int = 0
    n_workers: int = 1
    # synthetic corpus
    duration_s: float = 60.0
    noise_scale: float = 1.0
    harmonic_scale: float = 1.0
    defect_scale: float = 1.0
    # features
    segment_length: int = 128
    hop: int = 64
    window_fn: str = "hann"
    entropy_bins: int = 16
    wavelet_levels: int = 3
    wavelet: str = "haar"
    band: list | None = None
    # split
    train_fraction: float = 0.7
    split_mode: str = "window"
    # transform and model
    family: str | None = None
    pca_components: int | None = None
    pca_family: str | None = None
    algorithm: str = "rf"
    hyperparameters: dict = field(default_factory=dict)
    # studies
    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    pca_ks: list = field(default_factory=lambda: [10, 15, 20])
    sweep_min: int = 2
    sweep_max: int = 30
    sweep_algorithm: str = "dt"
    sweep_family: str = "STFT"
    isolation_families: list = field(default_factory=lambda: ["STFT", "Wavelet", "TimeDomain"])
    top_k: int = 10

    def validate(self):
        _check(self.format in ("json", "csv"), "format must be json or csv")
        _check(isinstance(self.seed, int) and self.seed >= 0, "seed must be a non-negative integer")
        _check(self.n_workers >= 1, "n_workers must be >= 1")
        _check(self.duration_s > 0, "duration_s must be positive")
        for key in ("noise_scale", "harmonic_scale", "defect_scale"):
            _check(getattr(self, key) >= 0, f"{key} must be >= 0")
        _check(self.segment_length >= 2 and self.hop >= 1, "segment_length >= 2 and hop >= 1 required")
        _check(self.window_fn == "hann", "window_fn must be hann")
        _check(self.entropy_bins >= 1, "entropy_bins must be >= 1")
        _check(self.wavelet_levels >= 1, "wavelet_levels must be >= 1")
        _check(self.wavelet in ("haar", "db2"), "wavelet must be haar or db2")
        if self.band is not None:
            _check(len(self.band) == 2 and self.band[0] <= self.band[1], "band must be [lo, hi]")
        _check(0 < self.train_fraction < 1, "train_fraction must be in (0, 1)")
        _check(self.split_mode in ("window", "experiment"), "split_mode must be window or experiment")
        _check(self.pca_components is None or self.pca_components >= 1, "pca_components must be >= 1")
        _check(self.algorithm in ALGORITHMS, f"algorithm must be one of {ALGORITHMS}")
        _check(all(a in ALGORITHMS for a in self.algorithms), f"algorithms must be drawn from {ALGORITHMS}")
        _check(self.sweep_algorithm in ALGORITHMS, f"sweep_algorithm must be one of {ALGORITHMS}")
        _check(bool(self.pca_ks) and all(k >= 1 for k in self.pca_ks), "pca_ks must be positive")
        _check(1 <= self.sweep_min <= self.sweep_max, "need 1 <= sweep_min <= sweep_max")
        _check(self.top_k >= 1, "top_k must be >= 1")
        _check(isinstance(self.hyperparameters, dict), "hyperparameters must be an object")
        for alg, params in self.hyperparameters.items():
            _check(alg in ALGORITHMS and isinstance(params, dict),
                   "hyperparameters maps an algorithm name to an object")
        for fam in [self.family, self.pca_family, self.sweep_family, *self.isolation_families]:
            if fam not in (None, "all"):
                try:
                    Family.parse(fam)
                except ValueError as exc:
                    raise ConfigInvalid(str(exc)) from None
        return self

    # derived objects
    def feature_params(self):
        return FeatureParams(
            stft=StftParams(self.segment_length, self.hop, self.window_fn),
            entropy_bins=self.entropy_bins,
            wavelet_levels=self.wavelet_levels,
            wavelet=self.wavelet,
            band=tuple(self.band) if self.band is not None else None,
        )

    def snr(self):
        return SnrConfig(self.noise_scale, self.harmonic_scale, self.defect_scale)

    def model_params(self, algorithm=None):
        return dict(self.hyperparameters.get(algorithm or self.algorithm, {}))

    def path(self, name, default):
        value = getattr(self, name)
        return Path(value) if value else Path(self.out_dir) / default

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, overrides):
        """Apply non-``None`` overrides, then validate."""
        return from_dict({**self.to_dict(), **{k: v for k, v in overrides.items() if v is not None}})


def _check(ok, message):
    if not ok:
        raise ConfigInvalid(message)


_TYPES = {
    int: (int,),
    float: (int, float),
    str: (str,),
    bool: (bool,),
}


def _expected(f):
    t = f.type if isinstance(f.type, str) else f.type.__name__
    base = t.split("|")[0].strip()
    return {"int": int, "float": float, "str": str, "list": list, "dict": dict}.get(base), "None" in t


def from_dict(d):
    if not isinstance(d, dict):
        raise ConfigInvalid("config must be a JSON object")
    known = {f.name: f for f in fields(RunConfig)}
    unknown = sorted(set(d) - set(known))
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {', '.join(unknown)}")
    for key, value in d.items():
        typ, nullable = _expected(known[key])
        if value is None:
            _check(nullable, f"{key} may not be null")
            continue
        if typ in (int, float) and isinstance(value, bool):
            raise ConfigInvalid(f"{key} must be a number")
        ok = isinstance(value, _TYPES.get(typ, (typ,))) if typ else True
        _check(ok, f"{key} must be of type {typ.__name__}")
    cfg = replace(RunConfig(), **d)
    return cfg.validate()


def load_config(path=None):
    if path is None:
        return RunConfig().validate()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc.strerror}") from None
    try:
        return from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config {path} is not valid JSON: {exc.msg} at line {exc.lineno}") from None
