from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ..exceptions import DegenerateSpectrum, SchemaMismatch
from .schema import SENSORS, FeatureSchema, build_schema
from .transforms import (
    SAMPLING_RATE_HZ,
    StftParams,
    amplitude,
    mean,
    periodogram,
    shannon_entropy,
    spectral_centroid,
    spectral_skewness,
    std_dev,
    stft,
    wavelet_packet_energies,
)


@dataclass(frozen=True)
class FeatureParams:
    stft: StftParams = StftParams()
    entropy_bins: int = 16
    wavelet_levels: int = 3
    wavelet: str = "haar"
    fs: float = SAMPLING_RATE_HZ
    band: tuple | None = None  # Hz; None = DC excluded, up to Nyquist

    def schema(self, window_size):
        return build_schema(
            self.stft.n_frames(window_size), self.stft.n_bins, self.wavelet_levels
        )


@dataclass
class FeatureVector:
    values: np.ndarray
    schema: FeatureSchema
    experiment_id: str = ""
    label: int = 0
    flags: list = field(default_factory=list)


def axis_features(series, params=FeatureParams()):
    """Feature block for one axis of one sensor.

    Returns ``(values, skewness_was_degenerate)``.  A zero spectral spread
    makes skewness undefined; it is reported as 0 and flagged.
    """
    series = np.asarray(series, dtype=np.float64)
    spec = periodogram(series, params.fs)
    try:
        skew = spectral_skewness(spec, params.band)
        degenerate = False
    except DegenerateSpectrum:
        skew, degenerate = 0.0, True
    values = np.concatenate(
        [
            [
                amplitude(series),
                mean(series),
                std_dev(series),
                shannon_entropy(series, params.entropy_bins),
            ],
            stft(series, params.stft).ravel(),
            wavelet_packet_energies(series, params.wavelet_levels, params.wavelet),
            [spectral_centroid(spec, params.band), skew],
        ]
    )
    return values, degenerate


def extract_window_features(central, outer, params=FeatureParams()):
    """Concatenate the per-axis blocks, Central sensor first, axes X, Y, Z."""
    if central.experiment_id != outer.experiment_id:
        raise ValueError("windows come from different experiments")
    blocks, flags = [], []
    for sensor_name, window in zip(SENSORS, (central, outer)):
        for axis_name, series in zip("XYZ", (window.x_series, window.y_series, window.z_series)):
            values, degenerate = axis_features(series, params)
            blocks.append(values)
            if degenerate:
                flags.append(f"{sensor_name.lower()}_{axis_name.lower()}_skewness")
    schema = params.schema(len(central.x_series))
    values = np.concatenate(blocks)
    if values.size != len(schema):
        raise SchemaMismatch(f"vector length {values.size} != schema length {len(schema)}")
    return FeatureVector(values, schema, central.experiment_id, central.label, flags)


class WindowFeatureExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer: window pairs -> feature matrix.

    ``X`` is an array of shape (n_pairs, 2, 3, W) ordered sensor (Central,
    Outer), axis (X, Y, Z), sample.
    """

    def __init__(self, segment_length=128, hop=64, window_fn="hann", entropy_bins=16,
                 wavelet_levels=3, wavelet="haar", fs=SAMPLING_RATE_HZ, band=None):
        self.segment_length = segment_length
        self.hop = hop
        self.window_fn = window_fn
        self.entropy_bins = entropy_bins
        self.wavelet_levels = wavelet_levels
        self.wavelet = wavelet
        self.fs = fs
        self.band = band

    @property
    def params(self):
        return FeatureParams(
            stft=StftParams(self.segment_length, self.hop, self.window_fn),
            entropy_bins=self.entropy_bins,
            wavelet_levels=self.wavelet_levels,
            wavelet=self.wavelet,
            fs=self.fs,
            band=None if self.band is None else tuple(self.band),
        )

    def fit(self, X, y=None):
        X = self._check(X)
        self.window_size_ = X.shape[-1]
        self.schema_ = self.params.schema(self.window_size_)
        self.n_features_out_ = len(self.schema_)
        return self

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 4 or X.shape[1:3] != (2, 3):
            raise ValueError(f"expected windows of shape (n, 2, 3, W), got {X.shape}")
        return X

    def transform(self, X):
        X = self._check(X)
        params = self.params
        out = np.empty((X.shape[0], len(params.schema(X.shape[-1]))))
        self.n_degenerate_ = 0
        for i, pair in enumerate(X):
            row = []
            for sensor in pair:
                for series in sensor:
                    values, degenerate = axis_features(series, params)
                    row.append(values)
                    self.n_degenerate_ += degenerate
            out[i] = np.concatenate(row)
        return out

    def get_feature_names_out(self, input_features=None):
        return np.asarray(self.schema_.names, dtype=object)


def write_feature_csv(path, matrix, schema, experiment_ids, labels):
    """Header = schema names + ``experiment_id,label``; values in repr form."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([*schema.names, "experiment_id", "label"])
        for row, eid, lab in zip(matrix, experiment_ids, labels):
            writer.writerow([*map(repr, row.tolist()), eid, int(lab)])


def read_feature_csv(path):
    """Returns ``(matrix, names, experiment_ids, labels)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[-2:] != ["experiment_id", "label"]:
            raise SchemaMismatch("feature CSV must end with experiment_id,label columns")
        rows = list(reader)
    names = header[:-2]
    matrix = np.array([[float(v) for v in r[:-2]] for r in rows], dtype=np.float64).reshape(
        len(rows), len(names)
    )
    ids = np.array([r[-2] for r in rows], dtype=object)
    labels = np.array([int(r[-1]) for r in rows], dtype=int)
    return matrix, names, ids, labels
