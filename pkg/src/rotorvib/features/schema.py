"""Column descriptors for the flat feature vector."""
from __future__ import annotations

import enum
import hashlib
import json
from collections import Counter
from dataclasses import dataclass

from ..exceptions import SchemaMismatch, UnknownFamily


class Family(str, enum.Enum):
    TIME_DOMAIN = "TimeDomain"
    STFT = "STFT"
    WAVELET = "Wavelet"
    SPECTRAL_CENTROID = "SpectralCentroid"
    FREQUENCY_SKEWNESS = "FrequencySkewness"
    # columns produced by a PCA projection; not a raw feature family
    PCA = "PCA"

    @property
    def short(self):
        return _SHORT[self]

    @classmethod
    def parse(cls, token):
        if isinstance(token, cls):
            return token
        key = str(token).strip().lower().replace("_", "").replace("-", "")
        for member in cls:
            if key in (member.value.lower(), _SHORT[member].lower()):
                return member
        aliases = {"time": cls.TIME_DOMAIN, "timebased": cls.TIME_DOMAIN, "wpt": cls.WAVELET}
        if key in aliases:
            return aliases[key]
        raise UnknownFamily(f"unknown feature family {token!r}")


_SHORT = {
    Family.TIME_DOMAIN: "TimeDomain",
    Family.STFT: "STFT",
    Family.WAVELET: "Wavelet",
    Family.SPECTRAL_CENTROID: "SC",
    Family.FREQUENCY_SKEWNESS: "FS",
    Family.PCA: "PCA",
}

SENSORS = ("Central", "Outer")
AXES = ("X", "Y", "Z")
TIME_DOMAIN_STATS = ("amplitude", "mean", "std", "entropy")


@dataclass(frozen=True)
class FeatureDescriptor:
    sensor: str | None
    axis: str | None
    family: Family
    index_within_family: int
    name: str

    def to_dict(self):
        return {
            "sensor": self.sensor,
            "axis": self.axis,
            "family": self.family.value,
            "index_within_family": self.index_within_family,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["sensor"], d["axis"], Family(d["family"]), int(d["index_within_family"]), d["name"])


class FeatureSchema:
    """Ordered, name-unique list of :class:`FeatureDescriptor`."""

    def __init__(self, descriptors):
        self.descriptors = tuple(descriptors)
        names = [d.name for d in self.descriptors]
        dupes = [n for n, c in Counter(names).items() if c > 1]
        if dupes:
            raise ValueError(f"duplicate feature names: {dupes[:5]}")
        self._index = {n: i for i, n in enumerate(names)}

    def __len__(self):
        return len(self.descriptors)

    def __iter__(self):
        return iter(self.descriptors)

    def __getitem__(self, i):
        return self.descriptors[i]

    def __eq__(self, other):
        return isinstance(other, FeatureSchema) and self.descriptors == other.descriptors

    def __hash__(self):
        return hash(self.descriptors)

    @property
    def names(self):
        return [d.name for d in self.descriptors]

    def index_of(self, name):
        return self._index[name]

    def families(self):
        return {d.family for d in self.descriptors}

    def mask(self, family):
        family = Family.parse(family)
        return [d.family is family for d in self.descriptors]

    def indices(self, family):
        family = Family.parse(family)
        if family not in self.families():
            raise UnknownFamily(f"family {family.value} not present in schema")
        return [i for i, d in enumerate(self.descriptors) if d.family is family]

    def subset(self, indices):
        return FeatureSchema(self.descriptors[i] for i in indices)

    def fingerprint(self):
        h = hashlib.sha256("\n".join(self.names).encode("utf-8"))
        return h.hexdigest()[:16]

    def check(self, fingerprint):
        if fingerprint != self.fingerprint():
            raise SchemaMismatch(
                f"schema fingerprint {fingerprint} does not match {self.fingerprint()}"
            )

    def counts(self):
        """Column count per family."""
        return Counter(d.family for d in self.descriptors)

    def to_json(self):
        return json.dumps([d.to_dict() for d in self.descriptors], indent=1)

    @classmethod
    def from_json(cls, text):
        return cls(FeatureDescriptor.from_dict(d) for d in json.loads(text))

    @classmethod
    def generic(cls, n_features, prefix="f"):
        """Schema for a bare matrix with no known provenance."""
        return cls(
            FeatureDescriptor(None, None, Family.TIME_DOMAIN, i, f"{prefix}{i}")
            for i in range(n_features)
        )


def axis_descriptors(sensor, axis, n_frames, n_bins, n_wavelet):
    s, a = sensor.lower(), axis.lower()
    out = [
        FeatureDescriptor(sensor, axis, Family.TIME_DOMAIN, i, f"{s}_{a}_{stat}")
        for i, stat in enumerate(TIME_DOMAIN_STATS)
    ]
    out += [
        FeatureDescriptor(
            sensor, axis, Family.STFT, m * n_bins + k, f"{s}_{a}_stft_t{m:02d}_f{k:03d}"
        )
        for m in range(n_frames)
        for k in range(n_bins)
    ]
    out += [
        FeatureDescriptor(sensor, axis, Family.WAVELET, j, f"{s}_{a}_wpt{j:02d}")
        for j in range(n_wavelet)
    ]
    out.append(FeatureDescriptor(sensor, axis, Family.SPECTRAL_CENTROID, 0, f"{s}_{a}_centroid"))
    out.append(FeatureDescriptor(sensor, axis, Family.FREQUENCY_SKEWNESS, 0, f"{s}_{a}_skewness"))
    return out


def build_schema(n_frames, n_bins, wavelet_levels=3):
    """Central-then-Outer, X-Y-Z, each axis laid out as
    time-domain(4) ++ STFT(frames*bins) ++ wavelet(2**levels) ++ centroid ++ skewness.
    """
    descriptors = []
    for sensor in SENSORS:
        for axis in AXES:
            descriptors += axis_descriptors(sensor, axis, n_frames, n_bins, 2 ** wavelet_levels)
    return FeatureSchema(descriptors)


def pca_schema(n_components, prefix="pc"):
    return [
        FeatureDescriptor(None, None, Family.PCA, i, f"{prefix}{i:03d}") for i in range(n_components)
    ]
