"""Seeded synthetic rotor vibration, written in the ingest CSV format.

A profile is a sum of rotation harmonics per axis plus Gaussian noise.  The
harmonic amplitudes drift slowly (throttle and airflow variation), which
makes raw signal energy a poor class cue; defects leave their main mark on
the spectral line structure:

* crack   - amplitude modulation at the rotation frequency (new sidebands)
* trim    - even harmonics above the blade-pass line scaled up
* scratch - raised noise floor plus short high-frequency bursts
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import ClippingProfile
from .ingest import (
    SAMPLING_RATE_HZ,
    SENSOR_RANGE_G,
    BladeCondition,
    ExperimentMeta,
    Sensor,
    write_manifest,
)

AXES = ("x", "y", "z")


class DefectKind(str, enum.Enum):
    NONE = "none"
    CRACK = "crack"
    TRIM = "trim"
    SCRATCH = "scratch"


CONDITION_DEFECT = {
    BladeCondition.NORMAL: DefectKind.NONE,
    BladeCondition.DEFECT_TYPE1: DefectKind.CRACK,
    BladeCondition.DEFECT_TYPE2: DefectKind.TRIM,
    BladeCondition.DEFECT_TYPE3: DefectKind.SCRATCH,
}


@dataclass(frozen=True)
class DefectModifier:
    kind: DefectKind = DefectKind.NONE
    # crack: modulation depth; trim: harmonic gain; scratch: noise inflation
    strength: float = 0.0
    burst_amplitude: float = 1.0  # g, scratch only
    burst_rate_hz: float = 3.0
    burst_freq_hz: float = 330.0
    burst_samples: int = 8


def _default_harmonics():
    # (harmonic index of the rotation frequency, amplitude in g).  A two-blade
    # rotor: strong lines at odd multiples of the blade-pass frequency
    # (indices 2, 6, 10), weak ones at its even multiples (4, 8, 12).
    shape = ((2, 0.50), (4, 0.030), (6, 0.30), (8, 0.025), (10, 0.20), (12, 0.020))
    scale = {"x": 1.0, "y": 0.6, "z": 0.3}
    return {axis: tuple((i, a * s) for i, a in shape) for axis, s in scale.items()}


def _trimmed(idx):
    """Even multiples of the blade-pass frequency."""
    return idx % 4 == 0


@dataclass(frozen=True)
class RotorProfile:
    rotation_hz: float = 18.75
    harmonics: dict = field(default_factory=_default_harmonics)
    noise_sigma: float = 0.03
    defect: DefectModifier = DefectModifier()
    outer_gain: float = 1.3  # Outer / Central amplitude ratio
    gravity: tuple = (0.0, 0.0, 1.0)
    common_drift_sigma: float = 0.05  # log-amplitude drift shared by all harmonics
    drift_sigma: float = 0.25  # extra log-amplitude drift of each harmonic
    drift_period_s: float = 1.0

    def validate(self):
        for axis in AXES:
            for idx, amp in self.harmonics.get(axis, ()):
                if amp < 0 or idx < 1:
                    raise ClippingProfile(f"bad harmonic ({idx}, {amp}) on {axis}")
        if self.noise_sigma < 0 or self.outer_gain < 0:
            raise ClippingProfile("noise sigma and outer gain must be non-negative")
        for axis_i, axis in enumerate(AXES):
            if self.peak_bound(axis_i) > SENSOR_RANGE_G:
                raise ClippingProfile(
                    f"{axis} axis can reach {self.peak_bound(axis_i):.2f} g > {SENSOR_RANGE_G} g"
                )

    def peak_bound(self, axis_i):
        """Worst-case |sample| (noise counted at 6 sigma, drift at 4 sigma)."""
        d = self.defect
        harm = sum(a for _, a in self.harmonics.get(AXES[axis_i], ()))
        if d.kind is DefectKind.CRACK:
            harm *= 1 + d.strength
        elif d.kind is DefectKind.TRIM:
            harm = sum(
                a * (d.strength if _trimmed(i) else 1.0)
                for i, a in self.harmonics.get(AXES[axis_i], ())
            )
        harm *= math.exp(4 * math.hypot(self.drift_sigma, self.common_drift_sigma))
        noise = self.noise_sigma * (d.strength if d.kind is DefectKind.SCRATCH else 1.0)
        burst = d.burst_amplitude if d.kind is DefectKind.SCRATCH else 0.0
        gain = max(1.0, self.outer_gain)
        return gain * (harm + 6 * noise + burst) + abs(self.gravity[axis_i])


@dataclass(frozen=True)
class SnrConfig:
    """Global knobs applied on top of every generated profile.

    ``harmonic_scale=0, defect_scale=0`` gives pure noise with no class
    signal at all, the anti-leakage sanity setting.
    """

    noise_scale: float = 1.0
    harmonic_scale: float = 1.0
    defect_scale: float = 1.0


DEFAULT_DEFECTS = {
    DefectKind.NONE: DefectModifier(),
    DefectKind.CRACK: DefectModifier(DefectKind.CRACK, 0.10),
    DefectKind.TRIM: DefectModifier(DefectKind.TRIM, 3.0),
    DefectKind.SCRATCH: DefectModifier(DefectKind.SCRATCH, 8.0),
}


def _drift(rng, n, fs, period_s, sigma, count):
    """Smooth log-normal gain processes, shape (count, n)."""
    if sigma == 0 or count == 0:
        return np.ones((count, n))
    step = max(1, int(round(period_s * fs)))
    knots = np.arange(0, n + step, step)
    vals = rng.normal(0.0, sigma, size=(count, knots.size))
    t = np.arange(n)
    return np.exp(np.stack([np.interp(t, knots, v) for v in vals]))


def synthesize(profile, duration_s=60.0, fs=SAMPLING_RATE_HZ, seed=0):
    """Return ``{Sensor: (n, 3) array}`` in g, before quantization.

    Amplitude drift is a property of the rotor, so one common process and
    one process per harmonic index are shared by every axis and sensor.
    """
    profile.validate()
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    d = profile.defect
    indices = sorted({i for axis in AXES for i, _ in profile.harmonics.get(axis, ())})
    common = _drift(rng, n, fs, profile.drift_period_s, profile.common_drift_sigma, 1)[0]
    per_harmonic = dict(
        zip(indices, _drift(rng, n, fs, profile.drift_period_s, profile.drift_sigma, len(indices)))
    )
    rot_phase = rng.uniform(0, 2 * np.pi)
    out = {}
    for sensor in (Sensor.CENTRAL, Sensor.OUTER):
        gain = 1.0 if sensor is Sensor.CENTRAL else profile.outer_gain
        data = np.empty((n, 3))
        for axis_i, axis in enumerate(AXES):
            sig = np.zeros(n)
            for idx, amp in profile.harmonics.get(axis, ()):
                if d.kind is DefectKind.TRIM and _trimmed(idx):
                    amp = amp * d.strength
                phase = rng.uniform(0, 2 * np.pi)
                sig += amp * per_harmonic[idx] * np.sin(2 * np.pi * idx * profile.rotation_hz * t + phase)
            sig *= common
            if d.kind is DefectKind.CRACK:
                sig *= 1.0 + d.strength * np.sin(2 * np.pi * profile.rotation_hz * t + rot_phase)
            sigma = profile.noise_sigma
            if d.kind is DefectKind.SCRATCH:
                sigma *= d.strength
                sig += _bursts(rng, n, fs, d)
            if sigma > 0:
                sig += rng.normal(0.0, sigma, n)
            data[:, axis_i] = gain * sig + profile.gravity[axis_i]
        out[sensor] = data
    return out


def _bursts(rng, n, fs, d):
    out = np.zeros(n)
    n_bursts = rng.poisson(d.burst_rate_hz * n / fs)
    if n_bursts == 0 or d.burst_amplitude == 0:
        return out
    starts = rng.integers(0, max(1, n - d.burst_samples), n_bursts)
    k = np.arange(d.burst_samples)
    shape = np.hanning(d.burst_samples + 2)[1:-1] * np.sin(2 * np.pi * d.burst_freq_hz * k / fs)
    for s, a in zip(starts, rng.uniform(0.6, 1.0, n_bursts)):
        out[s:s + d.burst_samples] += a * d.burst_amplitude * shape
    return out


def write_experiment_csv(path, streams, fs=SAMPLING_RATE_HZ, decimals=4):
    """Interleave Central/Outer rows by timestamp; fixed decimal precision."""
    central, outer = streams[Sensor.CENTRAL], streams[Sensor.OUTER]
    n = central.shape[0]
    ts = (np.arange(n) * (1_000_000 / fs)).round().astype(np.int64)
    fmt = f"{{}},{{}},{{:.{decimals}f}},{{:.{decimals}f}},{{:.{decimals}f}}\n"
    lines = ["sensor,timestamp,x,y,z\n"]
    c_rows, o_rows, t_list = central.tolist(), outer.tolist(), ts.tolist()
    for i in range(n):
        lines.append(fmt.format("Central", t_list[i], *c_rows[i]))
        lines.append(fmt.format("Outer", t_list[i], *o_rows[i]))
    Path(path).write_text("".join(lines), encoding="utf-8")


def generate_experiment(profile, path, duration_s=60.0, fs=SAMPLING_RATE_HZ, seed=0, decimals=4):
    """Synthesize one experiment and write it as ingest CSV."""
    streams = synthesize(profile, duration_s, fs, seed)
    lim = SENSOR_RANGE_G
    for s in streams.values():
        if np.abs(s).max() > lim:
            raise ClippingProfile("generated samples exceed the sensor range")
    write_experiment_csv(path, streams, fs, decimals)
    return streams


def paper_design():
    """(condition, blade instance, run) triples: 8 normal + 3 runs x 2 blades x 3 defects."""
    design = [(BladeCondition.NORMAL, None, r) for r in range(1, 9)]
    for cond in (BladeCondition.DEFECT_TYPE1, BladeCondition.DEFECT_TYPE2, BladeCondition.DEFECT_TYPE3):
        for blade in (1, 2):
            for run in range(1, 4):
                design.append((cond, blade, run))
    return design


def experiment_id(cond, blade, run):
    if cond is BladeCondition.NORMAL:
        return f"normal_r{run}"
    return f"{cond.value.lower()}_b{blade}_r{run}"


def blade_profile(cond, blade, seed, snr=SnrConfig(), base=RotorProfile(), jitter=0.03):
    """Profile for one physical blade; instances differ by seeded jitter."""
    rng = np.random.default_rng([seed, list(BladeCondition).index(cond), blade or 0])
    # a zero defect scale removes the signature outright; otherwise the jitter
    # below would still leave the scratch noise floor a few percent off
    kind = CONDITION_DEFECT[cond] if snr.defect_scale > 0 else DefectKind.NONE
    defect = DEFAULT_DEFECTS[kind]
    if kind is not DefectKind.NONE:
        if kind is DefectKind.CRACK:
            strength = defect.strength * snr.defect_scale
        else:  # trim gain / scratch inflation are multiplicative around 1
            strength = 1.0 + (defect.strength - 1.0) * snr.defect_scale
        strength *= 1.0 + rng.uniform(-jitter, jitter)
        burst = defect.burst_amplitude * snr.defect_scale
        defect = replace(defect, strength=strength, burst_amplitude=burst)
    harmonics = {
        axis: tuple(
            (i, a * snr.harmonic_scale * (1.0 + rng.uniform(-jitter, jitter) / 3))
            for i, a in base.harmonics[axis]
        )
        for axis in AXES
    }
    return replace(
        base,
        rotation_hz=base.rotation_hz * (1.0 + rng.uniform(-jitter, jitter) / 3),
        harmonics=harmonics,
        noise_sigma=base.noise_sigma * snr.noise_scale,
        defect=defect,
    )


def generate_paper_shaped_corpus(out_dir, seed=0, snr=SnrConfig(), duration_s=60.0,
                                 fs=SAMPLING_RATE_HZ, base=RotorProfile()):
    """Write 26 experiment CSVs plus ``manifest.json`` under ``out_dir``.

    Returns the manifest path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, (cond, blade, run) in enumerate(paper_design()):
        eid = experiment_id(cond, blade, run)
        profile = blade_profile(cond, blade, seed, snr, base)
        path = out_dir / f"{eid}.csv"
        generate_experiment(profile, path, duration_s, fs, seed=[seed, k])
        entries.append((path, ExperimentMeta(eid, cond, blade, duration_s)))
    manifest = out_dir / "manifest.json"
    write_manifest(manifest, entries)
    return manifest
