"""Per-window signal features: time-domain statistics, STFT, wavelet packets
and spectral moments.

All functions are pure; they take 1-D series (or spectra) and return floats
or arrays.  Degenerate inputs raise instead of producing NaN.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import (
    DegenerateSpectrum,
    EmptySeries,
    LengthNotDivisible,
    SeriesTooShort,
    ZeroSpectrum,
)

SAMPLING_RATE_HZ = 800.0


def _as_series(series):
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise EmptySeries("series must be a non-empty 1-D array")
    return arr


def magnitude(x, y, z):
    """Euclidean norm of a tri-axial sample (works elementwise on arrays)."""
    return np.sqrt(np.square(x) + np.square(y) + np.square(z))


def amplitude(series):
    """Half the peak-to-peak range."""
    arr = _as_series(series)
    return float((arr.max() - arr.min()) / 2.0)


def mean(series):
    return float(np.mean(_as_series(series)))


def std_dev(series):
    """Population standard deviation (divides by n)."""
    return float(np.std(_as_series(series), ddof=0))


def shannon_entropy(series, num_bins=16):
    """Entropy in bits of the series' value histogram.

    Values are binned into ``num_bins`` equal-width bins spanning the series'
    own ``[min, max]``; the maximum lands in the last bin.  A constant series
    has entropy 0.
    """
    arr = _as_series(series)
    if num_bins < 2:
        raise ValueError("num_bins must be >= 2")
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return 0.0
    idx = np.floor((arr - lo) / (hi - lo) * num_bins).astype(np.int64)
    np.clip(idx, 0, num_bins - 1, out=idx)
    p = np.bincount(idx, minlength=num_bins) / arr.size
    p = p[p > 0]
    h = float(-np.sum(p * np.log2(p)))
    return max(h, 0.0)


# -- STFT -------------------------------------------------------------------

def hann(n):
    """Periodic Hann window of length ``n``."""
    k = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)


_WINDOWS = {"hann": hann}


@dataclass(frozen=True)
class StftParams:
    segment_length: int = 128
    hop: int = 64
    window_fn: str = "hann"

    def __post_init__(self):
        if self.segment_length < 2:
            raise ValueError("segment_length must be >= 2")
        if not 1 <= self.hop <= self.segment_length:
            raise ValueError("hop must be in [1, segment_length]")
        if self.window_fn not in _WINDOWS:
            raise ValueError(f"unknown window function {self.window_fn!r}")

    def n_frames(self, n_samples):
        if n_samples < self.segment_length:
            return 0
        return (n_samples - self.segment_length) // self.hop + 1

    @property
    def n_bins(self):
        return self.segment_length // 2 + 1

    def window(self):
        return _WINDOWS[self.window_fn](self.segment_length)


def stft(series, params=StftParams()):
    """Magnitude STFT, shape (frames, bins).

    Frame ``m`` covers samples ``[m*hop, m*hop + segment_length)``; there is
    no padding, so samples past the last full frame are unused.
    """
    arr = _as_series(series)
    if arr.size < params.segment_length:
        raise SeriesTooShort(
            f"series of {arr.size} samples is shorter than segment {params.segment_length}"
        )
    frames = np.lib.stride_tricks.sliding_window_view(arr, params.segment_length)[:: params.hop]
    return np.abs(np.fft.rfft(frames * params.window(), axis=-1))


def stft_batch(batch, params=StftParams()):
    """:func:`stft` over the last axis of an array of series."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.shape[-1] < params.segment_length:
        raise SeriesTooShort("series shorter than STFT segment")
    frames = np.lib.stride_tricks.sliding_window_view(batch, params.segment_length, axis=-1)
    frames = frames[..., :: params.hop, :]
    return np.abs(np.fft.rfft(frames * params.window(), axis=-1))


# -- wavelet packets ----------------------------------------------------------

_SQRT2 = np.sqrt(2.0)
WAVELET_FILTERS = {
    "haar": np.array([1.0, 1.0]) / _SQRT2,
    "db2": np.array(
        [1 + np.sqrt(3), 3 + np.sqrt(3), 3 - np.sqrt(3), 1 - np.sqrt(3)]
    ) / (4 * _SQRT2),
}


def _filter_pair(wavelet):
    lo = WAVELET_FILTERS[wavelet] if isinstance(wavelet, str) else np.asarray(wavelet, float)
    # quadrature mirror: hi[n] = (-1)^n lo[L-1-n]
    hi = lo[::-1] * (-1.0) ** np.arange(lo.size)
    return lo, hi


def _analysis_step(x, lo, hi):
    """One periodized two-channel split along the last axis."""
    n = x.shape[-1]
    taps = lo.size
    idx = (np.arange(0, n, 2)[:, None] + np.arange(taps)[None, :]) % n
    seg = x[..., idx]  # (..., n/2, taps)
    return seg @ lo, seg @ hi


def wavelet_packet_nodes(series, levels=3, wavelet="haar"):
    """Terminal-node coefficients of a full packet tree, natural order.

    Returns an array of shape (..., 2**levels, n / 2**levels).  Node ``j`` is
    reached by the binary path of ``j`` read from the most significant bit,
    0 = low-pass branch, 1 = high-pass branch.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.shape[-1] % (2 ** levels):
        raise LengthNotDivisible(
            f"length {x.shape[-1]} not divisible by 2**{levels}"
        )
    lo, hi = _filter_pair(wavelet)
    nodes = x[..., None, :]
    for _ in range(levels):
        a, d = _analysis_step(nodes, lo, hi)
        nodes = np.stack([a, d], axis=-2).reshape(*nodes.shape[:-2], -1, a.shape[-1])
    return nodes


def wavelet_packet_energies(series, levels=3, wavelet="haar"):
    """Sum of squared coefficients in each terminal packet node."""
    arr = np.asarray(series, dtype=np.float64)
    if arr.size == 0:
        raise EmptySeries("series must be non-empty")
    return np.sum(np.square(wavelet_packet_nodes(arr, levels, wavelet)), axis=-1)


# -- spectral moments --------------------------------------------------------

@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray  # Hz
    mags: np.ndarray

    def band(self, band=None):
        """(freqs, mags) restricted to ``band`` (inclusive, Hz).

        ``None`` means everything above DC up to Nyquist.
        """
        if band is None:
            keep = self.freqs > 0
        else:
            b1, b2 = band
            if b1 > b2:
                raise ValueError("band edges out of order")
            keep = (self.freqs >= b1) & (self.freqs <= b2)
        return self.freqs[keep], self.mags[keep]


def periodogram(series, fs=SAMPLING_RATE_HZ):
    """One-sided magnitude spectrum of the whole series, rectangular window."""
    arr = _as_series(series)
    if arr.size < 2:
        raise SeriesTooShort("need at least 2 samples")
    mags = np.abs(np.fft.rfft(arr))
    freqs = np.arange(mags.size) * fs / arr.size
    return Spectrum(freqs, mags)


def _band_weights(spectrum, band):
    f, s = spectrum.band(band)
    total = s.sum()
    if f.size == 0 or total <= 0:
        raise ZeroSpectrum("no spectral mass in band")
    return f, s, total


def spectral_centroid(spectrum, band=None):
    f, s, total = _band_weights(spectrum, band)
    return float(np.dot(f, s) / total)


def spectral_spread(spectrum, band=None, mu1=None):
    f, s, total = _band_weights(spectrum, band)
    if mu1 is None:
        mu1 = np.dot(f, s) / total
    return float(np.sqrt(np.dot((f - mu1) ** 2, s) / total))


_SPREAD_EPS = 1e-12


def spectral_skewness(spectrum, band=None):
    f, s, total = _band_weights(spectrum, band)
    mu1 = np.dot(f, s) / total
    mu2 = np.sqrt(np.dot((f - mu1) ** 2, s) / total)
    # a single occupied line leaves rounding noise in mu2, not an exact zero
    if mu2 <= _SPREAD_EPS * np.max(np.abs(f)):
        raise DegenerateSpectrum("spectral spread is zero")
    return float(np.dot((f - mu1) ** 3, s) / (mu2 ** 3 * total))
