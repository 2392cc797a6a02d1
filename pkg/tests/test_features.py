import bisect
import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rotorvib.exceptions import (
    DegenerateSpectrum,
    EmptySeries,
    LengthNotDivisible,
    SeriesTooShort,
    UnknownFamily,
    ZeroSpectrum,
)
from rotorvib.features import (
    Family,
    FeatureParams,
    FeatureSchema,
    Spectrum,
    StftParams,
    WindowFeatureExtractor,
    amplitude,
    build_schema,
    extract_window_features,
    magnitude,
    mean,
    periodogram,
    read_feature_csv,
    shannon_entropy,
    spectral_centroid,
    spectral_skewness,
    spectral_spread,
    std_dev,
    stft,
    wavelet_packet_energies,
    wavelet_packet_nodes,
    write_feature_csv,
)
from rotorvib.features.transforms import hann
from rotorvib.ingest import Sensor, Window

# -- independent oracles ------------------------------------------------------


def naive_stft(x, seg, hop):
    w = [0.5 - 0.5 * math.cos(2 * math.pi * n / seg) for n in range(seg)]
    frames = []
    for start in range(0, len(x) - seg + 1, hop):
        row = []
        for k in range(seg // 2 + 1):
            acc = sum(x[start + n] * w[n] * cmath.exp(-2j * math.pi * k * n / seg) for n in range(seg))
            row.append(abs(acc))
        frames.append(row)
    return np.array(frames)


def haar_packet_oracle(x, levels):
    """Pairwise averaging / differencing, low branch first."""
    if levels == 0:
        return [x]
    r = 1 / math.sqrt(2)
    a = [(x[2 * i] + x[2 * i + 1]) * r for i in range(len(x) // 2)]
    d = [(x[2 * i] - x[2 * i + 1]) * r for i in range(len(x) // 2)]
    return haar_packet_oracle(a, levels - 1) + haar_packet_oracle(d, levels - 1)


def entropy_oracle(x, bins=16):
    lo, hi = min(x), max(x)
    if lo == hi:
        return 0.0
    edges = [lo + (hi - lo) * k / bins for k in range(bins)]
    counts = [0] * bins
    for v in x:
        counts[min(bisect.bisect_right(edges, v) - 1, bins - 1)] += 1
    return -sum(c / len(x) * math.log2(c / len(x)) for c in counts if c)


def moment_oracle(f, s):
    total = sum(s)
    mu1 = sum(fi * si for fi, si in zip(f, s)) / total
    mu2 = math.sqrt(sum((fi - mu1) ** 2 * si for fi, si in zip(f, s)) / total)
    mu3 = sum((fi - mu1) ** 3 * si for fi, si in zip(f, s)) / (total * mu2**3)
    return mu1, mu2, mu3


# -- time domain --------------------------------------------------------------


def test_magnitude_examples():
    assert magnitude(3, 4, 0) == 5
    assert magnitude(0, 0, 0) == 0
    assert magnitude(1, 1, 1) == pytest.approx(math.sqrt(3), abs=1e-15)


def test_time_stats_examples():
    assert amplitude([-1.5, 0, 2.5]) == 2.0
    assert amplitude([3.3] * 5) == 0
    assert mean([1, 2, 3]) == 2
    assert std_dev([4.0] * 7) == 0
    assert std_dev([1, 3]) == 1


def test_amplitude_scan_oracle(rng):
    x = rng.normal(size=500)
    lo = hi = x[0]
    for v in x:
        lo, hi = min(lo, v), max(hi, v)
    assert amplitude(x) == (hi - lo) / 2


@pytest.mark.parametrize("fn", [amplitude, mean, std_dev, shannon_entropy])
def test_empty_series(fn):
    with pytest.raises(EmptySeries):
        fn([])


def test_entropy_examples():
    assert shannon_entropy([2.5] * 100) == 0.0
    uniform = np.repeat(np.arange(16.0), 5)
    assert shannon_entropy(uniform) == pytest.approx(4.0, abs=1e-12)


def test_entropy_histogram_oracle(rng):
    for _ in range(20):
        x = rng.normal(size=800)
        assert shannon_entropy(x) == pytest.approx(entropy_oracle(x.tolist()), abs=1e-12)


@settings(max_examples=200)
@given(arrays(np.float64, st.integers(1, 300), elements=st.floats(-8, 8, allow_nan=False)))
def test_entropy_bounds_property(x):
    h = shannon_entropy(x)
    assert 0.0 <= h <= math.log2(16) + 1e-12
    assert amplitude(x) >= 0 and std_dev(x) >= 0


# -- STFT ---------------------------------------------------------------------


def test_stft_naive_dft_oracle(rng):
    params = StftParams(32, 16)
    for _ in range(5):
        x = rng.normal(size=64)
        assert np.max(np.abs(stft(x, params) - naive_stft(x.tolist(), 32, 16))) < 1e-9


def test_stft_constant_concentrates_at_low_bins():
    # the periodic Hann window's own DFT is N/2 at bin 0, N/4 at bin 1, 0 elsewhere
    params = StftParams(64, 64)
    out = stft(np.ones(64), params)
    assert out.shape == (1, 33)
    assert out[0, 0] == pytest.approx(hann(64).sum(), abs=1e-9)
    assert out[0, 1] == pytest.approx(16.0, abs=1e-9)
    assert np.all(out[0, 2:] < 1e-9)


def test_stft_bin_aligned_sinusoid():
    params = StftParams(64, 32)
    n = np.arange(256)
    out = stft(np.sin(2 * np.pi * 8 * n / 64), params)
    assert np.all(np.argmax(out, axis=1) == 8)


def test_stft_shape_and_errors():
    p = StftParams()
    assert p.n_frames(800) == 11 and p.n_bins == 65
    assert stft(np.zeros(800)).shape == (11, 65)
    with pytest.raises(SeriesTooShort):
        stft(np.zeros(127))
    with pytest.raises(ValueError):
        StftParams(128, 129)


# -- wavelet packets ----------------------------------------------------------


def test_wavelet_recursive_oracle(rng):
    for levels in (1, 2, 3):
        x = rng.normal(size=64)
        expected = haar_packet_oracle(x.tolist(), levels)
        got = wavelet_packet_nodes(x, levels)
        assert got.shape == (2**levels, 64 // 2**levels)
        assert np.allclose(got, expected, rtol=0, atol=1e-9)


def test_wavelet_constant_energy_in_node_zero():
    e = wavelet_packet_energies(np.full(800, 1.7))
    assert e[0] == pytest.approx(800 * 1.7**2, rel=1e-12)
    assert np.all(np.abs(e[1:]) < 1e-20)


@pytest.mark.parametrize("wavelet", ["haar", "db2"])
@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.sampled_from([8, 64, 800]), elements=st.floats(-8, 8, allow_nan=False)))
def test_wavelet_parseval_property(wavelet, x):
    e = wavelet_packet_energies(x, 3, wavelet)
    total = float(np.sum(x**2))
    assert np.all(e >= 0)
    assert abs(e.sum() - total) <= 1e-9 * max(total, 1e-300) + 1e-300


def test_wavelet_length_check():
    with pytest.raises(LengthNotDivisible):
        wavelet_packet_energies(np.zeros(801))


# -- spectral moments -----------------------------------------------------------


def test_centroid_examples():
    f = np.arange(0, 400.5, 12.5)
    s = np.where(f == 100, 3.0, 0.0)
    assert spectral_centroid(Spectrum(f, s)) == 100
    assert spectral_spread(Spectrum(f, s)) == 0
    flat = Spectrum(f, np.ones_like(f))
    assert spectral_centroid(flat, (50, 150)) == pytest.approx(100, abs=1e-12)


def test_spread_two_lines():
    f = np.array([0.0, 90.0, 100.0, 110.0])
    s = np.array([0.0, 2.0, 0.0, 2.0])
    assert spectral_spread(Spectrum(f, s)) == pytest.approx(10, abs=1e-12)


def test_skewness_symmetric_and_mirrored(rng):
    f = np.arange(1, 42, dtype=float)
    half = rng.random(20)
    sym = np.concatenate([half, [0.5], half[::-1]])
    assert abs(spectral_skewness(Spectrum(f, sym))) < 1e-9
    s = rng.random(41)
    assert spectral_skewness(Spectrum(f, s[::-1])) == pytest.approx(
        -spectral_skewness(Spectrum(f, s)), abs=1e-9
    )


def test_moments_direct_oracle(rng):
    for _ in range(10):
        f = np.arange(1, 401) * 2.0
        s = rng.random(400)
        mu1, mu2, mu3 = moment_oracle(f.tolist(), s.tolist())
        spec = Spectrum(f, s)
        assert spectral_centroid(spec) == pytest.approx(mu1, rel=1e-12)
        assert spectral_spread(spec) == pytest.approx(mu2, rel=1e-12)
        assert spectral_skewness(spec) == pytest.approx(mu3, rel=1e-10, abs=1e-12)


def test_spectral_errors():
    f = np.arange(5.0)
    with pytest.raises(ZeroSpectrum):
        spectral_centroid(Spectrum(f, np.zeros(5)))
    with pytest.raises(DegenerateSpectrum):
        spectral_skewness(Spectrum(f, np.array([9.0, 0, 1, 0, 0])))
    with pytest.raises(SeriesTooShort):
        periodogram([1.0])


def test_periodogram_excludes_dc_by_default():
    x = 1.0 + np.sin(2 * np.pi * 100 * np.arange(800) / 800)
    spec = periodogram(x)
    assert spec.freqs[1] == 1.0
    assert spectral_centroid(spec) == pytest.approx(100, abs=1e-6)


@settings(max_examples=50)
@given(
    arrays(np.float64, 64, elements=st.floats(-4, 4, allow_nan=False)),
    st.floats(0.01, 100),
)
def test_scale_invariance(x, c):
    spec = periodogram(x)
    try:
        base = spectral_centroid(spec)
    except ZeroSpectrum:
        return
    assert spectral_centroid(periodogram(c * x)) == pytest.approx(base, rel=1e-9, abs=1e-9)


# -- schema and extractor -------------------------------------------------------


def test_default_schema_counts():
    schema = FeatureParams().schema(800)
    assert len(schema) == 4374
    counts = schema.counts()
    assert counts[Family.STFT] == 2 * 3 * 715
    assert counts[Family.WAVELET] == 48
    assert counts[Family.TIME_DOMAIN] == 24
    assert counts[Family.SPECTRAL_CENTROID] == counts[Family.FREQUENCY_SKEWNESS] == 6
    assert len(set(schema.names)) == len(schema)
    per_axis = len(build_schema(11, 65).indices(Family.STFT)) // 6 + 4 + 8 + 2
    assert per_axis == 729


def test_schema_json_and_fingerprint():
    schema = build_schema(3, 5, 2)
    back = FeatureSchema.from_json(schema.to_json())
    assert back.names == schema.names and back.fingerprint() == schema.fingerprint()
    assert build_schema(3, 6, 2).fingerprint() != schema.fingerprint()
    with pytest.raises(UnknownFamily):
        Family.parse("Cepstrum")
    assert Family.parse("fs") is Family.FREQUENCY_SKEWNESS


def _window(sensor, arr):
    return Window(sensor, 0, arr[0], arr[1], arr[2], "e", 1)


def test_extract_window_layout(rng):
    data = rng.normal(size=(2, 3, 800))
    vec = extract_window_features(_window(Sensor.CENTRAL, data[0]), _window(Sensor.OUTER, data[1]))
    schema = vec.schema
    assert vec.values.shape == (4374,)
    outer_y = data[1, 1]
    assert vec.values[schema.index_of("outer_y_std")] == std_dev(outer_y)
    assert vec.values[schema.index_of("central_x_entropy")] == shannon_entropy(data[0, 0])
    assert vec.values[schema.index_of("outer_y_stft_t03_f010")] == stft(outer_y)[3, 10]
    assert vec.values[schema.index_of("outer_y_wpt05")] == wavelet_packet_energies(outer_y)[5]
    assert vec.values[schema.index_of("outer_y_centroid")] == spectral_centroid(periodogram(outer_y))
    again = extract_window_features(_window(Sensor.CENTRAL, data[0]), _window(Sensor.OUTER, data[1]))
    assert np.array_equal(vec.values, again.values)


def test_extractor_matches_single_window_path(rng):
    data = rng.normal(size=(3, 2, 3, 800))
    ext = WindowFeatureExtractor().fit(data)
    X = ext.transform(data)
    for i in range(3):
        single = extract_window_features(
            _window(Sensor.CENTRAL, data[i, 0]), _window(Sensor.OUTER, data[i, 1])
        )
        assert np.array_equal(X[i], single.values)
    assert list(ext.get_feature_names_out()) == ext.schema_.names
    assert ext.get_params()["segment_length"] == 128


def test_degenerate_skewness_substituted(rng):
    # a one-bin band has zero spread, so skewness is undefined
    data = rng.normal(size=(2, 2, 3, 800))
    ext = WindowFeatureExtractor(band=(50.0, 50.0)).fit(data)
    X = ext.transform(data)
    assert ext.n_degenerate_ == 12
    assert np.all(X[:, ext.schema_.indices(Family.FREQUENCY_SKEWNESS)] == 0)
    assert np.allclose(X[:, ext.schema_.indices(Family.SPECTRAL_CENTROID)], 50.0, rtol=1e-14)


def test_constant_window_has_no_spectrum():
    data = np.ones((1, 2, 3, 800))
    with pytest.raises(ZeroSpectrum):
        WindowFeatureExtractor().fit_transform(data)


def test_feature_csv_round_trip(tmp_path, rng):
    schema = build_schema(2, 3, 1)
    X = rng.normal(size=(4, len(schema)))
    write_feature_csv(tmp_path / "f.csv", X, schema, ["a", "a", "b", "b"], [0, 0, 1, 1])
    back, names, ids, labels = read_feature_csv(tmp_path / "f.csv")
    assert np.array_equal(back, X)
    assert names == schema.names and ids.tolist() == ["a", "a", "b", "b"] and labels.tolist() == [0, 0, 1, 1]
