import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tfc.audio_io import AudioBuffer
from tfc.entropy import EntropyConfig, bin_centers, entropy_tracks, sample_affinities, segment_entropy
from tfc.errors import ConfigError, EmptyInputError, TooShortError
from tfc.transform import resolution_specs

amplitudes = st.floats(-1, 1, allow_nan=False)


def naive_entropy(segment, n=64, sigma=None, eps=1e-9):
    sigma = 2 / (n - 1) if sigma is None else sigma
    u = [-1 + 2 * i / (n - 1) for i in range(n)]
    mean = [0.0] * n
    for x in segment:
        for i in range(n):
            mean[i] += math.exp(-((x - u[i]) ** 2) / (2 * sigma ** 2)) / len(segment)
    total = sum(mean)
    return -sum(p * math.log(p) for p in (m / (total + eps) for m in mean) if p > 0)


def naive_tracks(x):
    out = []
    for spec in resolution_specs():
        offset = (spec.receptive_field - spec.stride) // 2
        track = []
        for k in range(len(x) // spec.stride):
            lo = max(k * spec.stride - offset, 0)
            hi = min(k * spec.stride - offset + spec.receptive_field, len(x))
            track.append(naive_entropy(x[lo:hi]))
        out.append(np.array(track))
    return out


@pytest.mark.parametrize("n, expected", [(2, [-1, 1]), (3, [-1, 0, 1]), (5, [-1, -0.5, 0, 0.5, 1])])
def test_bin_centers(n, expected):
    np.testing.assert_array_equal(bin_centers(n), expected)


def test_bin_centers_too_few():
    with pytest.raises(ConfigError):
        bin_centers(1)


def test_affinity_examples():
    np.testing.assert_allclose(sample_affinities(0.0, EntropyConfig(3, 1.0)),
                               [math.exp(-0.5), 1.0, math.exp(-0.5)], rtol=1e-15)
    for n in (2, 7, 64):
        assert sample_affinities(-1.0, EntropyConfig(n))[0] == 1.0
    a = sample_affinities(0.25, EntropyConfig(5, 0.5))
    assert a[2] == a[3] == pytest.approx(math.exp(-0.125))


def test_constant_zero_two_bins_is_log2():
    h = segment_entropy(np.zeros(50), EntropyConfig(2, 10.0, 1e-12))
    assert h == pytest.approx(math.log(2), abs=1e-9)


def test_empty_segment():
    with pytest.raises(EmptyInputError):
        segment_entropy([])


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(1, 60), elements=amplitudes))
def test_segment_matches_naive_oracle(x):
    assert segment_entropy(x) == pytest.approx(naive_entropy(x), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 200), elements=st.floats(-3, 3, allow_nan=False)),
       st.integers(2, 80))
def test_entropy_bounds(x, n):
    h = segment_entropy(x, EntropyConfig(n))
    assert 0.0 <= h <= math.log(n)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 200), elements=amplitudes), st.randoms(use_true_random=False))
def test_permutation_invariance(x, random):
    y = x.copy()
    random.shuffle(y)
    assert segment_entropy(x) == segment_entropy(y)


@pytest.mark.parametrize("a, b", [(-0.8, 0.6), (-1.0, 1.0), (0.0, 0.5), (-0.3, 0.9)])
def test_two_separated_constants_raise_entropy(a, b):
    mix = np.array([a] * 50 + [b] * 50)
    h_mix = segment_entropy(mix)
    assert h_mix >= segment_entropy(np.full(50, a))
    assert h_mix >= segment_entropy(np.full(50, b))


def test_tracks_match_naive_windows(rng):
    x = np.concatenate([np.zeros(2560), rng.uniform(-1, 1, 2560), 0.1 * rng.standard_normal(2560)])
    x = np.clip(x, -1, 1)
    tracks = entropy_tracks(AudioBuffer(x, 24000))
    for got, want in zip((tracks.h_f, tracks.h_m, tracks.h_c), naive_tracks(x)):
        np.testing.assert_allclose(got, want, atol=1e-9)


def test_track_lengths():
    tracks = entropy_tracks(AudioBuffer(np.zeros(24320), 24000))
    assert (len(tracks.h_f), len(tracks.h_m), len(tracks.h_c)) == (76, 38, 19)


def test_silence_gives_constant_tracks():
    tracks = entropy_tracks(AudioBuffer(np.zeros(24320), 24000))
    for h in (tracks.h_f, tracks.h_m, tracks.h_c):
        assert np.all(h == h[0])


def test_silence_below_noise_every_trial():
    # coarse windows fully inside the silent half are k <= 8, inside the noise half 10 <= k <= 17
    for seed in range(100):
        noise = np.random.default_rng(seed).uniform(-1, 1, 12000)
        x = np.concatenate([np.zeros(12000), noise, np.zeros(320)])
        h_c = entropy_tracks(AudioBuffer(x, 24000)).h_c
        assert h_c[:9].max() < h_c[10:18].min()


def test_too_short():
    with pytest.raises(TooShortError):
        entropy_tracks(AudioBuffer(np.zeros(640), 24000))
