import math

import numpy as np
import pytest

from tfc.audio_io import AudioBuffer
from tfc.errors import ConfigError, ShapeError, UndefinedReferenceError
from tfc.metrics import MetricConfig, mel_distance, snr, stft_distance


def buf(x):
    return AudioBuffer(x, 24000)


def dft_magnitude(frame):
    n = len(frame)
    hann = np.array([0.5 - 0.5 * math.cos(2 * math.pi * i / n) for i in range(n)])
    k = np.arange(n // 2 + 1)
    # reduce k*n mod n first so the twiddle angles stay exact
    basis = np.exp(-2j * np.pi * (np.outer(k, np.arange(n)) % n) / n)
    return np.abs(basis @ (frame * hann))


def frames_of(x, window, hop):
    out = []
    start = 0
    while True:
        chunk = np.zeros(window)
        piece = x[start:start + window]
        chunk[:len(piece)] = piece
        out.append(chunk)
        if start + window >= len(x):
            return out
        start += hop


def oracle_filterbank(sr, n_fft, n_mels):
    mel = lambda f: 2595 * math.log10(1 + f / 700)
    hz = lambda m: 700 * (10 ** (m / 2595) - 1)
    top = mel(sr / 2)
    edges = [hz(top * i / (n_mels + 1)) for i in range(n_mels + 2)]
    bank = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(n_mels):
        lo, c, hi = edges[m], edges[m + 1], edges[m + 2]
        for j in range(n_fft // 2 + 1):
            f = j * sr / n_fft
            if lo < f <= c:
                bank[m, j] = (f - lo) / (c - lo)
            elif c < f < hi:
                bank[m, j] = (hi - f) / (hi - c)
    return bank


def test_identical_is_zero(rng):
    x = rng.standard_normal(5000)
    assert stft_distance(buf(x), buf(x)) == 0.0
    assert mel_distance(buf(x), buf(x)) == 0.0


def test_same_magnitude_is_zero(rng):
    x = rng.standard_normal(4000)
    assert stft_distance(buf(x), buf(-x)) == 0.0
    assert mel_distance(buf(x), buf(-x)) == 0.0


def test_single_window_sine_vs_silence():
    x = np.sin(2 * np.pi * 440 * np.arange(2048) / 24000)
    config = MetricConfig(stft_window_sizes=(2048,))
    expected = np.mean(np.abs(np.log(dft_magnitude(x) + 1e-5) - np.log(1e-5)))
    assert stft_distance(buf(x), buf(np.zeros(2048)), config) == pytest.approx(expected, rel=1e-10)


def test_multi_scale_matches_brute_force(rng):
    a, b = rng.standard_normal((2, 3000))
    per_scale = []
    for w in (2048, 512, 128):
        la = np.array([np.log(dft_magnitude(f) + 1e-5) for f in frames_of(a, w, w // 4)])
        lb = np.array([np.log(dft_magnitude(f) + 1e-5) for f in frames_of(b, w, w // 4)])
        per_scale.append(np.mean(np.abs(la - lb)))
    assert stft_distance(buf(a), buf(b)) == pytest.approx(np.mean(per_scale), rel=1e-9)


def test_mel_doubling_tone_matches_oracle():
    tone = 0.3 * np.sin(2 * np.pi * 1000 * np.arange(1024) / 24000)
    bank = oracle_filterbank(24000, 1024, 80)
    la = np.log(bank @ dft_magnitude(tone) + 1e-5)
    lb = np.log(bank @ dft_magnitude(2 * tone) + 1e-5)
    expected = np.mean(np.abs(la - lb))
    got = mel_distance(buf(tone), buf(2 * tone))
    assert got == pytest.approx(expected, rel=1e-9)
    assert 0 < got <= math.log(2)
    # the loudest Mel band moves by almost exactly log 2
    peak = np.argmax(la)
    assert lb[peak] - la[peak] == pytest.approx(math.log(2), abs=1e-6)


def test_symmetry_and_triangle_inequality():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b, c = rng.standard_normal((3, 2500)) * rng.uniform(0.01, 2, (3, 1))
        for d in (stft_distance, mel_distance):
            ab, bc, ac = d(buf(a), buf(b)), d(buf(b), buf(c)), d(buf(a), buf(c))
            assert ab == d(buf(b), buf(a))
            assert ab >= 0
            assert ac <= ab + bc + 1e-12


def test_deterministic(rng):
    a, b = rng.standard_normal((2, 6000))
    assert mel_distance(buf(a), buf(b)) == mel_distance(buf(a), buf(b))
    assert stft_distance(buf(a), buf(b)) == stft_distance(buf(a), buf(b))


def test_snr_examples(rng):
    x = rng.standard_normal(1000)
    assert snr(buf(x), buf(x)) == math.inf
    assert snr(buf(x), buf(np.zeros(1000))) == pytest.approx(0.0, abs=1e-12)
    assert snr(buf(x), buf(x + 0.01 * x)) == pytest.approx(40.0, abs=1e-9)
    with pytest.raises(UndefinedReferenceError):
        snr(buf(np.zeros(10)), buf(x[:10]))


def test_length_mismatch():
    with pytest.raises(ShapeError):
        stft_distance(buf(np.zeros(100)), buf(np.zeros(101)))
    with pytest.raises(ShapeError):
        mel_distance(buf(np.zeros(100)), buf(np.zeros(101)))


def test_config_validation():
    with pytest.raises(ConfigError):
        MetricConfig(stft_window_sizes=(1000,))
    with pytest.raises(ConfigError):
        MetricConfig(floor=0.0)
