import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tfc.audio_io import AudioBuffer, load_wav, normalize_peak, pad_to_slot_multiple, save_wav
from tfc.errors import AudioFormatError, AudioWriteError, EmptyInputError, UnsupportedCodecError


def write_pcm16(path, data: np.ndarray, rate=24000, channels=1):
    pcm = np.asarray(data, dtype="<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(pcm.tobytes())


def riff(fmt_tag, channels, rate, bits, payload: bytes, extensible_tag=None) -> bytes:
    block = channels * bits // 8
    if extensible_tag is None:
        fmt = struct.pack("<HHIIHH", fmt_tag, channels, rate, rate * block, block, bits)
    else:
        fmt = struct.pack("<HHIIHHHHI", 0xFFFE, channels, rate, rate * block, block, bits, 22, bits, 0)
        fmt += struct.pack("<H", extensible_tag) + b"\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(payload)) + payload
    return b"RIFF" + struct.pack("<I", len(body)) + body


def test_load_one_second_pcm16(tmp_path):
    path = tmp_path / "a.wav"
    write_pcm16(path, np.zeros(24000))
    audio = load_wav(path)
    assert len(audio.samples) == 24000
    assert audio.sample_rate == 24000
    assert audio.original_length == 24000


def test_stereo_channels_are_averaged(tmp_path):
    path = tmp_path / "st.wav"
    frames = np.tile([16384, -16384], 100)
    write_pcm16(path, frames, channels=2)
    audio = load_wav(path)
    assert len(audio.samples) == 100
    assert np.all(audio.samples == 0.0)


def test_float32_wav(tmp_path):
    x = np.array([-2.0, 1.0, 0.25], dtype="<f4")
    path = tmp_path / "f.wav"
    path.write_bytes(riff(3, 1, 24000, 32, x.tobytes()))
    np.testing.assert_array_equal(load_wav(path).samples, x.astype(np.float64))


def test_extensible_pcm(tmp_path):
    x = np.array([100, -200, 300], dtype="<i2")
    path = tmp_path / "ext.wav"
    path.write_bytes(riff(None, 1, 24000, 16, x.tobytes(), extensible_tag=1))
    np.testing.assert_array_equal(load_wav(path).samples, x / 32768.0)


def test_truncated_chunk_is_format_error(tmp_path):
    data = riff(1, 1, 24000, 16, np.zeros(100, dtype="<i2").tobytes())
    path = tmp_path / "t.wav"
    path.write_bytes(data[:-50])
    with pytest.raises(AudioFormatError):
        load_wav(path)


def test_not_riff_is_format_error(tmp_path):
    path = tmp_path / "junk.wav"
    path.write_bytes(b"hello world, not audio")
    with pytest.raises(AudioFormatError):
        load_wav(path)


def test_mulaw_is_unsupported_codec(tmp_path):
    path = tmp_path / "mu.wav"
    path.write_bytes(riff(7, 1, 8000, 8, bytes(range(64))))
    with pytest.raises(UnsupportedCodecError):
        load_wav(path)


@pytest.mark.parametrize("samples, expected", [
    ([0.5, -0.25], [1.0, -0.5]),
    ([0.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
    ([-2.0, 1.0], [-1.0, 0.5]),
])
def test_normalize_peak_examples(samples, expected):
    out = normalize_peak(AudioBuffer(samples, 24000))
    np.testing.assert_array_equal(out.samples, expected)


def test_normalize_empty():
    with pytest.raises(EmptyInputError):
        normalize_peak(AudioBuffer([], 24000))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 64), elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_normalize_is_idempotent(x):
    once = normalize_peak(AudioBuffer(x, 24000))
    twice = normalize_peak(once)
    np.testing.assert_array_equal(once.samples, twice.samples)


@pytest.mark.parametrize("n, expected", [(24000, 24320), (1280, 1280), (1, 1280)])
def test_pad_examples(n, expected):
    out = pad_to_slot_multiple(AudioBuffer(np.ones(n), 24000), 320, 4)
    assert len(out.samples) == expected
    assert out.original_length == n
    assert np.all(out.samples[n:] == 0.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5000), st.sampled_from([(320, 4), (160, 2), (7, 3)]))
def test_pad_keeps_samples_and_appends_zeros(n, geometry):
    stride, factor = geometry
    x = np.random.default_rng(n).standard_normal(n)
    out = pad_to_slot_multiple(AudioBuffer(x, 24000), stride, factor)
    assert len(out.samples) % (stride * factor) == 0
    assert len(out.samples) - n < stride * factor
    np.testing.assert_array_equal(out.samples[:n], x)
    assert not out.samples[n:].any()


def test_save_strips_padding_and_clamps(tmp_path):
    x = np.zeros(24320)
    x[0] = 1.5
    x[1] = -1.5
    path = tmp_path / "o.wav"
    save_wav(AudioBuffer(x, 24000, 24000), path)
    back = load_wav(path)
    assert len(back.samples) == 24000
    assert back.samples[0] == pytest.approx(32767 / 32768)
    assert back.samples[1] == -1.0


def test_round_trip_within_one_step(tmp_path, rng):
    x = rng.uniform(-1, 1, 4800)
    path = tmp_path / "r.wav"
    save_wav(AudioBuffer(x, 24000), path)
    back = load_wav(path)
    assert np.max(np.abs(back.samples - x)) <= 1 / 32768


def test_load_save_load_idempotent(tmp_path, rng):
    p1, p2 = tmp_path / "1.wav", tmp_path / "2.wav"
    write_pcm16(p1, rng.integers(-32768, 32768, 2000))
    a = load_wav(p1)
    save_wav(a, p2)
    b = load_wav(p2)
    assert np.max(np.abs(a.samples - b.samples)) <= 1 / 32768


def test_save_into_missing_directory(tmp_path):
    with pytest.raises(AudioWriteError):
        save_wav(AudioBuffer([0.1], 24000), tmp_path / "nope" / "x.wav")


def test_buffer_is_immutable():
    a = AudioBuffer([0.1, 0.2], 24000)
    with pytest.raises(ValueError):
        a.samples[0] = 1.0
