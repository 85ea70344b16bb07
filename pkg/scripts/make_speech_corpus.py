"""Build the small real-speech test corpus under tests/data/speech/.

Sources are test recordings shipped in two source distributions on PyPI:

    pip download --no-deps --no-binary :all: pocketsphinx==5.1.1 pysptk==1.0.1

Unpack both archives and pass their directories. Every recording is
resampled to 24 kHz, split into clips of about 2.5 s and written as
16-bit mono PCM.
"""

import argparse
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

TARGET_RATE = 24000
CLIP_SECONDS = 2.5
MIN_SECONDS = 1.5

# (relative path, sample rate for headerless raw files)
POCKETSPHINX_SOURCES = [
    ("test/data/librivox/sense_and_sensibility_01_austen_64kb-0870.wav", None),
    ("test/data/librivox/sense_and_sensibility_01_austen_64kb-0880.wav", None),
    ("test/data/librivox/sense_and_sensibility_01_austen_64kb-0890.wav", None),
    ("test/data/librivox/sense_and_sensibility_01_austen_64kb-0920.wav", None),
    ("test/data/librivox/sense_and_sensibility_01_austen_64kb-0930.wav", None),
    ("test/data/cards/001.wav", None),
    ("test/data/cards/002.wav", None),
    ("test/data/cards/003.wav", None),
    ("test/data/cards/004.wav", None),
    ("test/data/cards/005.wav", None),
    ("test/data/forever/input_2_16k.wav", None),
    ("test/data/forever/input_4_16k.wav", None),
    ("test/data/goforward.raw", 16000),
    ("test/data/numbers.raw", 16000),
    ("test/regression/chan3.wav", None),
]
PYSPTK_SOURCES = [("pysptk/example_audio_data/arctic_a0007.wav", None)]


def _read(path, raw_rate):
    if raw_rate is not None:
        return raw_rate, np.fromfile(path, dtype="<i2").astype(np.float64) / 32768.0
    rate, data = wavfile.read(path)
    data = data.astype(np.float64) / 32768.0
    if data.ndim == 2:
        data = data.mean(axis=1)
    return rate, data


def _resample(x, rate):
    g = np.gcd(rate, TARGET_RATE)
    return resample_poly(x, TARGET_RATE // g, rate // g)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("pocketsphinx_dir", type=Path)
    parser.add_argument("pysptk_dir", type=Path)
    parser.add_argument("out_dir", type=Path)
    args = parser.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)

    sources = [(args.pocketsphinx_dir / p, r) for p, r in POCKETSPHINX_SOURCES]
    sources += [(args.pysptk_dir / p, r) for p, r in PYSPTK_SOURCES]
    clip = int(CLIP_SECONDS * TARGET_RATE)
    count = 0
    for path, raw_rate in sources:
        rate, x = _read(path, raw_rate)
        y = _resample(x, rate)
        for start in range(0, len(y), clip):
            piece = y[start:start + clip]
            if len(piece) < MIN_SECONDS * TARGET_RATE:
                continue
            peak = np.max(np.abs(piece))
            if peak == 0:
                continue
            pcm = np.round(piece / peak * 0.9 * 32767).astype(np.int16)
            name = f"{count:03d}_{path.stem}_{start // clip}.wav"
            wavfile.write(args.out_dir / name, TARGET_RATE, pcm)
            count += 1
    print(f"wrote {count} clips to {args.out_dir}")


if __name__ == "__main__":
    main()
