"""Command-line front end.

Exit codes: 0 ok, 2 I/O, 3 configuration, 4 codebook mismatch, 5 corrupt stream.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .allocator import GranularityRatios, MixPolicy, mask_statistics, ratios_for_target
from .audio_io import TARGET_SAMPLE_RATE, AudioBuffer, load_wav, normalize_peak, save_wav
from .bitstream import measure_bitrate, pack, unpack
from .entropy import EntropyConfig
from .errors import (
    AudioFormatError,
    ChecksumError,
    CodebookMismatchError,
    ConfigError,
    InsufficientDataError,
    StreamFormatError,
    StructuralError,
    TfcError,
)
from .metrics import mel_distance, snr, stft_distance
from .pipeline import CodecConfig, analyze_signal, decode, encode, prepare
from .rvq import CodebookSet, train_rvq
from .transform import DEFAULT_STRIDE, Level, analyze, downsample_latents

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_MISMATCH, EXIT_CORRUPT = 0, 2, 3, 4, 5
BASE_RATE = TARGET_SAMPLE_RATE / DEFAULT_STRIDE

log = logging.getLogger("tfc")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _require_file(path: Path) -> Path:
    if not path.is_file():
        raise CliError(f"no such file: {path}", EXIT_IO)
    return path


def _require_dir(path: Path) -> Path:
    if not path.is_dir():
        raise CliError(f"no such directory: {path}", EXIT_IO)
    return path


def _require_parent(path: Path) -> Path:
    if not path.parent.resolve().is_dir():
        raise CliError(f"output directory does not exist: {path.parent}", EXIT_IO)
    return path


def _load_codebooks(directory: Path) -> CodebookSet:
    _require_dir(directory)
    try:
        return CodebookSet.load(directory)
    except FileNotFoundError as exc:
        raise CliError(f"missing codebook file: {exc.filename}", EXIT_IO) from exc
    except (StreamFormatError, ChecksumError) as exc:
        raise CliError(f"unreadable codebooks in {directory}: {exc}", EXIT_IO) from exc


def _read_wav(path: Path) -> AudioBuffer:
    try:
        audio = load_wav(path)
    except (OSError, AudioFormatError) as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    if audio.sample_rate != TARGET_SAMPLE_RATE:
        raise CliError(f"{path}: expected {TARGET_SAMPLE_RATE} Hz, got {audio.sample_rate} Hz", EXIT_CONFIG)
    if audio.original_length == 0:
        raise CliError(f"{path}: no samples", EXIT_IO)
    return audio


def _corpus_files(directory: Path) -> list[Path]:
    _require_dir(directory)
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() == ".wav" and p.is_file())
    if not files:
        raise CliError(f"no WAV files in {directory}", EXIT_IO)
    return files


def _parse_ratios(text: str) -> GranularityRatios:
    try:
        return GranularityRatios.parse(text)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc


def _threads() -> int:
    value = os.environ.get("TFC_THREADS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            raise CliError(f"TFC_THREADS must be an integer, got {value!r}", EXIT_CONFIG)
    return os.cpu_count() or 1


# --- subcommands ----------------------------------------------------------------

def cmd_train_codebooks(args) -> int:
    files = _corpus_files(args.corpus_dir)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    fine = []
    for path in files:
        try:
            audio = load_wav(path)
        except (OSError, AudioFormatError) as exc:
            print(f"skipping {path.name}: {exc}", file=sys.stderr)
            continue
        if audio.sample_rate != TARGET_SAMPLE_RATE or audio.original_length == 0:
            print(f"skipping {path.name}: not {TARGET_SAMPLE_RATE} Hz audio", file=sys.stderr)
            continue
        fine.append(analyze(prepare(audio)))
    if not fine:
        raise CliError(f"no readable {TARGET_SAMPLE_RATE} Hz WAV files in {args.corpus_dir}", EXIT_IO)

    latents = {
        Level.FINE: fine,
        Level.MEDIUM: [downsample_latents(z, 2) for z in fine],
        Level.COARSE: [downsample_latents(z, 4) for z in fine],
    }
    books = {}
    for level in Level:
        try:
            cb, distortion = train_rvq(latents[level], args.nq, 1 << args.bits, args.seed, args.iters, level)
        except InsufficientDataError as exc:
            raise CliError(f"{level.value}: {exc}", EXIT_CONFIG) from exc
        for stage, d in enumerate(distortion[1:], start=1):
            print(f"{level.value} stage {stage:2d}: mean squared residual {d:.6g}")
        books[level.value] = cb
    paths = CodebookSet(**books).save(args.out_dir)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_encode(args) -> int:
    _require_file(args.input)
    _require_parent(args.output)
    if args.ratios is not None:
        ratios = _parse_ratios(args.ratios)
    else:
        try:
            ratios = ratios_for_target(args.target_hz, BASE_RATE, args.policy)
        except ConfigError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from exc
    books = _load_codebooks(args.codebooks)
    try:
        config = CodecConfig(books, ratios, args.nq, workers=args.workers)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from exc
    stream = encode(_read_wav(args.input), config)
    args.output.write_bytes(pack(stream))
    report = measure_bitrate(stream)
    print(f"ratios (r_f:r_m:r_c): {ratios}")
    print(f"frames: {stream.num_frames} over {stream.num_slots} coarse slots")
    print(f"realized frame rate: {report.coded_frame_rate:g} Hz")
    print(f"payload: {report.coded_payload_bps:g} bps")
    print(f"file bitrate: {report.total_bps:.1f} bps over {report.duration:.3f} s (payload {report.payload_bps:.1f})")
    return EXIT_OK


def cmd_decode(args) -> int:
    _require_file(args.input)
    _require_parent(args.output)
    books = _load_codebooks(args.codebooks)
    try:
        stream = unpack(args.input.read_bytes())
    except (StreamFormatError, ChecksumError, StructuralError) as exc:
        raise CliError(f"corrupt stream {args.input}: {exc}", EXIT_CORRUPT) from exc
    try:
        audio = decode(stream, CodecConfig(books, n_q=min(stream.n_q, books.num_stages)))
    except CodebookMismatchError as exc:
        raise CliError(str(exc), EXIT_MISMATCH) from exc
    save_wav(audio, args.output)
    print(f"wrote {args.output}: {audio.original_length} samples")
    return EXIT_OK


def cmd_analyze(args) -> int:
    _require_file(args.input)
    _require_parent(args.output)
    ratios = _parse_ratios(args.ratios)
    a = analyze_signal(_read_wav(args.input), ratios, EntropyConfig())
    tracks, masks = a.tracks, a.masks
    levels = masks.levels()
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["fine_index", "time_seconds", "h_f", "h_m", "h_c", "level"])
        for i in range(len(tracks.h_f)):
            w.writerow([i, repr(i / BASE_RATE), repr(float(tracks.h_f[i])), repr(float(tracks.h_m[i // 2])),
                        repr(float(tracks.h_c[i // 4])), levels[i]])
    if args.tracks is not None:
        with open(args.tracks, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["resolution", "frame_index", "time_seconds", "entropy"])
            for level, h in zip(Level, (tracks.h_f, tracks.h_m, tracks.h_c)):
                rate = BASE_RATE / level.factor
                for k, value in enumerate(h):
                    w.writerow([level.value, k, repr(k / rate), repr(float(value))])
    stats = mask_statistics(masks, BASE_RATE)
    print(f"frames: {stats.total_frames} (fine {stats.fine_frames}, medium {stats.medium_frames}, "
          f"coarse {stats.coarse_frames}); realized {stats.realized_rate:g} Hz")
    return EXIT_OK


def _parse_sweep(text: str) -> list[GranularityRatios]:
    items = [s for s in text.split(";") if s.strip()]
    if not items:
        raise CliError("empty --sweep", EXIT_CONFIG)
    return [_parse_ratios(s) for s in items]


def _evaluate_file(path: Path, config: CodecConfig) -> dict:
    audio = _read_wav(path)
    stream = encode(audio, config)
    decoded = decode(unpack(pack(stream)), config)
    ref = normalize_peak(audio)
    ref = AudioBuffer(ref.trimmed(), ref.sample_rate)
    stats = mask_statistics(stream.masks(), BASE_RATE)
    return {
        "realized_hz": stats.realized_rate,
        "payload_bps": stats.realized_rate * stream.n_q * stream.codebook_bits,
        "mel_dist": mel_distance(ref, decoded, config.metrics),
        "stft_dist": stft_distance(ref, decoded, config.metrics),
        "snr_db": snr(ref, decoded),
    }


def cmd_eval(args) -> int:
    files = _corpus_files(args.corpus_dir)
    _require_parent(args.output)
    settings = _parse_sweep(args.sweep)
    books = _load_codebooks(args.codebooks)
    columns = ["realized_hz", "payload_bps", "mel_dist", "stft_dist", "snr_db"]
    with open(args.output, "w", newline="") as fh, ThreadPoolExecutor(_threads()) as pool:
        w = csv.writer(fh)
        w.writerow(["file"] + ["ratios"] + columns)
        for ratios in settings:
            try:
                config = CodecConfig(books, ratios, args.nq)
            except ConfigError as exc:
                raise CliError(str(exc), EXIT_CONFIG) from exc
            rows = []
            for path, row in zip(files, pool.map(lambda p: _evaluate_file(p, config), files)):
                rows.append(row)
                w.writerow([path.name, str(ratios)] + [_fmt(row[c]) for c in columns])
                fh.flush()
            means = {c: float(np.mean([r[c] for r in rows])) for c in columns}
            w.writerow(["MEAN", str(ratios)] + [_fmt(means[c]) for c in columns])
            fh.flush()
            print(f"{ratios}: {means['realized_hz']:g} Hz, {means['payload_bps']:g} bps, "
                  f"mel {means['mel_dist']:.4f}, stft {means['stft_dist']:.4f}, snr {means['snr_db']:.2f} dB")
    return EXIT_OK


def _fmt(value: float) -> str:
    return "inf" if math.isinf(value) else repr(float(value))


# --- entry point ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tfc", description="Variable-frame-rate speech codec")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-codebooks", help="train fine/medium/coarse RVQ codebooks")
    p.add_argument("corpus_dir", type=Path)
    p.add_argument("out_dir", type=Path)
    p.add_argument("--nq", type=int, default=32, help="number of RVQ stages (default 32)")
    p.add_argument("--bits", type=int, default=10, help="bits per index; K = 2**bits (default 10)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, default=20, help="Lloyd iterations per stage")
    p.set_defaults(func=cmd_train_codebooks)

    p = sub.add_parser("encode", help="encode a 24 kHz WAV file to .tfc")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    rate = p.add_mutually_exclusive_group(required=True)
    rate.add_argument("--ratios", help="r_f,r_m,r_c summing to 1")
    rate.add_argument("--target-hz", type=float, help="average frame rate to reach")
    p.add_argument("--policy", choices=[m.value for m in MixPolicy], default=MixPolicy.FINE_COARSE.value)
    p.add_argument("--nq", type=int, default=8)
    p.add_argument("--codebooks", type=Path, required=True)
    p.add_argument("--workers", type=int, default=1, help="threads for the RVQ search")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a .tfc file to WAV")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--codebooks", type=Path, required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("analyze", help="dump entropy tracks and granularity levels as CSV")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--ratios", default="0.4,0.3,0.3")
    p.add_argument("--tracks", type=Path, help="also write per-resolution entropy tracks here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("eval", help="encode/decode a corpus over a sweep of ratios")
    p.add_argument("corpus_dir", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--sweep", default="1,0,0;0.5,0.5,0;0,0,1",
                   help="semicolon-separated ratio triples (default '1,0,0;0.5,0.5,0;0,0,1')")
    p.add_argument("--nq", type=int, default=8)
    p.add_argument("--codebooks", type=Path, required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except CodebookMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (StreamFormatError, ChecksumError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, AudioFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TfcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
