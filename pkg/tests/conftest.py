from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from scipy.signal import lfilter

from tfc.rvq import CodebookSet, RvqCodebooks
from tfc.transform import Level

DATA_DIR = Path(__file__).parent / "data"
SPEECH_DIR = DATA_DIR / "speech"

# criterion id -> (title, passed, detail); filled by the acceptance module
ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        title, ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key:2d}. {title}: {detail}")


def random_codebooks(rng: np.random.Generator, n_q: int, bits: int, dim: int = 320,
                     scale: float = 1.0) -> CodebookSet:
    """Untrained codebooks, decaying per stage; good enough to exercise the container."""
    sets = {}
    for level in Level:
        stages = rng.standard_normal((n_q, 1 << bits, dim)) * scale * 0.5 ** np.arange(n_q)[:, None, None]
        sets[level.value] = RvqCodebooks(stages.astype(np.float32).astype(np.float64), level)
    return CodebookSet(**sets)


def speechlike(rng: np.random.Generator, n: int) -> np.ndarray:
    """Noise through a random resonance with a syllable-rate envelope and pauses."""
    pole = 0.9 * np.exp(1j * rng.uniform(0.1, 0.6))
    y = lfilter([1.0], [1.0, -2 * pole.real, abs(pole) ** 2], rng.standard_normal(n))
    env = np.clip(np.sin(2 * np.pi * rng.uniform(2, 5) * np.arange(n) / 24000 + rng.uniform(0, 6)), 0, None)
    y *= env
    return 0.9 * y / np.max(np.abs(y))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_books():
    """4-bit, 8-stage random codebooks shared by pipeline and CLI tests."""
    return random_codebooks(np.random.default_rng(99), n_q=8, bits=4, scale=0.02)


@pytest.fixture(scope="session")
def speech_files():
    files = sorted(SPEECH_DIR.glob("*.wav"))
    assert len(files) >= 20, "speech corpus missing; run scripts/make_speech_corpus.py"
    return files
