"""Data ingestion: CSV matrices, PGM images, WAV audio, spectrograms,
SNR-calibrated noise, and dataset assembly.

All loaders reject malformed input with typed errors so a partially
readable file can never leak into an assembled dataset.
"""

from __future__ import annotations

import json
import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clustering import LabelVector
from .errors import (
    AssemblyError,
    ConfigurationError,
    InvalidValueError,
    PgmError,
    RaggedRowsError,
    WavError,
)
from .matrix import NonNegMatrix


@dataclass(frozen=True)
class StftConfig:
    """Spectrogram framing: Hann window, centered frames every ``hop`` samples."""

    sample_rate: int = 4000
    n_fft: int = 512
    hop: int = 128

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ConfigurationError(f"sample rate must be positive, got {self.sample_rate}")
        if self.n_fft < 2 or self.n_fft & (self.n_fft - 1):
            raise ConfigurationError(f"n_fft must be a power of two, got {self.n_fft}")
        if not 1 <= self.hop <= self.n_fft:
            raise ConfigurationError(
                f"hop must lie in [1, n_fft={self.n_fft}], got {self.hop}"
            )


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (features x samples) with aligned ground truth."""

    y: NonNegMatrix
    truth: LabelVector
    sample_ids: tuple[str, ...]

    def __post_init__(self):
        if not (self.y.cols == len(self.truth) == len(self.sample_ids)):
            raise AssemblyError(
                f"sample count mismatch: matrix has {self.y.cols} columns, "
                f"{len(self.truth)} labels, {len(self.sample_ids)} ids"
            )


def load_matrix_csv(path) -> NonNegMatrix:
    """Parse a headerless comma-separated numeric matrix."""
    try:
        text = Path(path).read_text(encoding="ascii")
    except UnicodeDecodeError as exc:
        raise InvalidValueError(f"{path}: not an ASCII CSV file") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split(",")
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise InvalidValueError(f"{path}:{lineno}: non-numeric entry") from exc
    if not rows:
        raise InvalidValueError(f"{path}: empty matrix")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise RaggedRowsError(f"{path}: rows have differing field counts")
    arr = np.array(rows, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise InvalidValueError(f"{path}: non-finite entry")
    if (arr < 0).any():
        raise InvalidValueError(f"{path}: negative entry")
    return NonNegMatrix(arr)


def write_matrix_csv(values, path) -> None:
    """Write a matrix as headerless CSV with round-trippable floats."""
    arr = values.a if isinstance(values, NonNegMatrix) else np.asarray(values)
    lines = [",".join(repr(float(v)) for v in row) for row in arr]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _pgm_tokens(raw: bytes):
    """Yield header tokens, skipping '#' comments, and the payload offset."""
    pos = 0
    tokens = []
    while len(tokens) < 4 and pos < len(raw):
        c = raw[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            start = pos
            while pos < len(raw) and not raw[pos : pos + 1].isspace():
                pos += 1
            tokens.append(raw[start:pos])
    return tokens, pos + 1  # single whitespace after maxval precedes payload


def load_pgm(path) -> NonNegMatrix:
    """Load an ASCII (P2) or binary (P5) PGM image, scaled to [0, 1]."""
    raw = Path(path).read_bytes()
    tokens, payload_at = _pgm_tokens(raw)
    if len(tokens) < 4 or tokens[0] not in (b"P2", b"P5"):
        raise PgmError(f"{path}: not a P2/P5 PGM header")
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise PgmError(f"{path}: non-integer header field") from exc
    if width < 1 or height < 1 or not 1 <= maxval <= 65535:
        raise PgmError(f"{path}: bad dimensions or maxval in header")
    count = width * height
    if magic == b"P2":
        try:
            values = [int(t) for t in raw[payload_at - 1 :].split()]
        except ValueError as exc:
            raise PgmError(f"{path}: non-integer pixel value") from exc
        if len(values) < count:
            raise PgmError(f"{path}: truncated pixel payload")
        pixels = np.array(values[:count], dtype=np.float64)
    else:
        itemsize = 1 if maxval < 256 else 2
        payload = raw[payload_at : payload_at + count * itemsize]
        if len(payload) < count * itemsize:
            raise PgmError(f"{path}: truncated pixel payload")
        dtype = np.uint8 if itemsize == 1 else np.dtype(">u2")
        pixels = np.frombuffer(payload, dtype=dtype, count=count).astype(np.float64)
    if (pixels > maxval).any():
        raise PgmError(f"{path}: pixel value exceeds maxval")
    return NonNegMatrix((pixels / maxval).reshape(height, width))


def load_wav_mono(path) -> tuple[np.ndarray, int]:
    """Read a 16-bit PCM RIFF WAV as samples in [-1, 1] plus its rate.

    Stereo is averaged to mono; other channel counts and bit depths are
    rejected.
    """
    try:
        with wave.open(str(path), "rb") as handle:
            channels = handle.getnchannels()
            width = handle.getsampwidth()
            rate = handle.getframerate()
            frames = handle.readframes(handle.getnframes())
    except (wave.Error, EOFError) as exc:
        raise WavError(f"{path}: {exc}") from exc
    if width != 2:
        raise WavError(f"{path}: only 16-bit PCM is supported, got {8 * width}-bit")
    if channels not in (1, 2):
        raise WavError(f"{path}: expected mono or stereo, got {channels} channels")
    samples = np.frombuffer(frames, dtype="<i2").astype(np.float64) / 32768.0
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    return samples, rate


def resample_linear(samples, from_rate: float, to_rate: float) -> np.ndarray:
    """Linear-interpolation resampling; output length round(n * to / from)."""
    if from_rate <= 0 or to_rate <= 0:
        raise ConfigurationError("rates must be positive")
    x = np.asarray(samples, dtype=np.float64)
    if from_rate == to_rate:
        return x.copy()
    n_out = int(round(len(x) * to_rate / from_rate))
    positions = np.arange(n_out) * (from_rate / to_rate)
    return np.interp(positions, np.arange(len(x)), x)


def lowpass_moving_average(samples, length: int) -> np.ndarray:
    """Uniform moving-average smoothing kept at the input length.

    Applied before downsampling to tame aliasing; this is deliberately a
    crude filter, not a band-limited design.
    """
    if length < 1:
        raise ConfigurationError(f"filter length must be >= 1, got {length}")
    x = np.asarray(samples, dtype=np.float64)
    if length == 1:
        return x.copy()
    kernel = np.full(length, 1.0 / length)
    return np.convolve(x, kernel, mode="same")


def stft_magnitude(samples, cfg: StftConfig = StftConfig()) -> NonNegMatrix:
    """Hann-windowed magnitude spectrogram, (n_fft/2 + 1) x frames.

    Frames are centered: the signal is reflect-padded by n_fft/2 on both
    sides, giving floor(n / hop) + 1 frames. The window is the periodic
    Hann, whose leakage for a constant input stays within the DC bin and
    its immediate neighbour.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or len(x) == 0:
        raise InvalidValueError("expected a non-empty 1-D sample array")
    pad = cfg.n_fft // 2
    padded = np.pad(x, pad, mode="reflect") if len(x) > 1 else np.repeat(x, 2 * pad + 1)
    frames = len(x) // cfg.hop + 1
    idx = np.arange(cfg.n_fft)[None, :] + cfg.hop * np.arange(frames)[:, None]
    window = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(cfg.n_fft) / cfg.n_fft))
    spectrum = np.fft.rfft(padded[idx] * window, axis=1)
    return NonNegMatrix(np.abs(spectrum).T)


def add_gaussian_noise_snr(m: NonNegMatrix, snr_db: float, seed) -> NonNegMatrix:
    """Add white Gaussian noise at a target SNR, clamping the result at 0.

    The noise field is ``default_rng(seed).normal(0, sigma, m.shape)`` with
    ``sigma**2 = mean(m**2) * 10**(-snr_db / 10)``; the clamp preserves
    non-negativity and slightly raises the effective SNR.
    """
    power = float(np.mean(m.a**2))
    sigma = math.sqrt(power * 10.0 ** (-snr_db / 10.0))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    noisy = m.a + rng.normal(0.0, sigma, size=m.shape)
    return NonNegMatrix(np.maximum(noisy, 0.0))


def _audio_features(path, cfg: StftConfig) -> np.ndarray:
    samples, rate = load_wav_mono(path)
    if rate != cfg.sample_rate:
        if rate > cfg.sample_rate:
            samples = lowpass_moving_average(samples, math.ceil(rate / cfg.sample_rate))
        samples = resample_linear(samples, rate, cfg.sample_rate)
    return stft_magnitude(samples, cfg).a.ravel()


def assemble_dataset(
    sources,
    kind: str,
    stft: StftConfig = StftConfig(),
) -> Dataset:
    """Build a (features x samples) dataset from ``(path, label)`` pairs.

    kind "matrix": each CSV is vectorized row-major into one column.
    kind "image":  PGM images, min-max normalized jointly over the dataset.
    kind "audio":  WAV files through low-pass, resample, and spectrogram.

    Labels may be any hashable values; they are mapped to 0..k-1 in sorted
    string order.
    """
    sources = list(sources)
    if not sources:
        raise AssemblyError("at least one source is required")
    if kind not in ("matrix", "image", "audio"):
        raise ConfigurationError(f"unknown dataset kind {kind!r}")
    for path, label in sources:
        if label is None or str(label) == "":
            raise AssemblyError(f"{path}: unknown label")

    if kind == "image":
        images = [load_pgm(p).a for p, _ in sources]
        lo = min(float(img.min()) for img in images)
        hi = max(float(img.max()) for img in images)
        span = hi - lo
        if span > 0.0:
            images = [(img - lo) / span for img in images]
        else:
            images = [np.zeros_like(img) for img in images]
        columns = [img.ravel() for img in images]
    elif kind == "audio":
        columns = [_audio_features(p, stft) for p, _ in sources]
    else:
        columns = [load_matrix_csv(p).a.ravel() for p, _ in sources]

    width = len(columns[0])
    for (path, _), col in zip(sources, columns):
        if len(col) != width:
            raise AssemblyError(
                f"{path}: feature length {len(col)} does not match first sample {width}"
            )

    classes = sorted({str(label) for _, label in sources})
    index = {c: i for i, c in enumerate(classes)}
    labels = LabelVector.from_sequence(
        [index[str(label)] for _, label in sources], k=len(classes)
    )
    matrix = NonNegMatrix(np.column_stack(columns))
    return Dataset(matrix, labels, tuple(str(p) for p, _ in sources))


def load_manifest(path) -> tuple[list[tuple[str, str]], str, StftConfig]:
    """Read a dataset manifest: paths with labels plus the preprocessing kind.

    Schema: {"kind": "image"|"audio"|"matrix",
             "sources": [{"path": ..., "label": ...}, ...],
             "stft": {"sample_rate": ..., "n_fft": ..., "hop": ...}}  (optional)

    Relative source paths are resolved against the manifest's directory.
    """
    manifest_path = Path(path)
    try:
        payload = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise AssemblyError(f"{path}: invalid JSON manifest: {exc}") from exc
    if not isinstance(payload, dict) or "kind" not in payload or "sources" not in payload:
        raise AssemblyError(f"{path}: manifest needs 'kind' and 'sources'")
    sources = []
    for entry in payload["sources"]:
        if not isinstance(entry, dict) or "path" not in entry or "label" not in entry:
            raise AssemblyError(f"{path}: each source needs 'path' and 'label'")
        resolved = Path(entry["path"])
        if not resolved.is_absolute():
            resolved = manifest_path.parent / resolved
        sources.append((str(resolved), entry["label"]))
    stft_cfg = StftConfig(**payload.get("stft", {}))
    return sources, str(payload["kind"]), stft_cfg
