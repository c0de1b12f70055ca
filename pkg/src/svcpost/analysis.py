"""Spectral and pitch analysis: STFT, log-mel spectrograms and their L1
distance, F0 contours with semitone transposition, a normalized
autocorrelation F0 estimator, embedding cosine similarity, and band-energy
measurements used to check the post-processor.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .audio_io import AudioBuffer
from .errors import ValidationError


# -- spectrograms ------------------------------------------------------------


@dataclass(frozen=True)
class SpectrogramConfig:
    n_fft: int = 1024
    hop: int = 256
    n_mels: int = 80
    fmin_hz: float = 0.0
    fmax_hz: float | None = None  # None means sample_rate / 2
    log_floor: float = 1e-5

    def __post_init__(self):
        if self.n_fft < 2 or self.n_fft & (self.n_fft - 1):
            raise ValidationError(f"n_fft must be a power of two, got {self.n_fft}")
        if not 0 < self.hop <= self.n_fft:
            raise ValidationError(f"hop must be in (0, n_fft], got {self.hop}")
        if self.n_mels < 1:
            raise ValidationError("n_mels must be >= 1")
        if self.log_floor <= 0:
            raise ValidationError("log_floor must be > 0")
        if self.fmax_hz is not None and not self.fmin_hz < self.fmax_hz:
            raise ValidationError(f"fmin_hz {self.fmin_hz} must be below fmax_hz {self.fmax_hz}")

    def resolved(self, sample_rate_hz: int) -> "SpectrogramConfig":
        """Copy with ``fmax_hz`` filled in and checked against Nyquist."""
        fmax = sample_rate_hz / 2 if self.fmax_hz is None else self.fmax_hz
        if fmax > sample_rate_hz / 2 or not 0 <= self.fmin_hz < fmax:
            raise ValidationError(
                f"mel range [{self.fmin_hz}, {fmax}] Hz invalid for {sample_rate_hz} Hz audio"
            )
        return replace(self, fmax_hz=float(fmax))

    def header(self) -> str:
        return (
            f"n_fft={self.n_fft} hop={self.hop} n_mels={self.n_mels} fmin_hz={self.fmin_hz!r} "
            f"fmax_hz={self.fmax_hz!r} log_floor={self.log_floor!r}"
        )


def hann(n: int) -> np.ndarray:
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_count(n_samples: int, n_fft: int, hop: int) -> int:
    return 0 if n_samples < n_fft else 1 + (n_samples - n_fft) // hop


def frames(x: np.ndarray, length: int, hop: int) -> np.ndarray:
    count = frame_count(x.size, length, hop)
    return np.lib.stride_tricks.sliding_window_view(x, length)[::hop][:count]


def stft_magnitude(x: AudioBuffer, config: SpectrogramConfig = SpectrogramConfig()) -> np.ndarray:
    """Magnitudes of non-centered Hann-windowed frames, shape (frames, n_fft//2 + 1)."""
    data = x.data
    if data.size < config.n_fft:
        raise ValidationError(f"buffer of {data.size} samples is shorter than one window ({config.n_fft})")
    windowed = frames(data, config.n_fft, config.hop) * hann(config.n_fft)
    return np.abs(np.fft.rfft(windowed, axis=1))


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate_hz: int, n_fft: int, n_mels: int, fmin_hz: float, fmax_hz: float) -> tuple[np.ndarray, np.ndarray]:
    """Triangular HTK-mel filterbank (peak weight 1) and its center frequencies.

    Returns ``(weights, centers_hz)`` with weights shaped (n_mels, n_fft//2 + 1).
    """
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2))
    bins = np.arange(n_fft // 2 + 1) * sample_rate_hz / n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins - lo) / (mid - lo)
    falling = (hi - bins) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling)), edges[1:-1]


@dataclass(frozen=True, eq=False)
class MelSpectrogram:
    values: np.ndarray  # (frames, n_mels), natural-log magnitudes
    config: SpectrogramConfig
    source_rate_hz: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def to_text(self) -> str:
        rows = [f"# {self.config.header()} source_rate_hz={self.source_rate_hz}"]
        rows += [",".join(repr(v) for v in row) for row in self.values.tolist()]
        return "\n".join(rows) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "MelSpectrogram":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#"):
            raise ValidationError("mel file lacks its '# key=value' config header")
        meta = dict(tok.split("=", 1) for tok in lines[0][1:].split())
        try:
            config = SpectrogramConfig(
                n_fft=int(meta["n_fft"]),
                hop=int(meta["hop"]),
                n_mels=int(meta["n_mels"]),
                fmin_hz=float(meta["fmin_hz"]),
                fmax_hz=None if meta["fmax_hz"] == "None" else float(meta["fmax_hz"]),
                log_floor=float(meta["log_floor"]),
            )
            rate = int(meta["source_rate_hz"])
        except KeyError as exc:
            raise ValidationError(f"mel header missing key {exc}") from None
        rows = [[float(v) for v in ln.split(",")] for ln in lines[1:] if ln.strip()]
        values = np.array(rows, dtype=np.float64).reshape(len(rows), config.n_mels)
        return cls(values, config, rate)

    @classmethod
    def load(cls, path) -> "MelSpectrogram":
        return cls.from_text(Path(path).read_text())


def mel_spectrogram(x: AudioBuffer, config: SpectrogramConfig = SpectrogramConfig()) -> MelSpectrogram:
    cfg = config.resolved(x.sample_rate_hz)
    mag = stft_magnitude(x, cfg)
    weights, _ = mel_filterbank(x.sample_rate_hz, cfg.n_fft, cfg.n_mels, cfg.fmin_hz, cfg.fmax_hz)
    mel = mag @ weights.T
    return MelSpectrogram(np.log(np.maximum(mel, cfg.log_floor)), cfg, x.sample_rate_hz)


def mel_l1(a: MelSpectrogram, b: MelSpectrogram) -> float:
    """Mean absolute difference over all cells (a mean, so clip length does not matter)."""
    if a.config != b.config or a.source_rate_hz != b.source_rate_hz:
        raise ValidationError("mel spectrograms were computed with different configs")
    if a.shape != b.shape:
        raise ValidationError(f"mel shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a.values - b.values)))


# -- F0 ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class F0Contour:
    f0_hz: np.ndarray
    voiced: np.ndarray
    hop_seconds: float
    offset_seconds: float = 0.0
    frame_times_s: np.ndarray | None = None  # explicit times as read from a file

    def __post_init__(self):
        f0 = np.array(self.f0_hz, dtype=np.float64)
        voiced = np.array(self.voiced, dtype=bool)
        if f0.shape != voiced.shape or f0.ndim != 1:
            raise ValidationError("f0_hz and voiced must be 1-D and equally long")
        if np.any(f0[voiced] <= 0) or np.any(f0[~voiced] != 0):
            raise ValidationError("f0 must be > 0 on voiced frames and exactly 0 on unvoiced frames")
        object.__setattr__(self, "f0_hz", f0)
        object.__setattr__(self, "voiced", voiced)
        if self.frame_times_s is not None:
            times = np.array(self.frame_times_s, dtype=np.float64)
            if times.shape != f0.shape:
                raise ValidationError("frame_times_s must match the number of frames")
            object.__setattr__(self, "frame_times_s", times)

    @classmethod
    def from_f0(cls, f0_hz, hop_seconds: float, offset_seconds: float = 0.0, frame_times_s=None) -> "F0Contour":
        f0 = np.asarray(f0_hz, dtype=np.float64)
        return cls(f0, f0 > 0, hop_seconds, offset_seconds, frame_times_s)

    def __len__(self) -> int:
        return self.f0_hz.size

    @property
    def times_s(self) -> np.ndarray:
        if self.frame_times_s is not None:
            return self.frame_times_s
        return self.offset_seconds + self.hop_seconds * np.arange(len(self))

    def to_text(self) -> str:
        return "".join(f"{t:.6f} {f:.6f}\n" for t, f in zip(self.times_s.tolist(), self.f0_hz.tolist()))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "F0Contour":
        times, f0 = [], []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValidationError(f"contour line {lineno}: expected 'time_seconds f0_hz', got {line!r}")
            try:
                t, f = float(parts[0]), float(parts[1])
            except ValueError:
                raise ValidationError(f"contour line {lineno}: non-numeric value in {line!r}") from None
            if f < 0 or not np.isfinite(f):
                raise ValidationError(f"contour line {lineno}: invalid f0 {f}")
            times.append(t)
            f0.append(f)
        hop = times[1] - times[0] if len(times) > 1 else 0.0
        if len(times) > 2 and np.max(np.abs(np.diff(times) - hop)) > 1e-5:
            raise ValidationError("contour times are not uniformly spaced")
        return cls.from_f0(f0, hop, times[0] if times else 0.0, times)

    @classmethod
    def load(cls, path) -> "F0Contour":
        return cls.from_text(Path(path).read_text())


def key_ratio(keys: int) -> float:
    """Frequency ratio of a shift by ``keys`` equal-tempered semitones."""
    return 2.0 ** (keys / 12.0)


def shift_f0(contour: F0Contour, keys: int) -> F0Contour:
    f0 = np.where(contour.voiced, contour.f0_hz * key_ratio(keys), 0.0)
    return F0Contour(f0, contour.voiced.copy(), contour.hop_seconds, contour.offset_seconds, contour.frame_times_s)


def _nccf(frames_: np.ndarray, window: int, max_lag: int) -> np.ndarray:
    """Normalized cross-correlation of each frame's head with its lagged copies, lags 0..max_lag."""
    head = frames_[:, :window]
    nfft = 1 << int(np.ceil(np.log2(frames_.shape[1] + window)))
    spec = np.conj(np.fft.rfft(head, nfft, axis=1)) * np.fft.rfft(frames_, nfft, axis=1)
    num = np.fft.irfft(spec, nfft, axis=1)[:, : max_lag + 1]
    sq = np.concatenate([np.zeros((frames_.shape[0], 1)), np.cumsum(frames_**2, axis=1)], axis=1)
    lags = np.arange(max_lag + 1)
    e_head = sq[:, window][:, None]
    e_lag = sq[:, lags + window] - sq[:, lags]
    denom = np.sqrt(e_head * e_lag)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 1e-12, num / denom, 0.0)
    return r


def estimate_f0(
    x: AudioBuffer,
    fmin_hz: float = 50.0,
    fmax_hz: float = 1100.0,
    frame_length: int = 2048,
    hop: int = 256,
    voicing_threshold: float = 0.6,
    peak_fraction: float = 0.9,
) -> F0Contour:
    """Per-frame F0 from the normalized autocorrelation peak.

    The first local maximum reaching ``peak_fraction`` of the frame's best
    correlation is taken, which avoids picking multiples of the period.
    Frames whose best correlation is below ``voicing_threshold`` are unvoiced.
    """
    sr = x.sample_rate_hz
    data = x.data
    min_lag = max(2, int(np.floor(sr / fmax_hz)))
    max_lag = int(np.ceil(sr / fmin_hz))
    if max_lag + 2 >= frame_length:
        raise ValidationError(
            f"frame_length {frame_length} too short for fmin {fmin_hz} Hz at {sr} Hz (needs > {max_lag + 2})"
        )
    window = frame_length - max_lag - 1
    fr = frames(data, frame_length, hop)
    n = fr.shape[0]
    f0 = np.zeros(n)
    if n == 0:
        return F0Contour.from_f0(f0, hop / sr)
    r = _nccf(fr, window, max_lag + 1)
    lo = min_lag
    for i in range(n):
        seg = r[i, lo : max_lag + 1]
        best = seg.max()
        if best < voicing_threshold:
            continue
        row = r[i]
        for lag in range(lo, max_lag + 1):
            if row[lag] >= peak_fraction * best and row[lag] >= row[lag - 1] and row[lag] >= row[lag + 1]:
                break
        else:
            continue
        denom = row[lag - 1] - 2.0 * row[lag] + row[lag + 1]
        delta = 0.5 * (row[lag - 1] - row[lag + 1]) / denom if denom < 0 else 0.0
        f0[i] = sr / (lag + delta)
    return F0Contour.from_f0(f0, hop / sr)


# -- embeddings --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    values: np.ndarray
    name: str | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ValidationError("embedding must be a non-empty 1-D vector")
        if not np.all(np.isfinite(v)):
            raise ValidationError("embedding contains non-finite values")
        object.__setattr__(self, "values", v)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    va = a.values if isinstance(a, EmbeddingVector) else np.asarray(a, dtype=np.float64)
    vb = b.values if isinstance(b, EmbeddingVector) else np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise ValidationError(f"embedding length mismatch: {va.size} vs {vb.size}")
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0 or nb == 0:
        raise ValidationError("cosine similarity undefined for a zero-norm embedding")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def parse_embeddings(text: str, source: str = "<text>") -> list[EmbeddingVector]:
    """One vector per line, comma-separated, with an optional leading ``name:``."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name = None
        if ":" in line:
            name, line = (s.strip() for s in line.split(":", 1))
        try:
            values = [float(tok) for tok in line.split(",")]
        except ValueError:
            raise ValidationError(f"{source} line {lineno}: non-numeric embedding value") from None
        out.append(EmbeddingVector(values, name))
    return out


def load_embeddings(path) -> list[EmbeddingVector]:
    return parse_embeddings(Path(path).read_text(), str(path))


# -- band energies -----------------------------------------------------------


def fractional_octave_edges(start_hz: float, stop_hz: float, fraction: int = 3) -> list[tuple[float, float]]:
    """Contiguous 1/``fraction``-octave bands from ``start_hz`` toward ``stop_hz``.

    Bands grow upward when ``stop_hz > start_hz`` and downward otherwise; a
    band is kept only if it fits entirely inside the range.
    """
    step = 2.0 ** (1.0 / fraction)
    bands = []
    f = start_hz
    if stop_hz > start_hz:
        while f * step <= stop_hz * (1 + 1e-12):
            bands.append((f, f * step))
            f *= step
    else:
        while f / step >= stop_hz * (1 - 1e-12):
            bands.append((f / step, f))
            f /= step
        bands.reverse()
    return bands


def band_energies_db(data: np.ndarray, sample_rate_hz: int, bands) -> np.ndarray:
    """Energy in dB of a Blackman-Harris-windowed spectrum within each ``(lo, hi)`` band."""
    data = np.asarray(data, dtype=np.float64)
    n = data.size
    k = np.arange(n) * 2.0 * np.pi / n
    win = 0.35875 - 0.48829 * np.cos(k) + 0.14128 * np.cos(2 * k) - 0.01168 * np.cos(3 * k)
    power = np.abs(np.fft.rfft(data * win)) ** 2
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate_hz)
    out = []
    for lo, hi in bands:
        e = power[(freqs >= lo) & (freqs < hi)].sum()
        out.append(10.0 * np.log10(max(e, 1e-300)))
    return np.array(out)
