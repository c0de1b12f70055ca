"""Lossless RIFF/WAVE reading and writing plus mono mixdown.

Samples are held as float64 arrays of shape ``(channels, frames)``.  Integer
PCM is normalized by ``2**(bits - 1)``, so -1.0 is reachable and +1.0 is not.
"""

from __future__ import annotations

import enum
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError, WavFormatError

_FORMAT_PCM = 1
_FORMAT_FLOAT = 3
_FORMAT_EXTENSIBLE = 0xFFFE


class Encoding(enum.Enum):
    PCM16 = "pcm16"
    PCM24 = "pcm24"
    FLOAT32 = "float32"

    @property
    def bytes_per_sample(self) -> int:
        return {"pcm16": 2, "pcm24": 3, "float32": 4}[self.value]

    @property
    def bits(self) -> int:
        return 8 * self.bytes_per_sample

    @property
    def is_integer(self) -> bool:
        return self is not Encoding.FLOAT32


@dataclass(frozen=True)
class WavFormat:
    encoding: Encoding
    channels: int
    sample_rate_hz: int

    def __post_init__(self):
        if self.channels < 1:
            raise ValidationError(f"channels must be >= 1, got {self.channels}")
        if self.sample_rate_hz <= 0:
            raise ValidationError(f"sample rate must be > 0, got {self.sample_rate_hz}")

    @property
    def block_align(self) -> int:
        return self.channels * self.encoding.bytes_per_sample


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Sampled waveform, ``samples`` shaped ``(channels, frames)``."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValidationError(f"samples must be 1-D or (channels, frames), got shape {arr.shape}")
        if int(self.sample_rate_hz) <= 0:
            raise ValidationError(f"sample rate must be > 0, got {self.sample_rate_hz}")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @classmethod
    def mono(cls, data, sample_rate_hz: int) -> "AudioBuffer":
        return cls(np.asarray(data, dtype=np.float64)[np.newaxis, :], sample_rate_hz)

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_frames(self) -> int:
        return self.samples.shape[1]

    def __len__(self) -> int:
        return self.n_frames

    @property
    def data(self) -> np.ndarray:
        """The single channel of a mono buffer as a 1-D array."""
        if self.channels != 1:
            raise ValidationError(f"expected a mono buffer, got {self.channels} channels")
        return self.samples[0]

    @property
    def duration_s(self) -> float:
        return self.n_frames / self.sample_rate_hz

    def with_data(self, data, sample_rate_hz: int | None = None) -> "AudioBuffer":
        return AudioBuffer(data, self.sample_rate_hz if sample_rate_hz is None else sample_rate_hz)

    def __eq__(self, other):
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return (
            self.sample_rate_hz == other.sample_rate_hz
            and self.samples.shape == other.samples.shape
            and bool(np.array_equal(self.samples, other.samples))
        )

    __hash__ = None


def to_mono(buffer: AudioBuffer) -> AudioBuffer:
    if buffer.channels == 1:
        return buffer
    return AudioBuffer(buffer.samples.mean(axis=0), buffer.sample_rate_hz)


# -- reading ---------------------------------------------------------------


def _parse_fmt(body: bytes, offset: int) -> tuple[int, int, int, int]:
    if len(body) < 16:
        raise WavFormatError(f"fmt chunk too short ({len(body)} bytes)", offset)
    tag, channels, rate, _byte_rate, _block_align, bits = struct.unpack("<HHIIHH", body[:16])
    if tag == _FORMAT_EXTENSIBLE:
        if len(body) < 40:
            raise WavFormatError("WAVE_FORMAT_EXTENSIBLE fmt chunk too short", offset)
        tag = struct.unpack("<H", body[24:26])[0]
    return tag, channels, rate, bits


def _encoding_for(tag: int, bits: int, offset: int) -> Encoding:
    if tag == _FORMAT_PCM and bits == 16:
        return Encoding.PCM16
    if tag == _FORMAT_PCM and bits == 24:
        return Encoding.PCM24
    if tag == _FORMAT_FLOAT and bits == 32:
        return Encoding.FLOAT32
    raise WavFormatError(f"unsupported encoding: format tag {tag}, {bits} bits per sample", offset)


def decode_samples(raw: bytes, encoding: Encoding, channels: int) -> np.ndarray:
    """Decode interleaved little-endian sample bytes to ``(channels, frames)``."""
    width = encoding.bytes_per_sample
    n = len(raw) // (width * channels)
    raw = raw[: n * width * channels]
    if encoding is Encoding.PCM16:
        flat = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif encoding is Encoding.PCM24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
        flat = ints.astype(np.float64) / float(1 << 23)
    else:
        flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    return flat.reshape(n, channels).T


def read_wav(path) -> tuple[AudioBuffer, WavFormat]:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12:
        raise WavFormatError(f"{path}: file too short for a RIFF header ({len(data)} bytes)", 0)
    riff, _riff_size, wave = struct.unpack("<4sI4s", data[:12])
    if riff != b"RIFF" or wave != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file", 0)

    fmt: tuple[int, int, int, int] | None = None
    fmt_offset = 0
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack("<4sI", data[pos : pos + 8])
        body_start = pos + 8
        if cid == b"fmt ":
            if body_start + size > len(data):
                raise WavFormatError(f"{path}: fmt chunk size {size} overruns file", pos)
            fmt = _parse_fmt(data[body_start : body_start + size], pos)
            fmt_offset = pos
        elif cid == b"data":
            if fmt is None:
                raise WavFormatError(f"{path}: data chunk before fmt chunk", pos)
            if body_start + size > len(data):
                raise WavFormatError(
                    f"{path}: data chunk size {size} overruns file ({len(data) - body_start} bytes available)",
                    pos,
                )
            tag, channels, rate, bits = fmt
            encoding = _encoding_for(tag, bits, fmt_offset)
            try:
                wav_format = WavFormat(encoding, channels, rate)
            except ValidationError as exc:
                raise WavFormatError(f"{path}: {exc}", fmt_offset) from None
            if size % wav_format.block_align:
                raise WavFormatError(
                    f"{path}: data size {size} is not a multiple of block size {wav_format.block_align}",
                    pos,
                )
            samples = decode_samples(data[body_start : body_start + size], encoding, channels)
            return AudioBuffer(samples, rate), wav_format
        elif body_start + size > len(data):
            raise WavFormatError(f"{path}: chunk {cid!r} size {size} overruns file", pos)
        pos = body_start + size + (size & 1)
    if fmt is None:
        raise WavFormatError(f"{path}: no fmt chunk", pos)
    raise WavFormatError(f"{path}: no data chunk", pos)


# -- writing ---------------------------------------------------------------


def encode_samples(samples: np.ndarray, encoding: Encoding) -> bytes:
    """Interleave and encode ``(channels, frames)`` floats; integer encodings clamp."""
    inter = np.ascontiguousarray(np.asarray(samples, dtype=np.float64).T).reshape(-1)
    if encoding is Encoding.FLOAT32:
        return inter.astype("<f4").tobytes()
    scale = float(1 << (encoding.bits - 1))
    q = np.clip(np.round(inter * scale), -scale, scale - 1).astype(np.int32)
    if encoding is Encoding.PCM16:
        return q.astype("<i2").tobytes()
    u = (q & 0xFFFFFF).astype("<u4")
    return u.view(np.uint8).reshape(-1, 4)[:, :3].tobytes()


def wav_bytes(buffer: AudioBuffer, fmt: WavFormat) -> bytes:
    if buffer.channels != fmt.channels:
        raise ValidationError(f"buffer has {buffer.channels} channels, format declares {fmt.channels}")
    if buffer.sample_rate_hz != fmt.sample_rate_hz:
        raise ValidationError(f"buffer rate {buffer.sample_rate_hz} != format rate {fmt.sample_rate_hz}")
    if not np.all(np.isfinite(buffer.samples)):
        raise ValidationError("cannot write non-finite (NaN/Inf) amplitudes")
    payload = encode_samples(buffer.samples, fmt.encoding)
    tag = _FORMAT_FLOAT if fmt.encoding is Encoding.FLOAT32 else _FORMAT_PCM
    width = fmt.encoding.bytes_per_sample
    fmt_body = struct.pack(
        "<HHIIHH", tag, fmt.channels, fmt.sample_rate_hz,
        fmt.sample_rate_hz * fmt.block_align, fmt.block_align, 8 * width,
    )
    pad = b"\x00" if len(payload) & 1 else b""
    chunks = b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body
    chunks += b"data" + struct.pack("<I", len(payload)) + payload + pad
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


def write_wav(path, buffer: AudioBuffer, fmt: WavFormat) -> None:
    """Write atomically: the target is only replaced once encoding succeeded."""
    blob = wav_bytes(buffer, fmt)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
