"""High-frequency supplementation of converted singing voice.

The converted signal (usually rendered at 24 kHz) is upsampled to the source
rate, gain-matched to the source by the ratio of mean absolute amplitudes,
and its band above the crossover is replaced by the source's:

    diff = mean(|source|) / mean(|converted|)
    out  = highpass(source) + lowpass(converted) * diff
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import AudioBuffer, Encoding, WavFormat, read_wav, to_mono, write_wav
from .dsp import apply_filter, crossover, upsample
from .errors import SilentAudioError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PostProcessConfig:
    crossover_hz: float = 10_000.0
    target_rate_hz: int = 48_000
    num_taps: int = 511
    length_tolerance_samples: int = 0

    def __post_init__(self):
        if not 0 < self.crossover_hz < self.target_rate_hz / 2:
            raise ValidationError(
                f"crossover {self.crossover_hz} Hz must lie in (0, {self.target_rate_hz / 2}) Hz"
            )
        if self.length_tolerance_samples < 0:
            raise ValidationError("length_tolerance_samples must be >= 0")


@dataclass(frozen=True)
class DiffRatio:
    value: float

    def __post_init__(self):
        if not (np.isfinite(self.value) and self.value > 0):
            raise ValidationError(f"Diff ratio must be positive and finite, got {self.value}")

    def __float__(self):
        return self.value


def _check_pair(wav_s: AudioBuffer, wav_c: AudioBuffer) -> None:
    if wav_s.channels != 1 or wav_c.channels != 1:
        raise ValidationError("source and converted audio must be mono")
    if wav_s.sample_rate_hz != wav_c.sample_rate_hz:
        raise ValidationError(
            f"sample rate mismatch: source {wav_s.sample_rate_hz} Hz, converted {wav_c.sample_rate_hz} Hz"
        )
    if wav_s.n_frames != wav_c.n_frames:
        raise ValidationError(f"length mismatch: source {wav_s.n_frames}, converted {wav_c.n_frames} samples")


def compute_diff(wav_s: AudioBuffer, wav_c: AudioBuffer) -> DiffRatio:
    """Full-band ratio of mean absolute amplitudes, source over converted."""
    _check_pair(wav_s, wav_c)
    denom = float(np.mean(np.abs(wav_c.data))) if wav_c.n_frames else 0.0
    if denom == 0.0:
        raise SilentAudioError(
            "converted audio is silent: mean(|converted|) == 0, so the gain ratio "
            "mean(|source|)/mean(|converted|) is undefined (division guard)"
        )
    return DiffRatio(float(np.mean(np.abs(wav_s.data))) / denom)


def supplement_high(wav_s: AudioBuffer, wav_c: AudioBuffer, config: PostProcessConfig = PostProcessConfig()) -> AudioBuffer:
    _check_pair(wav_s, wav_c)
    if wav_s.sample_rate_hz != config.target_rate_hz:
        raise ValidationError(
            f"inputs are at {wav_s.sample_rate_hz} Hz, expected target rate {config.target_rate_hz} Hz"
        )
    diff = compute_diff(wav_s, wav_c).value
    lowpass, highpass = crossover(config.crossover_hz, config.target_rate_hz, config.num_taps)
    high = apply_filter(highpass, wav_s).data
    low = apply_filter(lowpass, wav_c).data
    return wav_s.with_data(high + low * diff)


@dataclass
class PostProcessReport:
    diff: float
    peak: float
    trimmed_samples: int
    crossover_hz: float
    source_samples: int
    converted_samples: int
    upsample_factor: int
    output_samples: int
    output_rate_hz: int
    warnings: list[str] = field(default_factory=list)

    def line(self) -> str:
        return (
            f"diff={self.diff:.6f} peak={self.peak:.6f} trimmed_samples={self.trimmed_samples} "
            f"crossover_hz={self.crossover_hz:g} source_samples={self.source_samples} "
            f"converted_samples={self.converted_samples} upsample_factor={self.upsample_factor} "
            f"output_samples={self.output_samples} output_rate_hz={self.output_rate_hz}"
        )


def align_lengths(wav_s: AudioBuffer, wav_c: AudioBuffer, tolerance: int) -> tuple[AudioBuffer, AudioBuffer, int]:
    """Tail-trim the longer buffer when lengths differ by at most ``tolerance``."""
    gap = wav_s.n_frames - wav_c.n_frames
    if gap == 0:
        return wav_s, wav_c, 0
    if abs(gap) > tolerance:
        raise ValidationError(
            f"length mismatch of {abs(gap)} samples (source {wav_s.n_frames}, upsampled converted "
            f"{wav_c.n_frames}) exceeds tolerance {tolerance}"
        )
    n = min(wav_s.n_frames, wav_c.n_frames)
    return wav_s.with_data(wav_s.data[:n]), wav_c.with_data(wav_c.data[:n]), abs(gap)


def process_buffers(source: AudioBuffer, converted: AudioBuffer, config: PostProcessConfig = PostProcessConfig()) -> tuple[AudioBuffer, PostProcessReport]:
    """In-memory pipeline: mono mixdown, upsampling, alignment, supplementation."""
    source = to_mono(source)
    converted = to_mono(converted)
    if source.sample_rate_hz != config.target_rate_hz:
        raise ValidationError(
            f"source rate {source.sample_rate_hz} Hz differs from target {config.target_rate_hz} Hz; "
            "the source is never resampled"
        )
    if config.target_rate_hz % converted.sample_rate_hz:
        raise ValidationError(
            f"target rate {config.target_rate_hz} Hz is not an integer multiple of the converted "
            f"rate {converted.sample_rate_hz} Hz"
        )
    factor = config.target_rate_hz // converted.sample_rate_hz
    n_converted = converted.n_frames
    converted_up = upsample(converted, factor)
    src, conv, trimmed = align_lengths(source, converted_up, config.length_tolerance_samples)
    warnings = []
    if trimmed:
        msg = f"trimmed {trimmed} tail samples to align source and converted lengths"
        log.warning(msg)
        warnings.append(msg)
    out = supplement_high(src, conv, config)
    report = PostProcessReport(
        diff=compute_diff(src, conv).value,
        peak=float(np.max(np.abs(out.data))) if out.n_frames else 0.0,
        trimmed_samples=trimmed,
        crossover_hz=config.crossover_hz,
        source_samples=source.n_frames,
        converted_samples=n_converted,
        upsample_factor=factor,
        output_samples=out.n_frames,
        output_rate_hz=out.sample_rate_hz,
        warnings=warnings,
    )
    return out, report


def postprocess_pipeline(source_path, converted_path, output_path, config: PostProcessConfig = PostProcessConfig(), encoding: Encoding | None = None) -> PostProcessReport:
    """File-level pipeline; the output is written in the source's encoding unless overridden."""
    source, source_fmt = read_wav(source_path)
    converted, _ = read_wav(converted_path)
    out, report = process_buffers(source, converted, config)
    fmt = WavFormat(encoding or source_fmt.encoding, 1, out.sample_rate_hz)
    write_wav(Path(output_path), out, fmt)
    return report
