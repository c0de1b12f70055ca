"""Linear-phase FIR crossover design, zero-lag filtering, integer upsampling.

The crossover pair is a Blackman-windowed sinc lowpass and its spectral
inversion (unit impulse at the center tap minus the lowpass).  Both are
Type-I symmetric kernels with the same group delay, so

    apply_filter(highpass, x) + apply_filter(lowpass, x) == x

holds exactly up to floating-point rounding.

>>> lp = design_lowpass(10_000, 48_000, 511)
>>> hp = complement(lp)
>>> lp.group_delay_samples
255
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_io import AudioBuffer
from .errors import ValidationError

LOWPASS = "lowpass"
HIGHPASS = "highpass"
MIN_TAPS = 11


@dataclass(frozen=True, eq=False)
class FilterKernel:
    taps: np.ndarray
    kind: str
    cutoff_hz: float
    design_rate_hz: int

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64)
        if taps.ndim != 1 or taps.size % 2 == 0:
            raise ValidationError(f"kernel needs an odd number of taps, got {taps.size}")
        if not np.allclose(taps, taps[::-1], rtol=0.0, atol=1e-12):
            raise ValidationError("kernel taps are not symmetric")
        if self.kind not in (LOWPASS, HIGHPASS):
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        taps.flags.writeable = False
        object.__setattr__(self, "taps", taps)

    @property
    def num_taps(self) -> int:
        return self.taps.size

    @property
    def group_delay_samples(self) -> int:
        return (self.taps.size - 1) // 2

    @property
    def dc_gain(self) -> float:
        return float(self.taps.sum())

    def frequency_response(self, freqs_hz) -> np.ndarray:
        """Complex response at ``freqs_hz`` with the linear-phase delay removed.

        For a symmetric kernel this is real-valued up to rounding.
        """
        f = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
        n = np.arange(self.num_taps) - self.group_delay_samples
        phase = -2j * np.pi * np.outer(f / self.design_rate_hz, n)
        return np.exp(phase) @ self.taps

    def magnitude_db(self, freqs_hz) -> np.ndarray:
        mag = np.abs(self.frequency_response(freqs_hz))
        return 20.0 * np.log10(np.maximum(mag, 1e-300))

    def to_text(self) -> str:
        """One coefficient per line, full ``repr`` precision."""
        return "".join(f"{t!r}\n" for t in self.taps.tolist())

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


def load_taps(path) -> np.ndarray:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    return np.array([float(ln) for ln in lines if ln and not ln.startswith("#")])


def _check_taps(num_taps: int) -> None:
    if num_taps % 2 == 0 or num_taps < MIN_TAPS:
        raise ValidationError(f"num_taps must be odd and >= {MIN_TAPS}, got {num_taps}")


def windowed_sinc(cutoff_hz: float, sample_rate_hz: float, num_taps: int) -> np.ndarray:
    """Blackman-windowed ideal lowpass, normalized to unit DC gain."""
    n = np.arange(num_taps) - (num_taps - 1) / 2
    fc = cutoff_hz / sample_rate_hz
    h = 2.0 * fc * np.sinc(2.0 * fc * n) * np.blackman(num_taps)
    h = h / h.sum()
    # enforce exact symmetry after rounding
    return 0.5 * (h + h[::-1])


def design_lowpass(cutoff_hz: float, sample_rate_hz: int, num_taps: int = 511) -> FilterKernel:
    if not 0 < cutoff_hz < sample_rate_hz / 2:
        raise ValidationError(
            f"cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist ({sample_rate_hz / 2} Hz)"
        )
    _check_taps(num_taps)
    return FilterKernel(windowed_sinc(cutoff_hz, sample_rate_hz, num_taps), LOWPASS, float(cutoff_hz), int(sample_rate_hz))


def complement(lowpass: FilterKernel) -> FilterKernel:
    """Spectral inversion: unit impulse at the center tap minus the lowpass."""
    if lowpass.kind != LOWPASS:
        raise ValidationError(f"complement expects a lowpass kernel, got {lowpass.kind}")
    if abs(lowpass.dc_gain - 1.0) > 1e-6:
        raise ValidationError(f"lowpass DC gain {lowpass.dc_gain} is not unity")
    taps = -lowpass.taps
    taps[lowpass.group_delay_samples] += 1.0
    return FilterKernel(taps, HIGHPASS, lowpass.cutoff_hz, lowpass.design_rate_hz)


def crossover(cutoff_hz: float, sample_rate_hz: int, num_taps: int = 511) -> tuple[FilterKernel, FilterKernel]:
    """Return the complementary ``(lowpass, highpass)`` pair."""
    lp = design_lowpass(cutoff_hz, sample_rate_hz, num_taps)
    return lp, complement(lp)


def convolve_same(taps: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Full direct convolution, trimmed by the group delay to ``len(x)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    delay = (len(taps) - 1) // 2
    full = np.convolve(x, taps)
    return full[delay : delay + x.size]


def apply_filter(kernel: FilterKernel, x: AudioBuffer) -> AudioBuffer:
    if kernel.design_rate_hz != x.sample_rate_hz:
        raise ValidationError(
            f"kernel designed for {kernel.design_rate_hz} Hz applied to a {x.sample_rate_hz} Hz buffer"
        )
    return x.with_data(convolve_same(kernel.taps, x.data))


def default_upsample_taps(factor: int) -> int:
    # 511 taps at x2; transition width stays constant relative to the input rate
    return 256 * factor - 1


def anti_imaging_kernel(factor: int, input_rate_hz: int, num_taps: int | None = None) -> FilterKernel:
    if num_taps is None:
        num_taps = default_upsample_taps(factor)
    out_rate = input_rate_hz * factor
    lp = design_lowpass(input_rate_hz / 2, out_rate, num_taps)
    return lp


def upsample(x: AudioBuffer, factor: int, num_taps: int | None = None) -> AudioBuffer:
    """Zero-stuff by ``factor`` and lowpass at the input Nyquist (gain ``factor``).

    Multichannel buffers are processed channel by channel.

    Evaluated in polyphase form; output sample ``n`` of the zero-stuffed
    convolution only sees the taps ``h[r::factor]`` with ``r = n % factor``.
    """
    if factor < 1:
        raise ValidationError(f"upsampling factor must be >= 1, got {factor}")
    if factor == 1:
        return x
    if x.channels > 1:
        chans = [upsample(AudioBuffer.mono(ch, x.sample_rate_hz), factor, num_taps).data for ch in x.samples]
        return AudioBuffer(np.stack(chans), x.sample_rate_hz * factor)
    data = x.data
    kernel = anti_imaging_kernel(factor, x.sample_rate_hz, num_taps)
    h = kernel.taps * factor
    n_out = data.size * factor
    out_rate = x.sample_rate_hz * factor
    if data.size == 0:
        return AudioBuffer.mono(np.zeros(0), out_rate)
    full = np.zeros(n_out + h.size - 1)
    for r in range(factor):
        phase = np.convolve(data, h[r::factor])
        idx = np.arange(r, full.size, factor)[: phase.size]
        full[idx] = phase[: idx.size]
    delay = kernel.group_delay_samples
    return AudioBuffer.mono(full[delay : delay + n_out], out_rate)


def zero_stuff(data: np.ndarray, factor: int) -> np.ndarray:
    out = np.zeros(len(data) * factor)
    out[::factor] = data
    return out
