import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from oracles import mel_energies_loop

from svcpost.analysis import (
    EmbeddingVector,
    F0Contour,
    MelSpectrogram,
    SpectrogramConfig,
    band_energies_db,
    cosine_similarity,
    estimate_f0,
    fractional_octave_edges,
    hann,
    key_ratio,
    load_embeddings,
    mel_filterbank,
    mel_l1,
    mel_spectrogram,
    shift_f0,
    stft_magnitude,
)
from svcpost.audio_io import AudioBuffer
from svcpost.errors import ValidationError

SR = 24_000


def tone(freq, seconds=1.0, sr=SR, amp=0.5):
    t = np.arange(int(seconds * sr)) / sr
    return AudioBuffer.mono(amp * np.sin(2 * np.pi * freq * t), sr)


# -- STFT --------------------------------------------------------------------


def test_stft_dc():
    cfg = SpectrogramConfig()
    mag = stft_magnitude(AudioBuffer.mono(np.full(4096, 0.25), SR), cfg)
    assert mag[:, 0] == pytest.approx(0.25 * hann(1024).sum(), abs=1e-6)
    # the periodic Hann main lobe puts exactly half of bin 0 into bin 1
    assert mag[:, 1] == pytest.approx(mag[:, 0] / 2, rel=1e-9)
    assert np.all(mag[:, 0] / np.maximum(mag[:, 2:].max(axis=1), 1e-300) >= 1e6)


@pytest.mark.parametrize("k", [5, 37, 200])
def test_stft_bin_centered_sine(k):
    freq = k * SR / 1024
    mag = stft_magnitude(tone(freq, 0.5))
    assert np.all(np.argmax(mag, axis=1) == k)


def test_stft_parseval(rng):
    x = rng.normal(size=1024)
    mag = stft_magnitude(AudioBuffer.mono(x, SR))[0]
    w = hann(1024)
    time_energy = sum((x[i] * w[i]) ** 2 for i in range(1024))
    freq_energy = (mag[0] ** 2 + 2 * np.sum(mag[1:-1] ** 2) + mag[-1] ** 2) / 1024
    assert freq_energy == pytest.approx(time_energy, rel=1e-6)


def test_stft_frame_count():
    cfg = SpectrogramConfig(n_fft=256, hop=100)
    for n in (256, 355, 356, 1000):
        assert stft_magnitude(AudioBuffer.mono(np.zeros(n), SR), cfg).shape[0] == 1 + (n - 256) // 100


def test_stft_too_short():
    with pytest.raises(ValidationError, match="shorter than one window"):
        stft_magnitude(AudioBuffer.mono(np.zeros(1000), SR))


@pytest.mark.parametrize("kwargs", [dict(n_fft=1000), dict(hop=2048), dict(hop=0), dict(fmin_hz=100, fmax_hz=50), dict(log_floor=0)])
def test_config_validation(kwargs):
    with pytest.raises(ValidationError):
        SpectrogramConfig(**kwargs)


def test_config_fmax_above_nyquist():
    with pytest.raises(ValidationError):
        mel_spectrogram(AudioBuffer.mono(np.zeros(2048), SR), SpectrogramConfig(fmax_hz=20_000))


# -- mel ---------------------------------------------------------------------


def test_mel_silence_is_floor():
    mel = mel_spectrogram(AudioBuffer.mono(np.zeros(4096), SR))
    assert np.all(mel.values == math.log(1e-5))
    assert mel.shape == (1 + (4096 - 1024) // 256, 80)


def test_filterbank_centers_increase():
    weights, centers = mel_filterbank(SR, 1024, 80, 0.0, SR / 2)
    assert np.all(np.diff(centers) > 0)
    assert np.all(np.diff(np.argmax(weights, axis=1)) >= 0)
    assert weights.shape == (80, 513)
    assert np.all(weights >= 0) and np.all(weights <= 1)


def test_htk_mel_scale():
    _, centers = mel_filterbank(SR, 1024, 1, 0.0, 2 * 700.0)
    # single band: its center sits halfway between 0 and mel(1400) on the mel axis
    half_mel = 2595 * math.log10(1 + 1400 / 700) / 2
    assert centers[0] == pytest.approx(700 * (10 ** (half_mel / 2595) - 1), rel=1e-12)


def test_mel_matches_loop_oracle(rng):
    cfg = SpectrogramConfig(n_fft=256, hop=128, n_mels=12).resolved(SR)
    x = AudioBuffer.mono(rng.normal(size=1024), SR)
    mag = stft_magnitude(x, cfg)
    weights, _ = mel_filterbank(SR, 256, 12, 0.0, SR / 2)
    expected = np.log(np.maximum(mel_energies_loop(mag, weights), 1e-5))
    got = mel_spectrogram(x, cfg).values
    assert np.max(np.abs(np.exp(got) - np.exp(expected))) <= 1e-10


def test_mel_values_respect_floor(rng):
    mel = mel_spectrogram(AudioBuffer.mono(rng.normal(size=5000) * 1e-9, SR))
    assert np.all(mel.values >= math.log(1e-5))


def _mel(values):
    return MelSpectrogram(np.asarray(values, dtype=float), SpectrogramConfig(n_mels=len(values[0])), SR)


def test_mel_l1_hand_example():
    assert mel_l1(_mel([[0, 1], [2, 3]]), _mel([[1, 1], [1, 1]])) == 1.0


def test_mel_l1_errors():
    with pytest.raises(ValidationError, match="shape"):
        mel_l1(_mel([[0, 1]]), _mel([[0, 1], [1, 1]]))
    other = MelSpectrogram(np.zeros((1, 2)), SpectrogramConfig(n_mels=2, hop=128), SR)
    with pytest.raises(ValidationError, match="config"):
        mel_l1(_mel([[0, 1]]), other)


def test_mel_text_roundtrip(tmp_path, rng):
    mel = mel_spectrogram(AudioBuffer.mono(rng.normal(size=3000), SR), SpectrogramConfig(n_mels=10))
    mel.save(tmp_path / "m.txt")
    back = MelSpectrogram.load(tmp_path / "m.txt")
    assert back.config == mel.config and back.source_rate_hz == SR
    assert np.array_equal(back.values, mel.values)
    assert (tmp_path / "m.txt").read_text().startswith("# n_fft=1024 hop=256 n_mels=10")


mel_st = arrays(np.float64, (3, 4), elements=st.floats(-12, 5, allow_nan=False))


@settings(max_examples=50, deadline=None)
@given(mel_st, mel_st, mel_st)
def test_mel_l1_pseudometric(a, b, c):
    A, B, C = _mel(a), _mel(b), _mel(c)
    assert mel_l1(A, A) == 0
    assert mel_l1(A, B) >= 0
    assert mel_l1(A, B) == mel_l1(B, A)
    assert mel_l1(A, C) <= mel_l1(A, B) + mel_l1(B, C) + 1e-12


# -- F0 ------------------------------------------------------------------------


def contour(values, hop=0.01):
    return F0Contour.from_f0(values, hop)


def test_contour_invariants():
    with pytest.raises(ValidationError):
        F0Contour([100.0, 0.0], [True, True], 0.01)
    with pytest.raises(ValidationError):
        F0Contour([100.0, 5.0], [True, False], 0.01)


def test_shift_identity_and_octave():
    c = contour([0, 200, 220.5, 0, 100])
    assert np.array_equal(shift_f0(c, 0).f0_hz, c.f0_hz)
    up = shift_f0(c, 12)
    assert up.f0_hz.tolist() == [0, 400, 441, 0, 200]
    assert np.array_equal(up.voiced, c.voiced)


def test_four_keys():
    assert key_ratio(4) == 2 ** (1 / 3)
    assert key_ratio(4) == pytest.approx(1.259921, abs=1e-6)
    out = shift_f0(contour([200.0] * 3), 4)
    assert out.f0_hz.tolist() == [200.0 * 2 ** (1 / 3)] * 3


@settings(max_examples=50, deadline=None)
@given(st.lists(st.one_of(st.just(0.0), st.floats(20, 2000)), min_size=1, max_size=50), st.integers(-24, 24))
def test_shift_roundtrip(values, k):
    c = contour(values)
    back = shift_f0(shift_f0(c, k), -k)
    v = c.voiced
    assert np.array_equal(back.voiced, v)
    assert np.all(np.abs(back.f0_hz[v] - c.f0_hz[v]) <= 1e-9 * c.f0_hz[v])
    assert np.all(back.f0_hz[~v] == 0)


def test_contour_text_roundtrip(tmp_path):
    c = F0Contour.from_f0([0, 200, 251.984, 0], 256 / 24_000)
    c.save(tmp_path / "c.f0")
    text = (tmp_path / "c.f0").read_text()
    assert text.splitlines()[1] == "0.010667 200.000000"
    back = F0Contour.load(tmp_path / "c.f0")
    assert back.f0_hz.tolist() == c.f0_hz.tolist()
    assert back.to_text() == text


def test_contour_parse_errors():
    with pytest.raises(ValidationError, match="line 2"):
        F0Contour.from_text("0.0 100\n0.01\n")
    with pytest.raises(ValidationError, match="invalid f0"):
        F0Contour.from_text("0.0 -5\n")


def test_estimate_silence():
    c = estimate_f0(AudioBuffer.mono(np.zeros(SR), SR))
    assert len(c) == 1 + (SR - 2048) // 256
    assert not c.voiced.any()


@pytest.mark.parametrize("sr", [24_000, 48_000])
def test_estimate_440(sr):
    c = estimate_f0(tone(440, sr=sr))
    assert c.voiced.mean() > 0.9
    assert np.all(np.abs(c.f0_hz[c.voiced] - 440) <= 1.0)


@pytest.mark.parametrize("sr", [24_000, 48_000])
def test_estimate_110_with_noise(sr, rng):
    x = tone(110, sr=sr).data
    noise = rng.normal(size=x.size) * np.sqrt(np.mean(x**2) / 100)  # 20 dB SNR
    c = estimate_f0(AudioBuffer.mono(x + noise, sr))
    assert c.voiced.mean() > 0.9
    assert np.all(np.abs(c.f0_hz[c.voiced] - 110) <= 2.0)


def test_estimate_noise_unvoiced(rng):
    c = estimate_f0(AudioBuffer.mono(rng.normal(size=SR), SR))
    assert c.voiced.mean() < 0.1


@pytest.mark.parametrize("base", [110.0, 196.0, 330.0])
def test_estimator_tracks_key_shift(base):
    a = estimate_f0(tone(base))
    b = estimate_f0(tone(base * key_ratio(4)))
    ratio = np.median(b.f0_hz[b.voiced]) / np.median(a.f0_hz[a.voiced])
    assert abs(ratio / 2 ** (4 / 12) - 1) <= 0.01


def test_estimate_bad_frame():
    with pytest.raises(ValidationError):
        estimate_f0(tone(100), fmin_hz=10, frame_length=1024)


# -- embeddings ----------------------------------------------------------------


def test_cosine_examples():
    assert cosine_similarity(EmbeddingVector([1.0, 0.0]), EmbeddingVector([0.0, 1.0])) == 0.0
    assert cosine_similarity(EmbeddingVector([1.0, 0.0]), EmbeddingVector([1.0, 1.0])) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    a = EmbeddingVector([0.3, -2.0, 5.0])
    assert cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-15)


def test_cosine_errors():
    with pytest.raises(ValidationError, match="zero-norm"):
        cosine_similarity(EmbeddingVector([0.0, 0.0]), EmbeddingVector([1.0, 0.0]))
    with pytest.raises(ValidationError, match="length"):
        cosine_similarity(EmbeddingVector([1.0]), EmbeddingVector([1.0, 0.0]))
    with pytest.raises(ValidationError):
        EmbeddingVector([1.0, float("nan")])


vec_st = arrays(np.float64, 8, elements=st.floats(-10, 10, allow_nan=False)).filter(lambda v: np.linalg.norm(v) > 1e-3)


@settings(max_examples=50, deadline=None)
@given(vec_st, vec_st, st.floats(1e-3, 1e3))
def test_cosine_scale_invariant(a, b, k):
    s = cosine_similarity(EmbeddingVector(a), EmbeddingVector(b))
    assert -1.0 <= s <= 1.0
    assert cosine_similarity(EmbeddingVector(k * a), EmbeddingVector(b)) == pytest.approx(s, abs=1e-12)


def test_embedding_file(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("spk1: 1.0, 2.0, 3.0\n\n0.5,0.5,0.5\n")
    vecs = load_embeddings(p)
    assert [v.name for v in vecs] == ["spk1", None]
    assert vecs[0].values.tolist() == [1.0, 2.0, 3.0]
    p.write_text("a: 1.0, x\n")
    with pytest.raises(ValidationError, match="line 1"):
        load_embeddings(p)


# -- band energies -------------------------------------------------------------


def test_fractional_octave_edges():
    up = fractional_octave_edges(1000, 8000)
    assert len(up) == 9 and up[0][0] == 1000 and up[-1][1] == pytest.approx(8000)
    down = fractional_octave_edges(9000, 100)
    assert down[-1][1] == 9000 and all(lo >= 100 for lo, _ in down)
    assert all(a[1] == pytest.approx(b[0]) for a, b in zip(down, down[1:]))


def test_band_energies_match_oracle(rng):
    from oracles import band_db

    x = rng.normal(size=10_000)
    bands = [(100, 500), (3000, 6000)]
    got = band_energies_db(x, SR, bands)
    assert got == pytest.approx([band_db(x, SR, lo, hi) for lo, hi in bands], abs=1e-9)
