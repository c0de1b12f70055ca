"""High-frequency supplementation post-processing and evaluation tools for
singing voice conversion."""

from .analysis import (
    EmbeddingVector,
    F0Contour,
    MelSpectrogram,
    SpectrogramConfig,
    cosine_similarity,
    estimate_f0,
    mel_l1,
    mel_spectrogram,
    shift_f0,
    stft_magnitude,
)
from .audio_io import AudioBuffer, Encoding, WavFormat, read_wav, to_mono, write_wav
from .dsp import FilterKernel, apply_filter, complement, design_lowpass, upsample
from .errors import SilentAudioError, ValidationError, WavFormatError
from .evaluation import (
    ManifestEntry,
    MosCell,
    RatingRecord,
    aggregate_report,
    load_manifest,
    load_ratings,
    mos_with_ci,
    select_subset,
)
from .postprocess import DiffRatio, PostProcessConfig, compute_diff, postprocess_pipeline, supplement_high

__version__ = "0.1.0"
