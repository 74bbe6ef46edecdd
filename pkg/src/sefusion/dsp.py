"""Windowed STFT analysis/synthesis engine.

Used twice in the processing chain: once on the audio signal (acoustic level)
and once on each acoustic-bin magnitude trajectory (modulation level).  One
framing convention and one FFT normalization (unnormalized forward, 1/N
inverse) are fixed here for the whole project.

Framing: frames start at integer multiples of the hop; only frames that lie
fully inside the signal are taken, so num_frames = 1 + (n - window) // hop.
A trailing remainder shorter than one hop is not framed; istft zero-fills it
when restoring the original length.  Signals shorter than one window are
rejected.

Synthesis is weighted overlap-add: each inverse-transformed frame is
multiplied by the analysis window again and the result is divided by the
accumulated per-sample window-square buffer, so any window/hop pair with
nonzero coverage reconstructs exactly (verified by the round-trip tests, not
assumed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FramingError, ShapeError

WINDOW_KINDS = ("hamming", "hann", "rectangular")

# Per-sample WOLA weights below this fraction of the peak weight are treated
# as zero coverage; the corresponding output samples are set to 0.
_COVERAGE_EPS = 1e-8


@dataclass(frozen=True)
class AnalysisConfig:
    """Window/hop/FFT geometry for one STFT level.

    For the modulation level the "samples" are acoustic frames, i.e. the
    trajectory of one acoustic bin is treated as a signal sampled at the
    acoustic frame rate.
    """

    window_len_samples: int
    hop_samples: int
    fft_size: int
    window_kind: str = "hamming"

    def __post_init__(self):
        if self.window_len_samples < 1 or self.hop_samples < 1 or self.fft_size < 1:
            raise ConfigError("window, hop and FFT size must be positive")
        if not (self.hop_samples <= self.window_len_samples <= self.fft_size):
            raise ConfigError(
                f"need hop <= window <= fft_size, got "
                f"{self.hop_samples}/{self.window_len_samples}/{self.fft_size}"
            )
        if self.window_kind not in WINDOW_KINDS:
            raise ConfigError(f"unknown window kind {self.window_kind!r}")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    def window(self) -> np.ndarray:
        n = self.window_len_samples
        if self.window_kind == "hamming":
            return np.hamming(n)
        if self.window_kind == "hann":
            return np.hanning(n)
        return np.ones(n)


@dataclass
class Waveform:
    """Mono time-domain signal, samples nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ShapeError("waveform must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.samples)):
            raise ShapeError("waveform contains non-finite samples")
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample rate must be positive")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass
class Spectrogram:
    """One-sided complex STFT coefficients, [num_frames x num_bins]."""

    coeffs: np.ndarray
    config: AnalysisConfig
    source_len_samples: int
    sample_rate_hz: float

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.ndim != 2:
            raise ShapeError("spectrogram coefficients must be 2-D")
        if self.coeffs.shape[1] != self.config.num_bins:
            raise ShapeError(
                f"expected {self.config.num_bins} bins, got {self.coeffs.shape[1]}"
            )
        expected = num_frames_for(self.source_len_samples, self.config)
        if self.coeffs.shape[0] != expected:
            raise ShapeError(
                f"expected {expected} frames for {self.source_len_samples} samples, "
                f"got {self.coeffs.shape[0]}"
            )

    @property
    def num_frames(self) -> int:
        return self.coeffs.shape[0]

    @property
    def num_bins(self) -> int:
        return self.coeffs.shape[1]

    def bin_frequencies_hz(self) -> np.ndarray:
        return np.arange(self.num_bins) * self.sample_rate_hz / self.config.fft_size

    @property
    def frame_rate_hz(self) -> float:
        return self.sample_rate_hz / self.config.hop_samples


def num_frames_for(source_len: int, cfg: AnalysisConfig) -> int:
    """Number of analysis frames for a signal of the given length."""
    if source_len < cfg.window_len_samples:
        raise FramingError(
            f"signal of {source_len} samples is shorter than one "
            f"{cfg.window_len_samples}-sample window"
        )
    return 1 + (source_len - cfg.window_len_samples) // cfg.hop_samples


def frame_signal(x: np.ndarray, cfg: AnalysisConfig) -> np.ndarray:
    """Slice (..., n) signals into (..., num_frames, window_len) views."""
    x = np.asarray(x, dtype=np.float64)
    nf = num_frames_for(x.shape[-1], cfg)
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.window_len_samples, axis=-1)
    return frames[..., :: cfg.hop_samples, :][..., :nf, :]


def stft_array(x: np.ndarray, cfg: AnalysisConfig) -> np.ndarray:
    """STFT of one signal (n,) or a batch (k, n) -> (..., frames, bins)."""
    frames = frame_signal(x, cfg) * cfg.window()
    return np.fft.rfft(frames, n=cfg.fft_size, axis=-1)


def istft_array(coeffs: np.ndarray, cfg: AnalysisConfig, source_len: int) -> np.ndarray:
    """Weighted overlap-add inverse of stft_array, restored to source_len."""
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.shape[-1] != cfg.num_bins:
        raise ShapeError(f"expected {cfg.num_bins} bins, got {coeffs.shape[-1]}")
    nf = num_frames_for(source_len, cfg)
    if coeffs.shape[-2] != nf:
        raise ShapeError(
            f"expected {nf} frames for {source_len} samples, got {coeffs.shape[-2]}"
        )
    win = cfg.window()
    hop = cfg.hop_samples
    wlen = cfg.window_len_samples
    # inverse FFT, drop the zero-padding tail, apply the synthesis window
    frames = np.fft.irfft(coeffs, n=cfg.fft_size, axis=-1)[..., :wlen] * win

    synth_len = (nf - 1) * hop + wlen
    out = np.zeros(coeffs.shape[:-2] + (synth_len,))
    norm = np.zeros(synth_len)
    wsq = win * win
    for i in range(nf):
        out[..., i * hop : i * hop + wlen] += frames[..., i, :]
        norm[i * hop : i * hop + wlen] += wsq
    covered = norm > _COVERAGE_EPS * norm.max()
    out[..., covered] /= norm[covered]
    out[..., ~covered] = 0.0

    if synth_len >= source_len:
        return out[..., :source_len]
    padded = np.zeros(coeffs.shape[:-2] + (source_len,))
    padded[..., :synth_len] = out
    return padded


def stft(w: Waveform, cfg: AnalysisConfig) -> Spectrogram:
    """One-sided complex spectrogram of a waveform."""
    return Spectrogram(
        coeffs=stft_array(w.samples, cfg),
        config=cfg,
        source_len_samples=len(w),
        sample_rate_hz=w.sample_rate_hz,
    )


def istft(spec: Spectrogram) -> Waveform:
    """Waveform reconstruction; exact on the interior for unmodified spectra."""
    samples = istft_array(spec.coeffs, spec.config, spec.source_len_samples)
    return Waveform(samples=samples, sample_rate_hz=spec.sample_rate_hz)


def split_mag_phase(spec: Spectrogram) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude and phase matrices; zero coefficients get phase 0."""
    return np.abs(spec.coeffs), np.angle(spec.coeffs)


def recombine(mag: np.ndarray, phase: np.ndarray, like: Spectrogram) -> Spectrogram:
    """Rebuild a spectrogram from magnitude/phase on the grid of `like`."""
    mag = np.asarray(mag, dtype=np.float64)
    phase = np.asarray(phase, dtype=np.float64)
    if mag.shape != like.coeffs.shape or phase.shape != like.coeffs.shape:
        raise ShapeError(
            f"magnitude/phase shapes {mag.shape}/{phase.shape} do not match "
            f"spectrogram grid {like.coeffs.shape}"
        )
    return Spectrogram(
        coeffs=mag * np.exp(1j * phase),
        config=like.config,
        source_len_samples=like.source_len_samples,
        sample_rate_hz=like.sample_rate_hz,
    )
