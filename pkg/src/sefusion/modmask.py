"""Modulation-domain enhancement path.

A second STFT is applied to the time trajectory of every acoustic-bin
magnitude, giving a modulation spectrum per acoustic bin.  Components are
kept or discarded by a binary gain: retained iff the modulation-domain SNR is
at or above the threshold AND the modulation frequency is at or below the
cutoff.  The modulation-domain SNR numerator comes from spectral subtraction
in the modulation domain; the noise modulation power is estimated from
speech-absent modulation frames.

Trajectories are reflect-padded by (window - hop) frames on both sides before
the modulation STFT so that, after overlap-add resynthesis and cropping, the
output covers every acoustic frame without envelope discontinuities at the
utterance edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import AnalysisConfig, istft_array, stft_array
from .errors import ConfigError, FramingError, ShapeError

_NOISE_MOD_FLOOR = 1e-12

# Frame-energy VAD: frames this far below the utterance median frame energy
# count as speech-absent.
_VAD_DROP_DB = 15.0


def default_modulation_config() -> AnalysisConfig:
    """256 ms window / 32 ms hop / 64-point FFT at a 16 ms acoustic hop,
    expressed in acoustic frames."""
    return AnalysisConfig(window_len_samples=16, hop_samples=2, fft_size=64,
                          window_kind="hamming")


@dataclass(frozen=True)
class ModMaskParams:
    """Binary channel-selection parameters."""

    eta_th_db: float = -10.0
    mc_hz: float = 4.0
    keep_dc: bool = True
    subtraction_floor: float = 0.01
    noise_frames_init: int = 8

    def validate(self, acoustic_frame_rate_hz: float | None = None) -> None:
        if not (0.0 < self.subtraction_floor < 1.0):
            raise ConfigError("subtraction_floor must be in (0, 1)")
        if self.noise_frames_init < 1:
            raise ConfigError("noise_frames_init must be >= 1")
        if self.mc_hz <= 0:
            raise ConfigError("mc_hz must be positive")
        # <= rather than <: the all-retain identity configuration sets the
        # cutoff exactly at the modulation Nyquist.
        if acoustic_frame_rate_hz is not None and not (
            self.mc_hz <= acoustic_frame_rate_hz / 2.0
        ):
            raise ConfigError(
                f"mc_hz = {self.mc_hz} must not exceed the modulation Nyquist "
                f"{acoustic_frame_rate_hz / 2.0} Hz"
            )


@dataclass
class ModulationSpectrogram:
    """Second-level STFT coefficients, [acoustic bins x mod frames x mod bins]."""

    coeffs: np.ndarray
    mod_config: AnalysisConfig
    acoustic_frame_rate_hz: float

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.ndim != 3:
            raise ShapeError("modulation coefficients must be 3-D")
        if self.coeffs.shape[2] != self.mod_config.num_bins:
            raise ShapeError(
                f"expected {self.mod_config.num_bins} modulation bins, "
                f"got {self.coeffs.shape[2]}"
            )

    @property
    def num_acoustic_bins(self) -> int:
        return self.coeffs.shape[0]

    @property
    def num_mod_frames(self) -> int:
        return self.coeffs.shape[1]

    def mod_bin_spacing_hz(self) -> float:
        return self.acoustic_frame_rate_hz / self.mod_config.fft_size


def modulation_stft(
    acoustic_mag: np.ndarray,
    cfg: AnalysisConfig,
    acoustic_frame_rate_hz: float,
) -> ModulationSpectrogram:
    """Second STFT over each acoustic bin's magnitude trajectory.

    acoustic_mag is [acoustic frames x acoustic bins]; trajectories (columns)
    are the signals here.
    """
    mag = np.asarray(acoustic_mag, dtype=np.float64)
    if mag.ndim != 2:
        raise ShapeError("acoustic magnitude must be 2-D [frames x bins]")
    if mag.shape[0] < cfg.window_len_samples:
        raise FramingError(
            f"need at least {cfg.window_len_samples} acoustic frames for one "
            f"modulation window, got {mag.shape[0]}"
        )
    coeffs = stft_array(mag.T, cfg)  # [bins, mod frames, mod bins]
    return ModulationSpectrogram(
        coeffs=coeffs, mod_config=cfg, acoustic_frame_rate_hz=acoustic_frame_rate_hz
    )


def speech_absence_flags(
    acoustic_mag: np.ndarray, cfg: AnalysisConfig, noise_frames_init: int
) -> np.ndarray:
    """Per-modulation-frame speech-absence booleans.

    A modulation frame is speech-absent when every acoustic frame under its
    window falls 15 dB below the utterance median frame energy.  When the VAD
    marks nothing, the first noise_frames_init modulation frames are used as
    the fallback (mixtures carry a noise-only lead for exactly this reason).
    """
    mag = np.asarray(acoustic_mag, dtype=np.float64)
    energy = np.sum(np.square(mag), axis=1)
    ref = np.median(energy[energy > 0]) if np.any(energy > 0) else 0.0
    if ref > 0:
        absent_acoustic = energy < ref * 10.0 ** (-_VAD_DROP_DB / 10.0)
    else:
        absent_acoustic = np.ones(mag.shape[0], dtype=bool)
    n_mod = 1 + (mag.shape[0] - cfg.window_len_samples) // cfg.hop_samples
    flags = np.zeros(n_mod, dtype=bool)
    for q in range(n_mod):
        s = q * cfg.hop_samples
        flags[q] = bool(np.all(absent_acoustic[s : s + cfg.window_len_samples]))
    if not np.any(flags):
        flags[: min(noise_frames_init, n_mod)] = True
    return flags


def noise_modulation_psd(
    noisy_mod: ModulationSpectrogram, speech_absence: np.ndarray
) -> np.ndarray:
    """Mean modulation power over speech-absent frames, per (bin, mod bin)."""
    flags = np.asarray(speech_absence, dtype=bool)
    if flags.shape != (noisy_mod.num_mod_frames,):
        raise ShapeError("one speech-absence flag per modulation frame required")
    if not np.any(flags):
        raise ConfigError("no speech-absent modulation frames available")
    power = np.square(np.abs(noisy_mod.coeffs[:, flags, :]))
    return np.maximum(power.mean(axis=1), _NOISE_MOD_FLOOR)


def mod_spectral_subtraction(noisy_mod_power, noise_mod_power, floor: float):
    """|S|^2 estimate: max(noisy - noise, floor * noisy)."""
    noisy_mod_power = np.asarray(noisy_mod_power, dtype=np.float64)
    return np.maximum(noisy_mod_power - noise_mod_power, floor * noisy_mod_power)


def mod_snr(clean_est_power, noise_power):
    """Linear modulation-domain SNR; convert to dB only when comparing."""
    return np.asarray(clean_est_power, dtype=np.float64) / noise_power


def binary_gain(
    xi: float,
    m_bin: int,
    params: ModMaskParams,
    frame_rate_hz: float,
    fft_size: int = 64,
) -> int:
    """Binary retention decision for one modulation component.

    Returns 1 iff the linear modulation SNR xi is at or above the threshold
    and the component frequency m_bin * frame_rate/fft_size is at or below
    the cutoff; keep_dc overrides the decision at m_bin = 0.
    """
    if not 0 <= m_bin <= fft_size // 2:
        raise ValueError(f"m_bin must lie in [0, {fft_size // 2}]")
    mask = _mask_from_snr(
        np.asarray(xi, dtype=np.float64),
        np.asarray(m_bin, dtype=np.int64),
        params,
        frame_rate_hz,
        fft_size,
    )
    return int(mask)


def _mask_from_snr(
    xi: np.ndarray,
    m_bins: np.ndarray,
    params: ModMaskParams,
    frame_rate_hz: float,
    fft_size: int,
) -> np.ndarray:
    eta_lin = 10.0 ** (params.eta_th_db / 10.0)
    bin_hz = frame_rate_hz / fft_size
    keep = (xi >= eta_lin) & (m_bins * bin_hz <= params.mc_hz)
    if params.keep_dc:
        keep = keep | (m_bins == 0)
    return keep.astype(np.float64)


def retained_mod_bins(params: ModMaskParams, frame_rate_hz: float, fft_size: int) -> np.ndarray:
    """Modulation bin indices at or below the cutoff frequency."""
    bin_hz = frame_rate_hz / fft_size
    m = np.arange(fft_size // 2 + 1)
    return m[m * bin_hz <= params.mc_hz]


def _reflect_pad_trajectories(mag: np.ndarray, pad: int) -> np.ndarray:
    if pad == 0:
        return mag
    if mag.shape[0] < 2:
        raise FramingError("too few acoustic frames to reflect-pad")
    return np.pad(mag, ((pad, pad), (0, 0)), mode="reflect")


def enhance_modulation(
    acoustic_mag_noisy: np.ndarray,
    params: ModMaskParams,
    cfg: AnalysisConfig | None = None,
    acoustic_frame_rate_hz: float = 62.5,
    mode: str = "mask",
) -> np.ndarray:
    """Modulation-path magnitude estimate aligned to the acoustic frame grid.

    mode="mask":   binary channel selection (noisy modulation phase kept).
    mode="subtract": plain modulation-domain spectral subtraction magnitudes,
                   the standalone baseline.
    """
    if cfg is None:
        cfg = default_modulation_config()
    params.validate(acoustic_frame_rate_hz)
    mag = np.asarray(acoustic_mag_noisy, dtype=np.float64)
    if mag.ndim != 2:
        raise ShapeError("acoustic magnitude must be 2-D [frames x bins]")
    n_frames = mag.shape[0]
    if n_frames < cfg.window_len_samples:
        raise FramingError(
            f"need at least {cfg.window_len_samples} acoustic frames for one "
            f"modulation window, got {n_frames}"
        )

    pad = cfg.window_len_samples - cfg.hop_samples
    padded = _reflect_pad_trajectories(mag, pad)
    noisy_mod = modulation_stft(padded, cfg, acoustic_frame_rate_hz)

    # Noise statistics come from the unpadded portion only; reflected edges
    # would double-count utterance-edge content.
    flags_core = speech_absence_flags(mag, cfg, params.noise_frames_init)
    flags = _lift_flags_to_padded(flags_core, noisy_mod.num_mod_frames, pad, cfg)
    noise_power = noise_modulation_psd(noisy_mod, flags)  # [bins, mod bins]

    noisy_power = np.square(np.abs(noisy_mod.coeffs))  # [bins, q, m]
    clean_est = mod_spectral_subtraction(
        noisy_power, noise_power[:, np.newaxis, :], params.subtraction_floor
    )
    if mode == "mask":
        xi = mod_snr(clean_est, noise_power[:, np.newaxis, :])
        m_bins = np.arange(cfg.num_bins)[np.newaxis, np.newaxis, :]
        weight = _mask_from_snr(xi, m_bins, params, acoustic_frame_rate_hz, cfg.fft_size)
        coeffs = noisy_mod.coeffs * weight
    elif mode == "subtract":
        target_mag = np.sqrt(clean_est)
        noisy_mag = np.abs(noisy_mod.coeffs)
        scale = np.divide(
            target_mag, noisy_mag, out=np.zeros_like(target_mag), where=noisy_mag > 0
        )
        coeffs = noisy_mod.coeffs * scale
    else:
        raise ConfigError(f"unknown modulation mode {mode!r}")

    resynth = istft_array(coeffs, cfg, padded.shape[0])  # [bins, padded frames]
    out = resynth[:, pad : pad + n_frames].T
    return np.maximum(out, 0.0)


def _lift_flags_to_padded(
    flags_core: np.ndarray, n_mod_padded: int, pad: int, cfg: AnalysisConfig
) -> np.ndarray:
    """Map speech-absence flags computed on the raw frame grid onto the
    modulation frames of the reflect-padded grid (padding frames: not absent)."""
    flags = np.zeros(n_mod_padded, dtype=bool)
    for q in range(n_mod_padded):
        start = q * cfg.hop_samples - pad  # position on the raw grid
        q_core = start // cfg.hop_samples
        if start >= 0 and start % cfg.hop_samples == 0 and q_core < flags_core.size:
            flags[q] = flags_core[q_core]
    if not np.any(flags):
        flags[min(pad // cfg.hop_samples, n_mod_padded - 1)] = True
    return flags
