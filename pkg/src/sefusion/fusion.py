"""Fusion of the acoustic-path and modulation-path magnitude estimates.

The two magnitude estimates are combined per time-frequency bin as a convex
combination whose weight depends on the instantaneous SNR (gamma - 1) in dB:
low-SNR regions lean on the modulation path, high-SNR regions on the acoustic
path.  The published piecewise weight jumps at its breakpoints; the default
"continuous" mode interpolates between the printed endpoint values 0.2 and
0.8 instead, while "paper_literal" keeps the printed middle branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp import Spectrogram, Waveform, istft, recombine
from .errors import ConfigError, ShapeError

# Floor inside the log for noise-only frames where mean(gamma) <= 1.
_PSI_EPS = 1e-4

CONTINUITY_MODES = ("continuous", "paper_literal")
SNR_SCOPES = ("per_frame", "per_bin")


@dataclass(frozen=True)
class FusionConfig:
    low_break_db: float = 2.0
    high_break_db: float = 16.0
    weight_floor: float = 0.2
    weight_ceil: float = 0.8
    continuity_mode: str = "continuous"
    snr_scope: str = "per_frame"

    def validate(self) -> None:
        # weight_floor == weight_ceil is permitted as a test hook: it pins
        # the weight and collapses fusion onto a single path.
        if self.weight_floor > self.weight_ceil:
            raise ConfigError("weight_floor must not exceed weight_ceil")
        if not self.low_break_db < self.high_break_db:
            raise ConfigError("low_break_db must be below high_break_db")
        if self.continuity_mode not in CONTINUITY_MODES:
            raise ConfigError(f"unknown continuity mode {self.continuity_mode!r}")
        if self.snr_scope not in SNR_SCOPES:
            raise ConfigError(f"unknown SNR scope {self.snr_scope!r}")


def instantaneous_snr_db(gamma_frame: np.ndarray, scope: str = "per_frame"):
    """Instantaneous SNR psi = gamma - 1 in dB, per frame or per bin.

    gamma_frame is [frames x bins] (or one frame's bins for per_frame use on
    a single frame).
    """
    g = np.asarray(gamma_frame, dtype=np.float64)
    if np.any(g < 0):
        raise ValueError("gamma must be nonnegative")
    if scope == "per_frame":
        base = np.mean(g, axis=-1)
    elif scope == "per_bin":
        base = g
    else:
        raise ConfigError(f"unknown SNR scope {scope!r}")
    out = 10.0 * np.log10(np.maximum(base - 1.0, _PSI_EPS))
    return out if out.ndim else float(out)


def fusion_weight(psi_db, cfg: FusionConfig):
    """SNR-dependent convex-combination weight for the acoustic path."""
    psi = np.asarray(psi_db, dtype=np.float64)
    lo, hi = cfg.low_break_db, cfg.high_break_db
    if cfg.continuity_mode == "continuous":
        middle = cfg.weight_floor + (cfg.weight_ceil - cfg.weight_floor) * (
            (psi - lo) / (hi - lo)
        )
    else:  # paper_literal: middle branch exactly as printed
        middle = (psi - lo) / (hi - lo)
    out = np.where(psi <= lo, cfg.weight_floor,
                   np.where(psi >= hi, cfg.weight_ceil, middle))
    return out if out.ndim else float(out)


def fuse(
    s_acoustic: np.ndarray,
    s_modulation: np.ndarray,
    psi_db: np.ndarray,
    cfg: FusionConfig,
) -> np.ndarray:
    """Phi * S_A + (1 - Phi) * S_M with Phi derived from psi.

    psi_db is per-frame (shape [frames]) or per-bin (shape [frames x bins]).
    """
    s_a = np.asarray(s_acoustic, dtype=np.float64)
    s_m = np.asarray(s_modulation, dtype=np.float64)
    if s_a.shape != s_m.shape:
        raise ShapeError(f"path estimates differ in shape: {s_a.shape} vs {s_m.shape}")
    psi = np.asarray(psi_db, dtype=np.float64)
    if psi.shape == (s_a.shape[0],):
        psi = psi[:, np.newaxis]
    elif psi.shape != s_a.shape:
        raise ShapeError(
            f"psi shape {psi.shape} matches neither the frame axis nor the grid "
            f"{s_a.shape}"
        )
    phi = fusion_weight(psi, cfg)
    return phi * s_a + (1.0 - phi) * s_m


def synthesize(
    fused_mag: np.ndarray, noisy_phase: np.ndarray, like: Spectrogram
) -> Waveform:
    """Waveform from the fused magnitudes and the noisy phase."""
    return istft(recombine(fused_mag, noisy_phase, like))
