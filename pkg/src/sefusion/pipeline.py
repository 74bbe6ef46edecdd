"""End-to-end enhancement of one utterance.

Builds the acoustic spectrogram and the shared SNR track, runs the acoustic
(spectral-amplitude gain) and modulation (binary channel selection) paths,
fuses their magnitude estimates with the SNR-dependent weight, and
resynthesizes with the noisy phase.  The standalone modes reuse exactly the
same machinery with the fusion collapsed onto one path:

    fusion        Phi-weighted combination of both paths
    acoustic_only spectral-amplitude path alone
    modmask_only  modulation binary-mask path alone
    modssub_only  modulation-domain spectral subtraction (baseline)
"""

from __future__ import annotations

import numpy as np

from . import dsp, fusion, modmask, stsa
from .config import EnhancementConfig
from .dsp import Waveform
from .errors import ConfigError


def enhance(
    noisy: Waveform,
    cfg: EnhancementConfig,
    noise_ref: Waveform | None = None,
) -> Waveform:
    """Enhance one utterance; output length equals input length."""
    cfg.validate(noisy.sample_rate_hz)
    if cfg.noise_psd_mode == "oracle":
        if noise_ref is None:
            raise ConfigError("oracle noise PSD mode requires a noise reference")
        if len(noise_ref) != len(noisy) or noise_ref.sample_rate_hz != noisy.sample_rate_hz:
            raise ConfigError("noise reference must match the noisy signal exactly")

    spec = dsp.stft(noisy, cfg.acoustic)
    mag, phase = dsp.split_mag_phase(spec)

    noise_power = None
    if cfg.noise_psd_mode == "oracle":
        noise_spec = dsp.stft(noise_ref, cfg.acoustic)
        noise_power = np.square(np.abs(noise_spec.coeffs))
    noise_psd = stsa.estimate_noise_psd(
        np.square(mag), cfg.noise_psd_mode, noise_power
    )
    track = stsa.build_snr_track(spec, noise_psd, cfg.stsa)

    frame_rate = spec.frame_rate_hz
    if cfg.mode == "acoustic_only":
        fused = stsa.enhance_acoustic(spec, track, cfg.stsa)
    elif cfg.mode == "modmask_only":
        fused = modmask.enhance_modulation(
            mag, cfg.modmask, cfg.modulation, frame_rate, mode="mask"
        )
    elif cfg.mode == "modssub_only":
        fused = modmask.enhance_modulation(
            mag, cfg.modmask, cfg.modulation, frame_rate, mode="subtract"
        )
    else:  # fusion
        s_a = stsa.enhance_acoustic(spec, track, cfg.stsa)
        s_m = modmask.enhance_modulation(
            mag, cfg.modmask, cfg.modulation, frame_rate, mode="mask"
        )
        psi = fusion.instantaneous_snr_db(track.gamma, cfg.fusion.snr_scope)
        fused = fusion.fuse(s_a, s_m, psi, cfg.fusion)

    out = fusion.synthesize(fused, phase, spec)
    if len(out) != len(noisy):  # istft already restores source length
        raise AssertionError("synthesis changed the signal length")
    return out
