"""Audio file I/O, resampling, active-speech-level measurement and mixing.

WAV support is deliberately narrow: RIFF/WAVE, PCM 16-bit little-endian,
mono.  Stereo is rejected rather than downmixed so that test material cannot
silently change level.

The active speech level follows ITU-T P.56 Method B: a two-stage exponential
envelope (30 ms time constant), activity counted with a 200 ms hangover, and
the level/threshold margin fixed at 15.9 dB.  Mixtures are scaled so that the
clean signal's active speech level minus the noise power measured over the
speech-active span equals the requested SNR.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import firwin, lfilter, upfirdn

from .dsp import Waveform
from .errors import ConfigError, SefusionError, WavFormatError

# P.56 Method B constants (external standard, not tuned here).
P56_TIME_CONSTANT_S = 0.03
P56_MARGIN_DB = 15.9
P56_HANGOVER_S = 0.2

_FULL_SCALE = 32768.0


# ---------------------------------------------------------------------------
# WAV reading / writing
# ---------------------------------------------------------------------------

def read_wav(path) -> Waveform:
    """Read a mono PCM16 WAV file; samples are scaled by 1/32768."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavFormatError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(raw):
        cid = raw[pos : pos + 4]
        (csize,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + csize]
        if cid == b"fmt ":
            if len(body) < 16:
                raise WavFormatError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            if len(body) < csize:
                raise WavFormatError(
                    f"{path}: truncated data chunk, header says {csize} bytes "
                    f"but only {len(body)} present"
                )
            data = body
        pos += 8 + csize + (csize & 1)  # chunks are word-aligned
    if fmt is None or data is None:
        raise WavFormatError(f"{path}: missing fmt or data chunk")
    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format != 1 or bits != 16:
        raise WavFormatError(
            f"{path}: unsupported encoding (format {audio_format}, {bits} bit); "
            "only PCM 16-bit is handled"
        )
    if channels != 1:
        raise WavFormatError(f"{path}: {channels} channels; only mono is handled")
    ints = np.frombuffer(data, dtype="<i2")
    return Waveform(samples=ints.astype(np.float64) / _FULL_SCALE,
                    sample_rate_hz=float(sample_rate))


def write_wav(path, w: Waveform) -> int:
    """Write a mono PCM16 WAV file; returns the number of clipped samples."""
    scaled = np.round(w.samples * _FULL_SCALE)
    clipped = int(np.sum((scaled < -32768) | (scaled > 32767)))
    ints = np.clip(scaled, -32768, 32767).astype("<i2")
    data = ints.tobytes()
    rate = int(round(w.sample_rate_hz))
    header = b"RIFF" + struct.pack("<I", 36 + len(data)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(data))
    Path(path).write_bytes(header + data)
    return clipped


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------

def resample_to(w: Waveform, target_hz: float) -> Waveform:
    """Polyphase windowed-sinc resampling.

    Kaiser-designed prototype: < 0.1 dB ripple below 0.45x the limiting rate,
    > 60 dB attenuation above half the limiting rate (70 dB design target).
    """
    if not target_hz > 0:
        raise ConfigError("target rate must be positive")
    if target_hz == w.sample_rate_hz:
        return Waveform(samples=w.samples.copy(), sample_rate_hz=w.sample_rate_hz)
    ratio = Fraction(target_hz / w.sample_rate_hz).limit_denominator(1000)
    if abs(float(ratio) * w.sample_rate_hz - target_hz) > 1e-6 * target_hz:
        raise ConfigError(
            f"rate ratio {target_hz}/{w.sample_rate_hz} is not a small rational"
        )
    up, down = ratio.numerator, ratio.denominator
    f_up = w.sample_rate_hz * up
    f_limit = min(w.sample_rate_hz, target_hz)
    pass_edge = 0.45 * f_limit
    stop_edge = 0.50 * f_limit
    atten_db = 70.0
    beta = 0.1102 * (atten_db - 8.7)
    delta_w = 2.0 * math.pi * (stop_edge - pass_edge) / f_up
    numtaps = int(math.ceil((atten_db - 7.95) / (2.285 * delta_w))) + 1
    if numtaps % 2 == 0:
        numtaps += 1
    cutoff = (pass_edge + stop_edge) / f_up  # normalized to Nyquist of f_up
    h = firwin(numtaps, cutoff, window=("kaiser", beta)) * up

    upsampled = upfirdn(h, w.samples, up=up, down=1)
    delay = (numtaps - 1) // 2
    n_out = int(math.ceil(len(w) * up / down))
    idx = delay + np.arange(n_out) * down
    out = np.zeros(n_out)
    valid = idx < len(upsampled)
    out[valid] = upsampled[idx[valid]]
    return Waveform(samples=out, sample_rate_hz=float(target_hz))


# ---------------------------------------------------------------------------
# ITU-T P.56 active speech level
# ---------------------------------------------------------------------------

@dataclass
class P56Result:
    asl_db: float
    activity_factor: float
    active_mask: np.ndarray  # per-sample speech-activity booleans
    threshold: float


def _envelope(x: np.ndarray, fs: float) -> np.ndarray:
    g = math.exp(-1.0 / (fs * P56_TIME_CONSTANT_S))
    p = lfilter([1.0 - g], [1.0, -g], np.abs(x))
    q = lfilter([1.0 - g], [1.0, -g], p)
    return q


def _activity(env: np.ndarray, threshold: float, hang: int) -> np.ndarray:
    """Samples where env >= threshold, extended by the hangover."""
    above = env >= threshold
    idx = np.where(above, np.arange(env.size), -hang - 1)
    last = np.maximum.accumulate(idx)
    return (np.arange(env.size) - last) <= hang


def p56_active_level(x: np.ndarray, fs: float) -> P56Result:
    """Active speech level (dB re full scale) per P.56 Method B."""
    x = np.asarray(x, dtype=np.float64)
    sq = float(np.sum(x * x))
    if sq <= 0.0:
        raise SefusionError("active speech level undefined for an all-silent signal")
    env = _envelope(x, fs)
    hang = int(round(P56_HANGOVER_S * fs))
    peak = float(env.max())

    def level_minus_thr(threshold: float) -> tuple[float, float, np.ndarray]:
        mask = _activity(env, threshold, hang)
        a = int(mask.sum())
        if a == 0:
            return math.inf, math.nan, mask  # signals "threshold too high"
        level = 10.0 * math.log10(sq / a)
        return level - 20.0 * math.log10(threshold), level, mask

    # Bracket the margin crossing on a coarse geometric threshold ladder,
    # then bisect.  delta = level - threshold_dB decreases as the threshold
    # rises; the active level is where delta hits the 15.9 dB margin.
    lo_thr = peak * 10.0 ** (-80.0 / 20.0)
    hi_thr = peak
    d_lo, _, _ = level_minus_thr(lo_thr)
    d_hi, _, _ = level_minus_thr(hi_thr)
    if not (d_lo >= P56_MARGIN_DB):
        raise SefusionError("unable to determine active speech level (no crossing)")
    if d_hi >= P56_MARGIN_DB:
        # Even at the peak threshold the margin is exceeded; the densest
        # bracket available is [peak, peak]; use the peak-threshold level.
        _, level, mask = level_minus_thr(hi_thr)
        return P56Result(level, mask.mean(), mask, hi_thr)
    for _ in range(60):
        mid = math.sqrt(lo_thr * hi_thr)
        d_mid, _, _ = level_minus_thr(mid)
        if d_mid >= P56_MARGIN_DB:
            lo_thr = mid
        else:
            hi_thr = mid
        if hi_thr / lo_thr < 1.0 + 1e-6:
            break
    _, level, mask = level_minus_thr(lo_thr)
    return P56Result(level, float(mask.mean()), mask, lo_thr)


def active_speech_level(w: Waveform) -> tuple[float, float]:
    """(active speech level dB re full scale, activity factor in (0, 1])."""
    res = p56_active_level(w.samples, w.sample_rate_hz)
    return res.asl_db, res.activity_factor


# ---------------------------------------------------------------------------
# SNR-controlled mixing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixSpec:
    """Recipe for one noisy stimulus."""

    clean_path: str
    noise_path: str
    snr_db: float
    noise_offset_policy: tuple = ("seeded_random", 0)  # or ("fixed", offset_samples)
    lead_noise_ms: float = 300.0

    def validate(self, modmask_in_use: bool = True) -> None:
        if not math.isfinite(self.snr_db):
            raise ConfigError("snr_db must be finite")
        if self.lead_noise_ms < 0:
            raise ConfigError("lead_noise_ms must be nonnegative")
        if modmask_in_use and self.lead_noise_ms < 256.0:
            raise ConfigError(
                "lead_noise_ms must be >= 256 (one modulation window) when the "
                "modulation path is used"
            )
        kind = self.noise_offset_policy[0]
        if kind not in ("fixed", "seeded_random"):
            raise ConfigError(f"unknown noise offset policy {kind!r}")


def mix_waveforms_at_snr(
    clean: Waveform,
    noise: Waveform,
    snr_db: float,
    noise_offset_policy: tuple = ("seeded_random", 0),
    lead_noise_ms: float = 300.0,
) -> tuple[Waveform, Waveform, Waveform]:
    """Scale and add noise to clean speech at a prescribed active-span SNR.

    Returns (noisy, clean_aligned, noise_scaled); noisy is exactly the sum of
    the other two.  clean_aligned carries lead_noise_ms of silence in front so
    the mixture starts with a noise-only span.
    """
    if not math.isfinite(snr_db):
        raise ConfigError("snr_db must be finite")
    if clean.sample_rate_hz != noise.sample_rate_hz:
        raise ConfigError("clean and noise must share a sample rate; resample first")
    fs = clean.sample_rate_hz
    lead = int(round(lead_noise_ms / 1000.0 * fs))
    needed = len(clean) + lead
    if len(noise) < needed:
        raise ConfigError(
            f"noise of {len(noise)} samples is shorter than the required "
            f"{needed} (clean + lead)"
        )
    kind, arg = noise_offset_policy
    if kind == "fixed":
        offset = int(arg)
        if offset < 0 or offset + needed > len(noise):
            raise ConfigError("fixed noise offset leaves too little noise")
    elif kind == "seeded_random":
        rng = np.random.default_rng(arg)
        offset = int(rng.integers(0, len(noise) - needed + 1))
    else:
        raise ConfigError(f"unknown noise offset policy {kind!r}")

    segment = noise.samples[offset : offset + needed]
    clean_aligned = np.concatenate([np.zeros(lead), clean.samples])

    p56 = p56_active_level(clean.samples, fs)
    active = np.concatenate([np.zeros(lead, dtype=bool), p56.active_mask])
    noise_power_active = float(np.mean(np.square(segment[active])))
    if noise_power_active <= 0:
        raise ConfigError("noise is silent over the speech-active span")
    scale_db = p56.asl_db - snr_db - 10.0 * math.log10(noise_power_active)
    scale = 10.0 ** (scale_db / 20.0)
    noise_scaled = segment * scale
    noisy = clean_aligned + noise_scaled
    return (
        Waveform(samples=noisy, sample_rate_hz=fs),
        Waveform(samples=clean_aligned, sample_rate_hz=fs),
        Waveform(samples=noise_scaled, sample_rate_hz=fs),
    )


def mix_at_snr(spec: MixSpec, target_rate_hz: float = 16000.0):
    """File-based mixing: load, resample to the target rate, then mix."""
    spec.validate(modmask_in_use=False)
    clean = resample_to(read_wav(spec.clean_path), target_rate_hz)
    noise = resample_to(read_wav(spec.noise_path), target_rate_hz)
    return mix_waveforms_at_snr(
        clean, noise, spec.snr_db, spec.noise_offset_policy, spec.lead_noise_ms
    )
