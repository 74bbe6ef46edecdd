"""Synthetic test corpus.

Real speech corpora are license-encumbered, so the property and trend tests
run on generated material: speech-shaped noise with syllabic-rate envelope
modulation and embedded pauses stands in for speech; white, pink and a
multi-stream babble substitute stand in for the noise types.  Everything is
deterministic under its seed.
"""

from __future__ import annotations

import numpy as np

from .dsp import Waveform

# Long-term spectral knee of the speech substitute (flat below, -12 dB/oct above).
_SPEECH_KNEE_HZ = 500.0
_ENV_RATE_RANGE_HZ = (1.5, 5.0)  # syllabic-band envelope components
_PAUSE_S = 0.25
_TARGET_RMS = 0.08


def _shaped_noise(n: int, fs: float, rng: np.random.Generator, shape) -> np.ndarray:
    white = rng.standard_normal(n)
    spec = np.fft.rfft(white)
    f = np.fft.rfftfreq(n, 1.0 / fs)
    spec *= shape(f)
    out = np.fft.irfft(spec, n=n)
    return out / (np.sqrt(np.mean(np.square(out))) + 1e-30)


def speech_like(duration_s: float, fs: float = 16000.0, seed: int = 0) -> Waveform:
    """Speech-shaped modulated noise with pauses; the clean-speech stand-in."""
    rng = np.random.default_rng([seed, 101])
    n = int(round(duration_s * fs))
    carrier = _shaped_noise(
        n, fs, rng, lambda f: 1.0 / (1.0 + np.square(f / _SPEECH_KNEE_HZ))
    )

    t = np.arange(n) / fs
    env = np.zeros(n)
    for _ in range(3):
        rate = rng.uniform(*_ENV_RATE_RANGE_HZ)
        phase = rng.uniform(0, 2 * np.pi)
        env += rng.uniform(0.5, 1.0) * np.sin(2 * np.pi * rate * t + phase)
    env = np.exp(env / np.max(np.abs(env) + 1e-30) * 1.5)
    env /= env.max()

    # two pauses with smooth edges, away from the ends
    gate = np.ones(n)
    pause_len = int(_PAUSE_S * fs)
    for _ in range(2):
        if n <= 3 * pause_len:
            break
        start = int(rng.integers(pause_len, n - 2 * pause_len))
        ramp = int(0.02 * fs)
        gate[start : start + pause_len] = 0.0
        if ramp > 0:
            gate[start - ramp : start] = np.linspace(1, 0, ramp)
            gate[start + pause_len : start + pause_len + ramp] = np.linspace(0, 1, ramp)

    x = carrier * env * gate
    rms = np.sqrt(np.mean(np.square(x))) + 1e-30
    return Waveform(samples=x * (_TARGET_RMS / rms), sample_rate_hz=fs)


def white_noise(duration_s: float, fs: float = 16000.0, seed: int = 0) -> Waveform:
    rng = np.random.default_rng([seed, 202])
    n = int(round(duration_s * fs))
    x = rng.standard_normal(n)
    x /= np.sqrt(np.mean(np.square(x)))
    return Waveform(samples=x * _TARGET_RMS, sample_rate_hz=fs)


def pink_noise(duration_s: float, fs: float = 16000.0, seed: int = 0) -> Waveform:
    """1/f-shaped noise via FFT-domain magnitude shaping."""
    rng = np.random.default_rng([seed, 303])
    n = int(round(duration_s * fs))

    def shape(f):
        out = np.zeros_like(f)
        out[1:] = 1.0 / np.sqrt(f[1:])
        return out

    x = _shaped_noise(n, fs, rng, shape)
    return Waveform(samples=x * _TARGET_RMS, sample_rate_hz=fs)


def babble_like(duration_s: float, fs: float = 16000.0, seed: int = 0,
                num_streams: int = 6) -> Waveform:
    """Sum of independent speech-shaped streams; quasi-stationary babble."""
    rng = np.random.default_rng([seed, 404])
    n = int(round(duration_s * fs))
    total = np.zeros(n)
    for k in range(num_streams):
        total += speech_like(duration_s, fs, seed=int(rng.integers(0, 2**31)) + k).samples
    total /= np.sqrt(np.mean(np.square(total))) + 1e-30
    return Waveform(samples=total * _TARGET_RMS, sample_rate_hz=fs)


NOISE_GENERATORS = {
    "white": white_noise,
    "pink": pink_noise,
    "babble": babble_like,
}
