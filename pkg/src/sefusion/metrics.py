"""Objective evaluation: extended short-time objective intelligibility and
frame-based segmental SNR.

The intelligibility measure follows the published extended STOI procedure:
both signals are resampled to 10 kHz; frames whose clean energy falls more
than 40 dB below the loudest clean frame are removed from both signals; the
remaining signal is decomposed into 15 one-third-octave band envelopes
(lowest center 150 Hz) from a 25.6 ms / 50 %-overlap STFT; 384 ms segments of
the band-envelope matrix are mean/variance normalized along time and then
along bands, and the average of the per-segment correlation scores is
returned.  Zero-variance rows or columns contribute 0 instead of noise, so
the score is deterministic.

Segmental SNR substitutes for the license-encumbered PESQ as the second
metric: per-32 ms-frame SNR clamped to [-10, 35] dB, silent clean frames
excluded, averaged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import resample_to
from .dsp import Waveform
from .errors import MetricError

ESTOI_FS = 10000.0
_FRAME = 256
_HOP = 128
_NFFT = 512
_NUM_BANDS = 15
_MIN_CF_HZ = 150.0
_SEG_FRAMES = 30  # 384 ms at the 12.8 ms hop
_DYN_RANGE_DB = 40.0

_SEGSNR_FRAME_S = 0.032
_SEGSNR_MIN_DB = -10.0
_SEGSNR_MAX_DB = 35.0


@dataclass
class MetricReport:
    """One evaluated utterance under one condition."""

    utterance_id: str
    noise_type: str
    snr_db: float
    method: str
    estoi: float
    seg_snr_db: float
    pesq: float | None = None  # slot for externally computed values


def _hann_matlab(n: int) -> np.ndarray:
    # MATLAB-style hanning: no zero endpoints
    return np.hanning(n + 2)[1:-1]


def _frames(x: np.ndarray, win: np.ndarray) -> np.ndarray:
    n = (len(x) - _FRAME) // _HOP + 1
    if n < 1:
        raise MetricError("signal too short for one analysis frame")
    view = np.lib.stride_tricks.sliding_window_view(x, _FRAME)[:: _HOP][:n]
    return view * win


def _remove_silent_frames(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    win = _hann_matlab(_FRAME)
    xf = _frames(x, win)
    yf = _frames(y, win)
    energy_db = 20.0 * np.log10(np.linalg.norm(xf, axis=1) + 1e-300)
    keep = energy_db > energy_db.max() - _DYN_RANGE_DB
    if not np.any(keep) or not np.isfinite(energy_db.max()):
        raise MetricError("clean signal is entirely silent")
    xf = xf[keep]
    yf = yf[keep]
    out_len = (len(xf) - 1) * _HOP + _FRAME
    xs = np.zeros(out_len)
    ys = np.zeros(out_len)
    for i in range(len(xf)):
        xs[i * _HOP : i * _HOP + _FRAME] += xf[i]
        ys[i * _HOP : i * _HOP + _FRAME] += yf[i]
    return xs, ys


def _third_octave_matrix() -> np.ndarray:
    f = np.linspace(0, ESTOI_FS, _NFFT + 1)[: _NFFT // 2 + 1]
    cf = _MIN_CF_HZ * np.power(2.0, np.arange(_NUM_BANDS) / 3.0)
    lo = cf * 2.0 ** (-1.0 / 6.0)
    hi = cf * 2.0 ** (1.0 / 6.0)
    obm = np.zeros((_NUM_BANDS, f.size))
    for i in range(_NUM_BANDS):
        li = int(np.argmin(np.square(f - lo[i])))
        hi_i = int(np.argmin(np.square(f - hi[i])))
        obm[i, li:hi_i] = 1.0
    return obm


def _band_envelopes(x: np.ndarray) -> np.ndarray:
    win = _hann_matlab(_FRAME)
    spec = np.fft.rfft(_frames(x, win), n=_NFFT, axis=1)
    power = np.square(np.abs(spec))
    return np.sqrt(_third_octave_matrix() @ power.T)  # [bands x frames]


def _normalize_rows_then_cols(seg: np.ndarray) -> np.ndarray:
    out = seg - seg.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    out = np.divide(out, norms, out=np.zeros_like(out), where=norms > 0)
    out = out - out.mean(axis=0, keepdims=True)
    norms = np.linalg.norm(out, axis=0, keepdims=True)
    return np.divide(out, norms, out=np.zeros_like(out), where=norms > 0)


def estoi(clean: Waveform, processed: Waveform) -> float:
    """Extended short-time objective intelligibility in [-1, 1]."""
    if clean.sample_rate_hz != processed.sample_rate_hz:
        raise MetricError("sample rates must match")
    if len(clean) != len(processed):
        raise MetricError("signals must have equal length")
    x = resample_to(clean, ESTOI_FS).samples
    y = resample_to(processed, ESTOI_FS).samples
    x, y = _remove_silent_frames(x, y)
    xb = _band_envelopes(x)
    yb = _band_envelopes(y)
    n_frames = xb.shape[1]
    if n_frames < _SEG_FRAMES:
        raise MetricError(
            f"too little active signal: {n_frames} frames < {_SEG_FRAMES} "
            "needed for one segment"
        )
    scores = []
    for m in range(_SEG_FRAMES, n_frames + 1):
        xs = _normalize_rows_then_cols(xb[:, m - _SEG_FRAMES : m])
        ys = _normalize_rows_then_cols(yb[:, m - _SEG_FRAMES : m])
        scores.append(float(np.sum(xs * ys)) / _SEG_FRAMES)
    return float(np.mean(scores))


def segmental_snr(clean: Waveform, processed: Waveform) -> float:
    """Mean per-frame SNR in dB, clamped to [-10, 35], silent frames excluded."""
    if clean.sample_rate_hz != processed.sample_rate_hz:
        raise MetricError("sample rates must match")
    if len(clean) != len(processed):
        raise MetricError("signals must have equal length")
    frame = int(round(_SEGSNR_FRAME_S * clean.sample_rate_hz))
    n = len(clean) // frame
    if n < 1:
        raise MetricError("signals shorter than one segmental-SNR frame")
    s = clean.samples[: n * frame].reshape(n, frame)
    e = s - processed.samples[: n * frame].reshape(n, frame)
    es = np.sum(np.square(s), axis=1)
    ee = np.sum(np.square(e), axis=1)
    if not np.any(es > 0):
        raise MetricError("clean signal is entirely silent")
    es_db = 10.0 * np.log10(np.maximum(es, 1e-300))
    active = es_db > es_db.max() - _DYN_RANGE_DB
    with np.errstate(divide="ignore"):
        ratio_db = 10.0 * np.log10(np.divide(es, ee, out=np.full_like(es, np.inf),
                                             where=ee > 0))
    clamped = np.clip(ratio_db, _SEGSNR_MIN_DB, _SEGSNR_MAX_DB)
    return float(np.mean(clamped[active]))
