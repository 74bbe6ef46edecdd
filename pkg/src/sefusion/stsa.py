"""Acoustic-domain enhancement path.

Noise-PSD tracking, decision-directed a-priori SNR estimation, the
frequency-dependent parameter schedules, and the parametric Bayesian
spectral-amplitude gain applied per time-frequency bin.

The gain implemented here is

    G = (sqrt(nu) / gamma) * [ Gamma(beta/2 + mu - alpha) * M((2-beta)/2 + alpha - mu, 1; -nu)
                               / (Gamma(mu - alpha) * M(1 + alpha - mu, 1; -nu)) ]^(1/beta)

with nu = zeta / (mu + zeta) * gamma.  The prefactor sqrt(nu)/gamma is a
deliberate correction of the published sqrt(nu): only the corrected form
reduces to the Ephraim-Malah MMSE amplitude gain at (alpha=0, beta=1, mu=1)
and approaches the Wiener-like limit zeta/(mu+zeta) at high SNR, both of
which are enforced by tests.  Set use_paper_prefactor=True to reproduce the
printed formula side by side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import specfun
from .dsp import Spectrogram
from .errors import ConfigError, ShapeError
from .specfun import KummerEvalPolicy

# gamma = 0 would make the sqrt(nu)/gamma prefactor blow up even though the
# output magnitude G*R stays at 0; the gain is evaluated at this floor instead.
_GAMMA_EVAL_FLOOR = 1e-10

_PSD_FLOOR = 1e-10


@dataclass(frozen=True)
class StsaParams:
    """Estimator parameters with their schedule endpoints.

    Schedule endpoint defaults span compressive-to-linear loudness exponents
    while keeping every Gamma-function argument positive for mu >= 1.
    """

    alpha_low: float = 0.0
    alpha_high: float = 0.5
    beta_low: float = 0.2
    beta_high: float = 1.0
    mu_min: float = 1.0
    mu_max: float = 3.0
    tonotopic_q: float = 16.54
    tonotopic_l: float = 1.0
    dd_smoothing: float = 0.98
    zeta_floor: float = 10.0 ** (-25.0 / 10.0)
    zeta_norm_range_db: tuple[float, float] = (-15.0, 20.0)
    use_paper_prefactor: bool = False
    kummer_policy: KummerEvalPolicy = field(default_factory=KummerEvalPolicy)

    def validate(self, sample_rate_hz: float | None = None) -> None:
        if self.mu_min < 1.0:
            raise ConfigError("mu_min must be >= 1")
        if self.mu_max < self.mu_min:
            raise ConfigError("mu_max must be >= mu_min")
        if self.beta_low <= 0:
            raise ConfigError("beta_low must be positive")
        if self.beta_high < self.beta_low:
            raise ConfigError("beta_high must be >= beta_low")
        if self.tonotopic_l < 1.0:
            raise ConfigError("tonotopic_l must be >= 1")
        if self.tonotopic_q <= 0:
            raise ConfigError("tonotopic_q must be positive")
        if not (0.0 < self.dd_smoothing < 1.0):
            raise ConfigError("dd_smoothing must be in (0, 1)")
        if self.zeta_floor <= 0:
            raise ConfigError("zeta_floor must be positive")
        lo, hi = self.zeta_norm_range_db
        if not lo < hi:
            raise ConfigError("zeta_norm_range_db must be (low, high) with low < high")
        # Gamma-domain safety for every scheduled (alpha, beta): checked once
        # here, never per bin.
        a_max = max(self.alpha_low, self.alpha_high)
        if not self.mu_min - a_max > 0:
            raise ConfigError("need mu_min - alpha > 0 for all scheduled alpha")
        if not self.beta_low / 2.0 + self.mu_min - a_max > 0:
            raise ConfigError("need beta/2 + mu_min - alpha > 0 for all scheduled beta")
        if sample_rate_hz is not None:
            freqs = np.linspace(0.0, sample_rate_hz / 2.0, 64)
            alphas = alpha_schedule(freqs, sample_rate_hz, self)
            betas = beta_schedule(freqs, sample_rate_hz, self)
            if not np.all(self.mu_min - alphas > 0):
                raise ConfigError("scheduled alpha violates mu_min - alpha > 0")
            if not np.all(betas / 2.0 + self.mu_min - alphas > 0):
                raise ConfigError("scheduled beta violates beta/2 + mu_min - alpha > 0")


@dataclass
class SnrTrack:
    """Per-frame, per-bin a-priori SNR, a-posteriori SNR and noise PSD."""

    zeta: np.ndarray
    gamma: np.ndarray
    noise_psd: np.ndarray

    def __post_init__(self):
        if not (self.zeta.shape == self.gamma.shape == self.noise_psd.shape):
            raise ShapeError("zeta/gamma/noise_psd shapes must agree")


def alpha_schedule(f_k, f_s: float, p: StsaParams):
    """Cost-weighting exponent versus frequency: flat to 2 kHz, then linear."""
    f_k = np.asarray(f_k, dtype=np.float64)
    if np.any(f_k < 0) or np.any(f_k > f_s / 2.0):
        raise ValueError("frequency must lie in [0, f_s/2]")
    nyq = f_s / 2.0
    out = np.where(
        f_k <= 2000.0,
        p.alpha_low,
        (f_k - 2000.0) * (p.alpha_high - p.alpha_low) / (nyq - 2000.0) + p.alpha_low,
    )
    return out if out.ndim else float(out)


def beta_schedule(f_k, f_s: float, p: StsaParams):
    """Compression exponent versus frequency, on a tonotopic log axis."""
    f_k = np.asarray(f_k, dtype=np.float64)
    if np.any(f_k < 0) or np.any(f_k > f_s / 2.0):
        raise ValueError("frequency must lie in [0, f_s/2]")
    q, l = p.tonotopic_q, p.tonotopic_l
    bracket = np.log10(f_k / q + l) / np.log10(f_s / (2.0 * q) + l)
    out = bracket * (p.beta_high - p.beta_low) + p.beta_low
    return out if out.ndim else float(out)


def normalize_frame_snr(zeta_frame_mean_db: float, range_db: tuple[float, float]) -> float:
    """Affine map of the frame-mean a-priori SNR (dB) onto [0, 1], clamped."""
    lo, hi = range_db
    if not lo < hi:
        raise ConfigError("normalization range must satisfy low < high")
    return float(np.clip((zeta_frame_mean_db - lo) / (hi - lo), 0.0, 1.0))


def mu_schedule(zeta_norm: float, p: StsaParams) -> float:
    """Shape parameter as a linear function of the normalized frame SNR."""
    zn = min(max(zeta_norm, 0.0), 1.0)
    return p.mu_min + (p.mu_max - p.mu_min) * zn


def dd_update(prev_enhanced_mag, prev_noise_psd, gamma_now, p: StsaParams):
    """Decision-directed a-priori SNR update, floored at zeta_floor."""
    a = p.dd_smoothing
    zeta = a * (np.square(prev_enhanced_mag) / prev_noise_psd) \
        + (1.0 - a) * np.maximum(np.asarray(gamma_now, dtype=np.float64) - 1.0, 0.0)
    return np.maximum(zeta, p.zeta_floor)


def gain(zeta, gamma, alpha, beta, mu, p: StsaParams | None = None):
    """Parametric Bayesian spectral-amplitude gain, broadcast over arrays.

    Callers are responsible for keeping (alpha, beta, mu) inside the valid
    domain (mu - alpha > 0, beta/2 + mu - alpha > 0, beta > 0); violations
    raise instead of being clamped here.
    """
    if p is None:
        p = StsaParams()
    zeta, gamma, alpha, beta, mu = np.broadcast_arrays(
        *(np.asarray(v, dtype=np.float64) for v in (zeta, gamma, alpha, beta, mu))
    )
    if np.any(zeta <= 0):
        raise ValueError("zeta must be positive (floored upstream)")
    if np.any(gamma < 0):
        raise ValueError("gamma must be nonnegative")
    if np.any(beta <= 0):
        raise ValueError("beta must be positive")
    if np.any(mu - alpha <= 0) or np.any(beta / 2.0 + mu - alpha <= 0):
        raise ValueError("gain parameters violate the Gamma-function domain")

    g_eval = np.maximum(gamma, _GAMMA_EVAL_FLOOR)
    nu = zeta / (mu + zeta) * g_eval
    a_num = (2.0 - beta) / 2.0 + alpha - mu
    a_den = 1.0 + alpha - mu
    m_num = specfun.kummer_m_many(a_num, -nu, p.kummer_policy)
    m_den = specfun.kummer_m_many(a_den, -nu, p.kummer_policy)
    gam_num = _gamma_arr(beta / 2.0 + mu - alpha)
    gam_den = _gamma_arr(mu - alpha)
    ratio = (gam_num * m_num) / (gam_den * m_den)
    prefactor = np.sqrt(nu)
    if not p.use_paper_prefactor:
        prefactor = prefactor / g_eval
    out = prefactor * np.power(ratio, 1.0 / beta)
    return out if out.ndim else float(out)


def _gamma_arr(x: np.ndarray) -> np.ndarray:
    flat = x.ravel()
    out = np.array([math.gamma(v) for v in flat])
    return out.reshape(x.shape)


def estimate_noise_psd(
    noisy_power: np.ndarray,
    mode: str,
    noise_power: np.ndarray | None = None,
    smoothing: float = 0.9,
) -> np.ndarray:
    """Per-frame noise PSD track from the noisy (and, in oracle mode, the
    true-noise) power spectrogram, both [frames x bins].

    oracle: recursively smoothed periodogram of the mixed-in noise.
    blind:  speech-presence-probability weighted recursive tracker.
    """
    noisy_power = np.asarray(noisy_power, dtype=np.float64)
    if mode == "oracle":
        if noise_power is None:
            raise ConfigError("oracle noise PSD mode requires the true noise signal")
        noise_power = np.asarray(noise_power, dtype=np.float64)
        if noise_power.shape != noisy_power.shape:
            raise ShapeError("noise power must match the noisy power grid")
        out = np.empty_like(noise_power)
        out[0] = noise_power[0]
        for t in range(1, noise_power.shape[0]):
            out[t] = smoothing * out[t - 1] + (1.0 - smoothing) * noise_power[t]
        return np.maximum(out, _PSD_FLOOR)
    if mode == "blind":
        tracker = SppNoiseTracker(noisy_power.shape[1])
        out = np.empty_like(noisy_power)
        for t in range(noisy_power.shape[0]):
            out[t] = tracker.update(noisy_power[t])
        return np.maximum(out, _PSD_FLOOR)
    raise ConfigError(f"unknown noise PSD mode {mode!r}")


class SppNoiseTracker:
    """Recursive MMSE noise-power tracker gated by speech-presence probability.

    Fixed a-priori speech-presence probability 0.5 and 15 dB optimal a-priori
    SNR for the likelihood ratio; smoothed-SPP safety: a bin whose smoothed
    SPP has been stuck above 0.99 for 50 consecutive frames takes a full
    update from the current periodogram.
    """

    SPP_SMOOTHING = 0.9
    PSD_SMOOTHING = 0.8
    PRIOR_SPEECH_PROB = 0.5
    XI_OPT_DB = 15.0
    STUCK_SPP = 0.99
    STUCK_FRAMES = 50

    def __init__(self, num_bins: int):
        self._frame = 0
        self._noise = np.zeros(num_bins)
        self._spp_mean = np.full(num_bins, 0.5)
        self._stuck = np.zeros(num_bins, dtype=np.int64)
        xi_opt = 10.0 ** (self.XI_OPT_DB / 10.0)
        self._log_glr = np.log(1.0 / (1.0 + xi_opt))
        self._glr_exp = xi_opt / (1.0 + xi_opt)
        self._prior = self.PRIOR_SPEECH_PROB / (1.0 - self.PRIOR_SPEECH_PROB)

    def update(self, periodogram: np.ndarray) -> np.ndarray:
        y = np.asarray(periodogram, dtype=np.float64)
        if self._frame == 0:
            self._noise = np.maximum(y, _PSD_FLOOR)
        elif self._frame < 5:
            self._noise = np.maximum(0.5 * (self._noise + y), _PSD_FLOOR)
        else:
            snr_post = y / np.maximum(self._noise, _PSD_FLOOR)
            glr = self._prior * np.exp(
                np.minimum(self._log_glr + self._glr_exp * snr_post, 50.0)
            )
            spp = glr / (1.0 + glr)
            self._spp_mean = (
                self.SPP_SMOOTHING * self._spp_mean
                + (1.0 - self.SPP_SMOOTHING) * spp
            )
            self._stuck = np.where(self._spp_mean > self.STUCK_SPP, self._stuck + 1, 0)
            force = self._stuck >= self.STUCK_FRAMES
            estimate = spp * self._noise + (1.0 - spp) * y
            estimate[force] = y[force]
            self._stuck[force] = 0
            self._noise = np.maximum(
                self.PSD_SMOOTHING * self._noise
                + (1.0 - self.PSD_SMOOTHING) * estimate,
                _PSD_FLOOR,
            )
        self._frame += 1
        return self._noise.copy()


def build_snr_track(noisy: Spectrogram, noise_psd: np.ndarray, p: StsaParams) -> SnrTrack:
    """Decision-directed SNR track for one utterance.

    Sequential in the frame dimension: the enhanced magnitude of frame t-1
    feeds the a-priori SNR of frame t.  Bins are handled vectorized.
    """
    mag = np.abs(noisy.coeffs)
    power = np.square(mag)
    noise_psd = np.asarray(noise_psd, dtype=np.float64)
    if noise_psd.shape != power.shape:
        raise ShapeError("noise PSD grid must match the spectrogram grid")
    f_s = noisy.sample_rate_hz
    freqs = noisy.bin_frequencies_hz()
    alphas = alpha_schedule(freqs, f_s, p)
    betas = beta_schedule(freqs, f_s, p)

    n_frames, _ = power.shape
    zeta = np.empty_like(power)
    gamma = power / np.maximum(noise_psd, _PSD_FLOOR)
    a = p.dd_smoothing
    prev_mag = None
    for t in range(n_frames):
        if t == 0:
            z = a + (1.0 - a) * np.maximum(gamma[0] - 1.0, 0.0)
            z = np.maximum(z, p.zeta_floor)
        else:
            z = dd_update(prev_mag, noise_psd[t - 1], gamma[t], p)
        zeta[t] = z
        mu_t = frame_mu(z, p)
        g = gain(z, gamma[t], alphas, betas, mu_t, p)
        prev_mag = g * mag[t]
    return SnrTrack(zeta=zeta, gamma=gamma, noise_psd=np.maximum(noise_psd, _PSD_FLOOR))


def frame_mu(zeta_frame: np.ndarray, p: StsaParams) -> float:
    """Per-frame shape parameter from the frame-mean a-priori SNR."""
    mean_db = 10.0 * np.log10(max(float(np.mean(zeta_frame)), 1e-30))
    return mu_schedule(normalize_frame_snr(mean_db, p.zeta_norm_range_db), p)


def enhance_acoustic(noisy: Spectrogram, track: SnrTrack, p: StsaParams) -> np.ndarray:
    """Magnitude estimate of the acoustic path: G(zeta, gamma) * |Y|."""
    mag = np.abs(noisy.coeffs)
    if track.zeta.shape != mag.shape:
        raise ShapeError("SNR track grid must match the spectrogram grid")
    freqs = noisy.bin_frequencies_hz()
    alphas = alpha_schedule(freqs, noisy.sample_rate_hz, p)
    betas = beta_schedule(freqs, noisy.sample_rate_hz, p)
    mus = np.array([frame_mu(track.zeta[t], p) for t in range(mag.shape[0])])
    g = gain(
        track.zeta,
        track.gamma,
        alphas[np.newaxis, :],
        betas[np.newaxis, :],
        mus[:, np.newaxis],
        p,
    )
    out = g * mag
    out[mag == 0.0] = 0.0
    return out
