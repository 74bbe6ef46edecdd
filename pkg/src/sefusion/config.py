"""Enhancement configuration: one validated bundle for the whole pipeline.

Config files are JSON; every field is optional and defaults to the published
parameter set (32 ms / 16 ms / 512 acoustic STFT, 256 ms / 32 ms / 64
modulation STFT, -10 dB modulation SNR threshold, 4 Hz modulation cutoff,
mu in [1, 3]).  Unknown keys are rejected so typos cannot silently fall back
to defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dsp import AnalysisConfig
from .errors import ConfigError
from .fusion import FusionConfig
from .modmask import ModMaskParams, default_modulation_config
from .specfun import KummerEvalPolicy
from .stsa import StsaParams

MODES = ("fusion", "acoustic_only", "modmask_only", "modssub_only")
NOISE_PSD_MODES = ("oracle", "blind")

# Acoustic frames per modulation window imposed by the published framing
# (256 ms modulation window over 16 ms acoustic hops).
MOD_FRAMES_PER_WINDOW = 16


def default_acoustic_config() -> AnalysisConfig:
    """32 ms window, 16 ms hop, 512-point FFT at 16 kHz."""
    return AnalysisConfig(window_len_samples=512, hop_samples=256, fft_size=512,
                          window_kind="hamming")


@dataclass(frozen=True)
class EnhancementConfig:
    acoustic: AnalysisConfig = field(default_factory=default_acoustic_config)
    modulation: AnalysisConfig = field(default_factory=default_modulation_config)
    stsa: StsaParams = field(default_factory=StsaParams)
    modmask: ModMaskParams = field(default_factory=ModMaskParams)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    mode: str = "fusion"
    noise_psd_mode: str = "blind"

    def validate(self, sample_rate_hz: float | None = None) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.noise_psd_mode not in NOISE_PSD_MODES:
            raise ConfigError(
                f"unknown noise PSD mode {self.noise_psd_mode!r}; "
                f"expected one of {NOISE_PSD_MODES}"
            )
        if self.modulation.window_len_samples != MOD_FRAMES_PER_WINDOW:
            raise ConfigError(
                f"modulation window must span {MOD_FRAMES_PER_WINDOW} acoustic "
                f"frames, got {self.modulation.window_len_samples}"
            )
        self.stsa.validate(sample_rate_hz)
        self.fusion.validate()
        frame_rate = None
        if sample_rate_hz is not None:
            frame_rate = sample_rate_hz / self.acoustic.hop_samples
        self.modmask.validate(frame_rate)


_DATACLASS_FIELDS = {
    "acoustic": AnalysisConfig,
    "modulation": AnalysisConfig,
    "stsa": StsaParams,
    "modmask": ModMaskParams,
    "fusion": FusionConfig,
}


def _build_dataclass(cls, data: dict, path: str):
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} under '{path}'")
    kwargs = {}
    for key, value in data.items():
        if key == "kummer_policy" and isinstance(value, dict):
            value = _build_dataclass(KummerEvalPolicy, value, f"{path}.{key}")
        if key == "zeta_norm_range_db" and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad value under '{path}': {exc}") from exc


def config_from_dict(data: dict) -> EnhancementConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    names = {f.name for f in dataclasses.fields(EnhancementConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _DATACLASS_FIELDS:
            if not isinstance(value, dict):
                raise ConfigError(f"'{key}' must be a JSON object")
            kwargs[key] = _build_dataclass(_DATACLASS_FIELDS[key], value, key)
        else:
            kwargs[key] = value
    cfg = EnhancementConfig(**kwargs)
    cfg.validate()
    return cfg


def config_to_dict(cfg: EnhancementConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path) -> EnhancementConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(data)
