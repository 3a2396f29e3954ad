"""Experiment configuration: one flat, validated record echoed into outputs."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .synth import NoiseConfig


class ConfigError(ValueError):
    """Unknown key, wrong type, or out-of-range value."""


@dataclass(frozen=True)
class ExperimentConfig:
    # thresholds and dimensions
    alpha_c: float = 0.25
    d_ae: int = 10
    t_p: int = 15
    t_f: int = 15
    # sequence models
    n_local: int = 4
    n_global: int = 2
    qrnn_hidden: int = 64
    qrnn_kernel: int = 2
    qrnn_pooling: str = "fo"        # "fo" | "f"
    context_mode: str = "init"      # "init" | "concat"
    frame_encoder_hidden: int = 32
    # training
    lr_completion: float = 1e-3
    lr_local: float = 1e-4
    lr_global: float = 1e-3
    lr_entangled: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    completion_steps: int = 2000
    completion_batch: int = 32
    completion_dropout: float = 0.5
    codec_steps: int = 1500
    seq_epochs: int = 10
    seq_batch: int = 8
    # behaviour flags
    kde_norm: str = "l2"            # "l2" | "l1"
    residual_mode: str = "consecutive"  # "consecutive" | "from_last"
    pooling_mode: str = "sequence"  # "sequence" | "mean"
    # scene and normalization scales
    frame_width: int = 1280
    frame_height: int = 720
    fps: float = 30.0
    depth_scale: float = 20.0
    trans_scale: float = 20.0
    camera_profile: str = "default"  # "default" | "heavy" | "static"
    # detector noise
    noise_dropout_p: float = 0.05
    noise_jitter_sigma: float = 3.0
    noise_conf_cap: float = 12.0
    noise_rot_jitter: float = 0.002
    noise_trans_jitter: float = 0.01
    noise_depth_sigma: float = 0.05
    # reproducibility
    seed: int = 0

    def __post_init__(self):
        check = [
            (0.0 < self.alpha_c < 1.0, "alpha_c must lie in (0, 1)"),
            (self.d_ae >= 1, "d_ae must be >= 1"),
            (self.t_p >= 1 and self.t_f >= 1, "t_p and t_f must be >= 1"),
            (self.n_local >= 1 and self.n_global >= 1, "layer counts must be >= 1"),
            (self.qrnn_hidden >= 1 and self.qrnn_kernel >= 1, "qrnn dims must be >= 1"),
            (self.qrnn_pooling in ("fo", "f"), "qrnn_pooling must be 'fo' or 'f'"),
            (self.context_mode in ("init", "concat"), "context_mode must be 'init' or 'concat'"),
            (self.frame_encoder_hidden >= 1, "frame_encoder_hidden must be >= 1"),
            (all(lr > 0 for lr in (self.lr_completion, self.lr_local, self.lr_global, self.lr_entangled)),
             "learning rates must be positive"),
            (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0, "betas must lie in [0, 1)"),
            (self.adam_eps > 0.0, "adam_eps must be positive"),
            (self.completion_steps >= 1 and self.completion_batch >= 1, "completion budget must be >= 1"),
            (0.0 <= self.completion_dropout < 1.0, "completion_dropout must lie in [0, 1)"),
            (self.codec_steps >= 1, "codec_steps must be >= 1"),
            (self.seq_epochs >= 1 and self.seq_batch >= 1, "sequence budget must be >= 1"),
            (self.kde_norm in ("l2", "l1"), "kde_norm must be 'l2' or 'l1'"),
            (self.residual_mode in ("consecutive", "from_last"),
             "residual_mode must be 'consecutive' or 'from_last'"),
            (self.pooling_mode in ("sequence", "mean"), "pooling_mode must be 'sequence' or 'mean'"),
            (self.frame_width > 0 and self.frame_height > 0, "frame size must be positive"),
            (self.fps > 0.0, "fps must be positive"),
            (self.depth_scale > 0.0 and self.trans_scale > 0.0, "scales must be positive"),
            (self.camera_profile in ("default", "heavy", "static"),
             "camera_profile must be 'default', 'heavy' or 'static'"),
        ]
        for ok, msg in check:
            if not ok:
                raise ConfigError(msg)
        try:
            self.noise()
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def noise(self) -> NoiseConfig:
        return NoiseConfig(self.noise_dropout_p, self.noise_jitter_sigma,
                           self.noise_conf_cap, self.noise_rot_jitter,
                           self.noise_trans_jitter, self.noise_depth_sigma)

    @property
    def frame_size(self) -> tuple[int, int]:
        return (self.frame_width, self.frame_height)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    @classmethod
    def field_types(cls) -> dict[str, type]:
        return {f.name: f.type if isinstance(f.type, type) else type(f.default)
                for f in dataclasses.fields(cls)}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        types = cls.field_types()
        unknown = set(data) - set(types)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        coerced = {}
        for key, value in data.items():
            want = types[key]
            if want is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            if not isinstance(value, want) or isinstance(value, bool) and want is not bool:
                raise ConfigError(f"{key}: expected {want.__name__}, got {type(value).__name__}")
            coerced[key] = value
        return cls(**coerced)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from e
        return cls.from_dict(data)
