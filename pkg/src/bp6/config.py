"""INI run configuration with published defaults and a stable content hash.

Sections and keys mirror ``paper.cfg`` at the repository root. Unknown
sections or keys are rejected so typos cannot silently fall back to a
default.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .data import PipelineConfig
from .denoise import DenoiseConfig
from .encoders import CacnnSpec, TcnSpec
from .errors import Bp6Error, ConfigError
from .losses import LossConfig
from .model import ModelConfig
from .optim import AdamConfig
from .train import TrainConfig
from .vmd import VmdConfig
from .wavelet import WaveletConfig

DEFAULTS: dict[str, dict[str, str]] = {
    "data": {"input_dir": "", "annotations": "", "split_by_subject": "false"},
    "preprocess": {
        "raw_fs_hz": "500", "window": "5000", "decimation": "5",
        "antialias_cutoff_hz": "50", "antialias_order": "4",
        "ecg_cutoff_hz": "40", "ecg_order": "4", "ppg_cutoff_hz": "7", "ppg_order": "2",
        "dia_min": "40", "sys_max": "250",
    },
    "vmd": {
        "k_modes": "6", "alpha": "2000", "tau_dual": "0", "tol": "1e-7", "max_iter": "500",
        "omega_init": "uniform", "extension": "predict",
    },
    "wavelet": {"basis": "db4", "levels": "4", "threshold_rule": "universal-soft", "pad_mode": "zero"},
    "model": {"num_experts": "4", "width": "full", "tcn_dropout": "0.2", "cacnn_dropout": "0.3"},
    "training": {
        "batch_size": "24", "learning_rate": "3e-4", "epochs": "100",
        "adam_beta1": "0.9", "adam_beta2": "0.999", "adam_eps": "1e-8", "init_output_bias": "true",
    },
    "loss": {"lambda_contrastive": "0.3", "tau": "0.5", "k_negatives": "5"},
    "run": {"seed": "0", "out_dir": "runs", "workers": "1"},
}
# keys that locate files rather than change results; left out of the hash
UNHASHED = {("data", "input_dir"), ("data", "annotations"), ("run", "out_dir"), ("run", "workers")}


@dataclass
class RunConfig:
    values: dict[str, dict[str, str]]
    source: str = "<defaults>"

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls({s: dict(kv) for s, kv in DEFAULTS.items()})

    @classmethod
    def from_text(cls, text: str, source: str = "<text>") -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=source)
        except configparser.Error as e:
            raise ConfigError(f"{source}: {e}") from None
        cfg = cls.defaults()
        cfg.source = source
        for section in parser.sections():
            if section not in DEFAULTS:
                raise ConfigError(f"{source}: unknown section [{section}]")
            for key, value in parser.items(section):
                if key not in DEFAULTS[section]:
                    raise ConfigError(f"{source}: unknown key {section}.{key}")
                cfg.values[section][key] = value.strip()
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        return cls.from_text(text, str(path))

    def to_text(self) -> str:
        lines = []
        for section, kv in self.values.items():
            lines.append(f"[{section}]")
            lines += [f"{k} = {v}" for k, v in kv.items()]
            lines.append("")
        return "\n".join(lines)

    # typed access ------------------------------------------------------------

    def get(self, section: str, key: str) -> str:
        return self.values[section][key]

    def _typed(self, section: str, key: str, kind):
        raw = self.values[section][key]
        try:
            if kind is bool:
                low = raw.lower()
                if low in ("1", "true", "yes", "on"):
                    return True
                if low in ("0", "false", "no", "off"):
                    return False
                raise ValueError(raw)
            return kind(raw)
        except ValueError:
            raise ConfigError(f"{section}.{key}: cannot read {raw!r} as {kind.__name__}") from None

    def int(self, section: str, key: str) -> int:
        return self._typed(section, key, int)

    def float(self, section: str, key: str) -> float:
        return self._typed(section, key, float)

    def bool(self, section: str, key: str) -> bool:
        return self._typed(section, key, bool)

    # builders ----------------------------------------------------------------

    def vmd_config(self) -> VmdConfig:
        return VmdConfig(k_modes=self.int("vmd", "k_modes"), alpha=self.float("vmd", "alpha"),
                         tau_dual=self.float("vmd", "tau_dual"), tol=self.float("vmd", "tol"),
                         max_iter=self.int("vmd", "max_iter"), omega_init=self.get("vmd", "omega_init"),
                         extension=self.get("vmd", "extension"))

    def wavelet_config(self) -> WaveletConfig:
        return WaveletConfig(basis=self.get("wavelet", "basis"), levels=self.int("wavelet", "levels"),
                             threshold_rule=self.get("wavelet", "threshold_rule"),
                             pad_mode=self.get("wavelet", "pad_mode"))

    def pipeline_config(self) -> PipelineConfig:
        p = "preprocess"
        den = DenoiseConfig(ecg_cutoff_hz=self.float(p, "ecg_cutoff_hz"), ecg_order=self.int(p, "ecg_order"),
                            ppg_cutoff_hz=self.float(p, "ppg_cutoff_hz"), ppg_order=self.int(p, "ppg_order"),
                            vmd=self.vmd_config(), wavelet=self.wavelet_config())
        return PipelineConfig(raw_fs_hz=self.float(p, "raw_fs_hz"), window=self.int(p, "window"),
                              decimation=self.int(p, "decimation"),
                              antialias_cutoff_hz=self.float(p, "antialias_cutoff_hz"),
                              antialias_order=self.int(p, "antialias_order"), denoise=den,
                              dia_min=self.float(p, "dia_min"), sys_max=self.float(p, "sys_max"))

    def model_config(self) -> ModelConfig:
        width = self.get("model", "width")
        if width == "full":
            base = ModelConfig()
        elif width == "small":
            base = ModelConfig.small()
        else:
            raise ConfigError(f"model.width must be 'full' or 'small', got {width!r}")
        length = self.int("preprocess", "window") // self.int("preprocess", "decimation")
        tcn = TcnSpec(**{**base.tcn.__dict__, "dropout": self.float("model", "tcn_dropout")})
        cacnn = CacnnSpec(**{**base.cacnn.__dict__, "dropout": self.float("model", "cacnn_dropout")})
        return ModelConfig(length=length, tcn=tcn, cacnn=cacnn, expert_hidden=base.expert_hidden,
                           num_experts=self.int("model", "num_experts"))

    def train_config(self, seed: int | None = None) -> TrainConfig:
        t = "training"
        return TrainConfig(batch_size=self.int(t, "batch_size"), learning_rate=self.float(t, "learning_rate"),
                           epochs=self.int(t, "epochs"), seed=self.seed if seed is None else seed,
                           adam=AdamConfig(beta1=self.float(t, "adam_beta1"), beta2=self.float(t, "adam_beta2"),
                                           eps=self.float(t, "adam_eps")),
                           init_output_bias=self.bool(t, "init_output_bias"))

    def loss_config(self) -> LossConfig:
        return LossConfig(lambda_contrastive=self.float("loss", "lambda_contrastive"),
                          tau=self.float("loss", "tau"), k_negatives=self.int("loss", "k_negatives"))

    @property
    def seed(self) -> int:
        return self.int("run", "seed")

    def validate(self):
        """Build every typed view once so bad values fail at load time."""
        try:
            self.pipeline_config()
            self.model_config()
            self.train_config()
            self.loss_config()
            self.bool("data", "split_by_subject")
            self.int("run", "workers")
        except ConfigError:
            raise
        except (Bp6Error, ValueError, TypeError) as e:
            raise ConfigError(f"{self.source}: {e}") from None

    def hash(self) -> str:
        items = {f"{s}.{k}": v for s, kv in self.values.items() for k, v in kv.items() if (s, k) not in UNHASHED}
        return hashlib.sha256(json.dumps(items, sort_keys=True).encode()).hexdigest()[:16]
