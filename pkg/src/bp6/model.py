"""The six-branch model: per-modality encoders, fusion and the MoE head."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .encoders import CacnnEncoder, CacnnSpec, TcnEncoder, TcnSpec
from .moe import MODALITIES, MoeHead, fuse
from .nn.layers import BatchNorm1d, Dropout, Module
from .nn.tensor import Tensor

# (attribute / checkpoint prefix, input channels) for the five CACNN branches
CACNN_BRANCHES = (
    ("cacnn_ppg", 6),
    ("cacnn_lc", 2),
    ("cacnn_temp", 3),
    ("cacnn_acc", 3),
    ("cacnn_gyro", 3),
)
BLOCK_CHANNELS = (1, 6, 2, 3, 3, 3)


@dataclass(frozen=True)
class ModelConfig:
    length: int = 1000
    tcn: TcnSpec = field(default_factory=TcnSpec)
    cacnn: CacnnSpec = field(default_factory=CacnnSpec)
    expert_hidden: tuple[int, ...] = (512, 512, 256)
    num_experts: int = 4

    @property
    def embed_dim(self) -> int:
        return self.tcn.embed_dim

    @classmethod
    def small(cls, num_experts: int = 2) -> "ModelConfig":
        """Reduced widths for desk-scale training runs (same topology)."""
        return cls(
            tcn=TcnSpec(channels=(8, 8, 4), fc_widths=(64, 32), embed_dim=16),
            cacnn=CacnnSpec(channels=9, fc_widths=(32, 32), embed_dim=16, se_reduction=3),
            expert_hidden=(32, 32, 16),
            num_experts=num_experts,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        tcn = TcnSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in d["tcn"].items()})
        cacnn = CacnnSpec(**{k: tuple(v) if isinstance(v, list) else v for k, v in d["cacnn"].items()})
        return cls(length=d["length"], tcn=tcn, cacnn=cacnn,
                   expert_hidden=tuple(d["expert_hidden"]), num_experts=d["num_experts"])

    def flat_items(self) -> dict[str, object]:
        """Dotted key -> value, used to name mismatches between configs."""
        out = {}

        def walk(prefix, obj):
            for k, v in obj.items():
                if isinstance(v, dict):
                    walk(f"{prefix}{k}.", v)
                else:
                    out[prefix + k] = list(v) if isinstance(v, tuple) else v

        walk("model.", self.to_dict())
        return out

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.flat_items(), sort_keys=True).encode()).hexdigest()


class SixModalModel(Module):
    """Maps the six modality blocks to (SBP, DBP) and returns the embeddings too.

    Parameter names: ``tcn.*``, ``cacnn_{ppg,lc,temp,acc,gyro}.*``, ``gate.*``, ``expert_{i}.*``.
    """

    _inline = ("head",)

    def __init__(self, cfg: ModelConfig = ModelConfig(), rng: np.random.Generator | None = None):
        super().__init__()
        rng = np.random.default_rng(0) if rng is None else rng
        self.cfg = cfg
        if cfg.cacnn.embed_dim != cfg.tcn.embed_dim:
            raise ValueError("tcn and cacnn embedding widths must match")
        self.tcn = TcnEncoder(rng, cfg.length, cfg.tcn)
        for name, channels in CACNN_BRANCHES:
            setattr(self, name, CacnnEncoder(channels, rng, cfg.length, cfg.cacnn))
        self.head = MoeHead(len(MODALITIES) * cfg.embed_dim, cfg.expert_hidden, cfg.num_experts, rng)

    @property
    def encoders(self) -> list[Module]:
        return [self.tcn] + [getattr(self, name) for name, _ in CACNN_BRANCHES]

    def embed(self, blocks) -> list[Tensor]:
        if len(blocks) != len(MODALITIES):
            raise ValueError(f"expected {len(MODALITIES)} modality blocks, got {len(blocks)}")
        return [enc(x) for enc, x in zip(self.encoders, blocks)]

    def forward(self, blocks):
        """``blocks`` is the six batches (e, p, l, t, a, g), each ``(B, C, L)``."""
        embeddings = self.embed(blocks)
        return self.head(fuse(embeddings, self.cfg.embed_dim)), embeddings

    def set_modes(self, batchnorm_train: bool, dropout_train: bool) -> "SixModalModel":
        """Set BN and dropout modes independently (e.g. train-mode BN with eval dropout)."""
        stack = [self]
        while stack:
            m = stack.pop()
            if isinstance(m, BatchNorm1d):
                m.training = batchnorm_train
            elif isinstance(m, Dropout):
                m.training = dropout_train
            else:
                m.training = batchnorm_train or dropout_train
            stack.extend(c for _, c in m.children())
        return self

    def set_update_stats(self, flag: bool):
        for m in self.modules():
            if isinstance(m, BatchNorm1d):
                m.update_stats = flag

    def modules(self):
        stack = [self]
        while stack:
            m = stack.pop()
            yield m
            stack.extend(c for _, c in m.children())

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))
