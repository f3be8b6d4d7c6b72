"""TCN encoder for ECG and channel-attention CNN encoders for the other modalities.

All encoders take batches shaped ``(batch, channels, length)`` and return
``(batch, embed_dim)`` embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .nn import functional as F
from .nn.layers import BatchNorm1d, Conv1d, Dropout, Linear, MaxPool1d, Module
from .nn.tensor import Tensor


@dataclass(frozen=True)
class TcnSpec:
    channels: tuple[int, ...] = (128, 64, 9)
    dilations: tuple[int, ...] = (1, 2, 4)
    kernel_size: int = 3
    fc_widths: tuple[int, ...] = (4096, 2048, 512)
    embed_dim: int = 128
    dropout: float = 0.2
    conv_bias: bool = False


@dataclass(frozen=True)
class CacnnSpec:
    channels: int = 27
    kernels: tuple[int, ...] = (18, 9, 7)
    pool: int = 3
    se_reduction: int = 9
    fc_widths: tuple[int, ...] = (512, 512, 256)
    embed_dim: int = 128
    dropout: float = 0.3
    conv_bias: bool = False


def _check_input(x: Tensor, channels: int, length: int, who: str):
    if x.ndim != 3 or x.shape[1] != channels or x.shape[2] != length:
        raise ShapeError(f"{who}: expected input (batch, {channels}, {length}), got {x.shape}")


class FcStack(Module):
    """Linear layers with ReLU + dropout between them and a raw final output."""

    def __init__(self, in_features: int, widths, out_features: int, dropout: float, rng):
        super().__init__()
        dims = [in_features, *widths, out_features]
        self.linears = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
        self.drops = [Dropout(dropout) for _ in widths]

    def forward(self, x):
        for lin, drop in zip(self.linears[:-1], self.drops):
            x = drop(F.relu(lin(x)))
        return self.linears[-1](x)


class TcnLevel(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, dilation: int, dropout: float, bias: bool, rng):
        super().__init__()
        # causal: zero pad on the left by the receptive-field extent keeps the length
        self.conv = Conv1d(c_in, c_out, kernel, rng, dilation=dilation, left_pad=dilation * (kernel - 1), bias=bias)
        self.bn = BatchNorm1d(c_out)
        self.drop = Dropout(dropout)

    def forward(self, x):
        return self.drop(F.relu(self.bn(self.conv(x))))


class TcnEncoder(Module):
    def __init__(self, rng: np.random.Generator, length: int = 1000, spec: TcnSpec = TcnSpec()):
        super().__init__()
        self.length = length
        c_in = 1
        self.levels = []
        for c_out, d in zip(spec.channels, spec.dilations):
            self.levels.append(TcnLevel(c_in, c_out, spec.kernel_size, d, spec.dropout, spec.conv_bias, rng))
            c_in = c_out
        self.flat_features = c_in * length
        self.fc = FcStack(self.flat_features, spec.fc_widths, spec.embed_dim, spec.dropout, rng)

    def features(self, x) -> Tensor:
        """Conv-stack activations before flattening, ``(batch, C, length)``."""
        x = x if isinstance(x, Tensor) else Tensor(x)
        _check_input(x, 1, self.length, "tcn")
        for level in self.levels:
            x = level(x)
        return x

    def forward(self, x) -> Tensor:
        return self.fc(F.flatten(self.features(x)))


class SeBlock(Module):
    """Squeeze (time average), excite (C -> C/r -> C, sigmoid), rescale channels."""

    def __init__(self, channels: int, reduction: int, rng):
        super().__init__()
        self.hidden = max(1, channels // reduction)
        self.fc1 = Linear(channels, self.hidden, rng)
        self.fc2 = Linear(self.hidden, channels, rng)

    def gates(self, u) -> Tensor:
        return F.sigmoid(self.fc2(F.relu(self.fc1(F.global_avg_pool(u)))))

    def forward(self, u) -> Tensor:
        s = self.gates(u)
        return F.mul(u, F.reshape(s, (s.shape[0], s.shape[1], 1)))


class CacnnLevel(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, pool: int, reduction: int, bias: bool, rng):
        super().__init__()
        self.conv = Conv1d(c_in, c_out, kernel, rng, bias=bias)
        self.bn = BatchNorm1d(c_out)
        self.pool = MaxPool1d(pool, pool)
        self.se = SeBlock(c_out, reduction, rng)
        self.use_se = True

    def out_length(self, length: int) -> int:
        return self.pool.out_length(self.conv.out_length(length))

    def forward(self, x):
        x = self.pool(F.relu(self.bn(self.conv(x))))
        return self.se(x) if self.use_se else x


class CacnnEncoder(Module):
    def __init__(self, in_channels: int, rng: np.random.Generator, length: int = 1000, spec: CacnnSpec = CacnnSpec()):
        super().__init__()
        self.in_channels, self.length = in_channels, length
        self.levels = []
        c_in, n = in_channels, length
        self.lengths = [length]
        for k in spec.kernels:
            level = CacnnLevel(c_in, spec.channels, k, spec.pool, spec.se_reduction, spec.conv_bias, rng)
            n = level.out_length(n)
            if n < 1:
                raise ShapeError(f"cacnn: input length {length} too short for kernel chain {spec.kernels}")
            self.levels.append(level)
            self.lengths.append(n)
            c_in = spec.channels
        self.flat_features = c_in * n
        self.fc = FcStack(self.flat_features, spec.fc_widths, spec.embed_dim, spec.dropout, rng)

    def features(self, x) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(x)
        _check_input(x, self.in_channels, self.length, "cacnn")
        for level in self.levels:
            x = level(x)
        return x

    def forward(self, x) -> Tensor:
        return self.fc(F.flatten(self.features(x)))
