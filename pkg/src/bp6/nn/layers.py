"""Stateful layers built on the functional primitives."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from ..errors import ContractError
from . import functional as F
from .tensor import Parameter, Tensor


class Module:
    """Container with named parameters, buffers and a train/eval flag.

    Parameters, buffers and child modules are discovered from instance
    attributes in assignment order, so names are stable across runs.
    Children listed in ``_inline`` contribute names without their own prefix.
    """

    _inline: tuple[str, ...] = ()

    def __init__(self):
        self.training = True
        self._buffers: dict[str, np.ndarray] = {}
        self._rng: np.random.Generator | None = None

    def register_buffer(self, name: str, value: np.ndarray):
        self._buffers[name] = value

    def children(self) -> Iterator[tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def _child_prefix(self, prefix: str, name: str) -> str:
        return prefix if name in self._inline else f"{prefix}{name}."

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + name, value
        for name, child in self.children():
            yield from child.named_parameters(self._child_prefix(prefix, name))

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name, value in self._buffers.items():
            yield prefix + name, value
        for name, child in self.children():
            yield from child.named_buffers(self._child_prefix(prefix, name))

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data for name, p in self.named_parameters()}
        for name, buf in self.named_buffers():
            state[name] = buf
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]):
        own = dict(self.named_parameters())
        bufs = dict(self.named_buffers())
        expected = set(own) | set(bufs)
        missing = sorted(expected - set(state))
        extra = sorted(set(state) - expected)
        if missing or extra:
            raise ContractError(f"state mismatch: missing {missing[:5]}, unexpected {extra[:5]}")
        for name, value in state.items():
            target = own[name].data if name in own else bufs[name]
            if target.shape != np.shape(value):
                raise ContractError(f"state mismatch for {name}: {np.shape(value)} vs {target.shape}")
            target[...] = value

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def set_rng(self, rng: np.random.Generator) -> "Module":
        self._rng = rng
        for _, child in self.children():
            child.set_rng(rng)
        return self

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):  # pragma: no cover - abstract
        raise NotImplementedError


def fan_in_uniform(shape, fan_in: int, rng: np.random.Generator) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.weight = Parameter(fan_in_uniform((out_features, in_features), in_features, rng), init="fan_in_uniform")
        self.bias = Parameter(np.zeros(out_features), init="zeros") if bias else None

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class Conv1d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, rng: np.random.Generator,
                 stride: int = 1, dilation: int = 1, left_pad: int = 0, bias: bool = True):
        super().__init__()
        self.stride, self.dilation, self.left_pad = stride, dilation, left_pad
        fan_in = in_channels * kernel_size
        self.weight = Parameter(fan_in_uniform((out_channels, in_channels, kernel_size), fan_in, rng), init="fan_in_uniform")
        self.bias = Parameter(np.zeros(out_channels), init="zeros") if bias else None

    @property
    def kernel_size(self) -> int:
        return self.weight.shape[2]

    def out_length(self, length: int) -> int:
        return F.conv_out_length(length, self.kernel_size, self.stride, self.dilation, self.left_pad)

    def forward(self, x):
        return F.conv1d(x, self.weight, self.bias, self.stride, self.dilation, self.left_pad)


class BatchNorm1d(Module):
    def __init__(self, num_features: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.momentum, self.eps = momentum, eps
        self.weight = Parameter(np.ones(num_features), init="ones")
        self.bias = Parameter(np.zeros(num_features), init="zeros")
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)
        self.register_buffer("running_mean", self.running_mean)
        self.register_buffer("running_var", self.running_var)
        # off = batch statistics are used but running stats stay frozen (for gradient checks)
        self.update_stats = True

    def forward(self, x):
        return F.batchnorm1d(x, self.weight, self.bias, self.running_mean, self.running_var,
                             self.training, self.momentum, self.eps, self.update_stats)


class Dropout(Module):
    def __init__(self, p: float):
        super().__init__()
        self.p = p

    def forward(self, x):
        return F.dropout(x, self.p, self.training, self._rng)


class MaxPool1d(Module):
    def __init__(self, kernel_size: int, stride: int | None = None):
        super().__init__()
        self.kernel_size = kernel_size
        self.stride = kernel_size if stride is None else stride

    def out_length(self, length: int) -> int:
        return F.pool_out_length(length, self.kernel_size, self.stride)

    def forward(self, x):
        return F.maxpool1d(x, self.kernel_size, self.stride)


class ReLU(Module):
    def forward(self, x):
        return F.relu(x)


class Sequential(Module):
    def __init__(self, *layers: Module):
        super().__init__()
        self.layers = list(layers)

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x
