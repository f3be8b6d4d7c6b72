"""Feature fusion and the softmax-gated mixture-of-experts regression head."""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError, ShapeError
from .nn import functional as F
from .nn.layers import BatchNorm1d, Linear, Module
from .nn.tensor import Tensor

MODALITIES = ("e", "p", "l", "t", "a", "g")


def fuse(embeddings, embed_dim: int = 128) -> Tensor:
    """Concatenate six ``(batch, embed_dim)`` embeddings in canonical order."""
    if len(embeddings) != len(MODALITIES):
        raise ShapeError(f"fuse: expected {len(MODALITIES)} embeddings, got {len(embeddings)}")
    for m, emb in zip(MODALITIES, embeddings):
        if emb.ndim != 2 or emb.shape[1] != embed_dim:
            raise ShapeError(f"fuse: embedding {m} has shape {emb.shape}, expected (batch, {embed_dim})")
    return F.concat(embeddings, axis=1)


class Expert(Module):
    """Blocks of Linear -> ReLU -> BatchNorm, then a raw linear output."""

    def __init__(self, in_features: int, hidden, out_features: int, rng):
        super().__init__()
        dims = [in_features, *hidden]
        self.linears = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
        self.norms = [BatchNorm1d(b) for b in hidden]
        self.out = Linear(dims[-1], out_features, rng)

    def forward(self, x):
        for lin, bn in zip(self.linears, self.norms):
            x = bn(F.relu(lin(x)))
        return self.out(x)


class Gate(Module):
    def __init__(self, in_features: int, num_experts: int, rng):
        super().__init__()
        self.linear = Linear(in_features, num_experts, rng)

    def forward(self, f):
        return F.softmax(self.linear(f), axis=-1)


class MoeHead(Module):
    """Dense mixture: every expert runs and outputs are blended by the gate.

    Experts are attributes ``expert_0 .. expert_{E-1}`` so their checkpoint
    names read ``expert_{i}.*``.
    """

    def __init__(self, in_features: int, hidden, num_experts: int, rng, out_features: int = 2):
        super().__init__()
        if num_experts < 1:
            raise InvalidArgumentError("num_experts must be >= 1")
        self.num_experts = num_experts
        self.gate = Gate(in_features, num_experts, rng)
        for i in range(num_experts):
            setattr(self, f"expert_{i}", Expert(in_features, hidden, out_features, rng))

    @property
    def experts(self) -> list[Expert]:
        return [getattr(self, f"expert_{i}") for i in range(self.num_experts)]

    def forward(self, f, return_parts: bool = False):
        g = self.gate(f)
        outs = [e(f) for e in self.experts]
        if self.num_experts == 1:
            y = outs[0]
        else:
            stacked = F.concat([F.reshape(o, (o.shape[0], 1, o.shape[1])) for o in outs], axis=1)
            y = F.sum(F.mul(stacked, F.reshape(g, (g.shape[0], g.shape[1], 1))), axis=1)
        return (y, g, outs) if return_parts else y

    def set_output_bias(self, bias):
        for e in self.experts:
            e.out.bias.data[...] = np.asarray(bias, dtype=np.float64)
