"""Adam with bias-corrected moment estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn.tensor import Parameter


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class Adam:
    def __init__(self, params, cfg: AdamConfig = AdamConfig()):
        self.params: list[Parameter] = list(params)
        self.cfg = cfg
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        """One update from the current ``.grad`` fields (missing grads count as zero)."""
        c = self.cfg
        self.step_count += 1
        t = self.step_count
        corr1 = 1.0 - c.beta1 ** t
        corr2 = 1.0 - c.beta2 ** t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                m *= c.beta1
                v *= c.beta2
            else:
                m *= c.beta1
                m += (1.0 - c.beta1) * g
                v *= c.beta2
                v += (1.0 - c.beta2) * g * g
            p.data -= c.lr * (m / corr1) / (np.sqrt(v / corr2) + c.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
