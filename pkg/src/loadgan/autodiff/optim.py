"""Adaptive-moment (Adam) optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonFiniteGradientError
from .tensor import Value


@dataclass
class OptimizerState:
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


class Adam:
    def __init__(self, params: list[Value], lr: float = 1e-4, betas=(0.5, 0.999),
                 eps: float = 1e-8, names: list[str] | None = None):
        self.params = list(params)
        self.names = names or [f"param{i}" for i in range(len(self.params))]
        self.state = OptimizerState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps,
                                    m=[np.zeros_like(p.data) for p in self.params],
                                    v=[np.zeros_like(p.data) for p in self.params])

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        """Apply one update from the accumulated gradients, then clear them."""
        for name, p in zip(self.names, self.params):
            if not np.all(np.isfinite(p.grad)):
                raise NonFiniteGradientError(f"non-finite gradient in {name} at step {self.state.step + 1}")
        st = self.state
        st.step += 1
        c1 = 1.0 - st.beta1 ** st.step
        c2 = 1.0 - st.beta2 ** st.step
        for p, m, v in zip(self.params, st.m, st.v):
            g = p.grad
            m *= st.beta1
            m += (1.0 - st.beta1) * g
            v *= st.beta2
            v += (1.0 - st.beta2) * g * g
            p.data -= st.lr * (m / c1) / (np.sqrt(v / c2) + st.eps)
        self.zero_grad()


def optimizer_step(optimizer: Adam):
    optimizer.step()
