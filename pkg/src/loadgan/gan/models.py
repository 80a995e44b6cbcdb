"""Constrained generator, unconstrained baseline and discriminator networks."""

from __future__ import annotations

import numpy as np

from ..autodiff import tensor as T
from ..autodiff.layers import DenseLayer, HiddenBlock, Module
from ..autodiff.tensor import Value
from ..errors import ConfigError, ShapeError
from ..qp.layer import projection
from ..qp.polytope import RampBoxPolytope
from ..qp.solver import SolverConfig


def aggregate(fast, m: int):
    """Mean of each consecutive block of ``m`` fast samples.

    Accepts a :class:`Value` (differentiable) or an array of shape (batch, m*s)
    and returns the same kind with shape (batch, s).
    """
    data = fast.data if isinstance(fast, Value) else np.asarray(fast, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] % m:
        raise ShapeError(f"fast profiles of shape {data.shape} do not split into windows of {m}")
    s = data.shape[1] // m
    if isinstance(fast, Value):
        return fast.reshape(data.shape[0], s, m).mean(axis=2)
    return data.reshape(data.shape[0], s, m).mean(axis=2)


def _child_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])


class GeneratorModel(Module):
    """noise -> two hidden blocks -> linear head (projection inputs) -> QP -> aggregator.

    With ``constrained=False`` the projection is the identity, which yields
    the unconstrained baseline with otherwise identical parameters.
    """

    def __init__(self, polytope: RampBoxPolytope, s: int = 1, noise_dim: int = 8,
                 hidden=(128, 128), dropout: float = 0.3, seed: int = 0,
                 constrained: bool = True, solver: SolverConfig | None = None,
                 slope: float = 0.2, bn_momentum: float = 0.9, bn_epsilon: float = 1e-5):
        if s < 1 or noise_dim < 1:
            raise ConfigError("s and noise_dim must be >= 1")
        self.polytope = polytope
        self.m = polytope.m
        self.s = int(s)
        self.noise_dim = int(noise_dim)
        self.constrained = constrained
        self.solver = solver or SolverConfig()
        rng = np.random.default_rng(seed)
        sizes = [self.noise_dim, *hidden]
        self.blocks = [HiddenBlock(sizes[i], sizes[i + 1], rng, dropout, _child_seed(seed, i),
                                   slope, bn_momentum, bn_epsilon)
                       for i in range(len(hidden))]
        self.head = DenseLayer(sizes[-1], self.m * self.s, "linear", rng)
        # start the head in the middle of the box so the projection begins
        # untouched and passes gradients through
        self.head.bias.data[:] = 0.5 * (polytope.lower + polytope.upper)
        self.last_solution = None

    @property
    def width(self) -> int:
        return self.m * self.s

    def head_output(self, noise) -> Value:
        h = T.as_value(noise)
        if h.ndim != 2 or h.shape[1] != self.noise_dim:
            raise ShapeError(f"noise must have shape (batch, {self.noise_dim}), got {h.shape}")
        for block in self.blocks:
            h = block(h)
        return self.head(h)

    def forward(self, noise):
        a = self.head_output(noise)
        if self.constrained:
            fast, self.last_solution = projection(a, self.polytope, self.solver, self.s)
        else:
            fast = a
        return fast, aggregate(fast, self.m)

    def sample_noise(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, (n, self.noise_dim))


class DiscriminatorModel(Module):
    def __init__(self, s: int = 1, hidden=(128, 128), dropout: float = 0.3, seed: int = 0,
                 slope: float = 0.2, bn_momentum: float = 0.9, bn_epsilon: float = 1e-5):
        self.s = int(s)
        rng = np.random.default_rng(seed)
        sizes = [self.s, *hidden]
        self.blocks = [HiddenBlock(sizes[i], sizes[i + 1], rng, dropout, _child_seed(seed, 100 + i),
                                   slope, bn_momentum, bn_epsilon)
                       for i in range(len(hidden))]
        self.output = DenseLayer(sizes[-1], 1, "sigmoid", rng)

    def forward(self, x, ref: int | None = None) -> Value:
        """Probabilities for each row; ``ref`` as in ``BatchNormLayer.forward``."""
        h = T.as_value(x)
        if h.ndim != 2 or h.shape[1] != self.s:
            raise ShapeError(f"discriminator expects (batch, {self.s}), got {h.shape}")
        for block in self.blocks:
            h = block(h, ref=ref)
        return self.output(h).reshape(h.shape[0])


def generate(noise_batch, gen: GeneratorModel):
    return gen(noise_batch)


def build_unconstrained_baseline(polytope: RampBoxPolytope, **kwargs) -> GeneratorModel:
    kwargs["constrained"] = False
    return GeneratorModel(polytope, **kwargs)
