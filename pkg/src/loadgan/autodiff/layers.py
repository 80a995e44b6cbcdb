"""Network building blocks on top of :mod:`loadgan.autodiff.tensor`."""

from __future__ import annotations

from collections import OrderedDict
from typing import Iterator

import numpy as np

from ..errors import ConfigError, DegenerateBatchError, ShapeError
from . import tensor as T
from .tensor import Value

ACTIVATIONS = ("leaky-relu", "sigmoid", "linear")


def activate(x: Value, name: str, slope: float = 0.2) -> Value:
    if name == "leaky-relu":
        return T.leaky_relu(x, slope)
    if name == "sigmoid":
        return T.sigmoid(x)
    if name == "linear":
        return x
    raise ConfigError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}")


class Module:
    """Minimal container with named parameters, buffers and a train/eval flag."""

    training = True

    def _children(self) -> Iterator[tuple[str, "Module"]]:
        for name, val in vars(self).items():
            if isinstance(val, Module):
                yield name, val
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item

    def _own_params(self) -> dict[str, Value]:
        return {}

    def _own_buffers(self) -> dict[str, np.ndarray]:
        return {}

    def named_parameters(self, prefix: str = "") -> "OrderedDict[str, Value]":
        out = OrderedDict((prefix + k, v) for k, v in self._own_params().items())
        for name, child in self._children():
            out.update(child.named_parameters(f"{prefix}{name}."))
        return out

    def parameters(self) -> list[Value]:
        return list(self.named_parameters().values())

    def named_buffers(self, prefix: str = "") -> "OrderedDict[str, np.ndarray]":
        out = OrderedDict((prefix + k, v) for k, v in self._own_buffers().items())
        for name, child in self._children():
            out.update(child.named_buffers(f"{prefix}{name}."))
        return out

    def train(self, mode: bool = True):
        self.training = mode
        for _, child in self._children():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, x, **kwargs):
        return self.forward(x, **kwargs)

    def forward(self, x):
        raise NotImplementedError


class DenseLayer(Module):
    """Affine map ``activation(x @ W.T + b)`` with ``W`` of shape (out, in)."""

    def __init__(self, n_in: int, n_out: int, activation: str = "linear",
                 rng: np.random.Generator | None = None, slope: float = 0.2):
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = 1.0 / np.sqrt(n_in)
        self.n_in, self.n_out = n_in, n_out
        self.activation = activation
        self.slope = slope
        self.weight = Value(rng.uniform(-bound, bound, (n_out, n_in)), requires_grad=True)
        self.bias = Value(rng.uniform(-bound, bound, n_out), requires_grad=True)

    def _own_params(self):
        return {"weight": self.weight, "bias": self.bias}

    def forward(self, x) -> Value:
        x = T.as_value(x)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(f"dense layer expects (batch, {self.n_in}), got {x.shape}")
        return activate(x @ self.weight.T + self.bias, self.activation, self.slope)


def dense_forward(x, layer: DenseLayer) -> Value:
    return layer(x)


class BatchNormLayer(Module):
    """Per-feature batch normalization.

    Running statistics follow ``running = momentum * running + (1 - momentum) * batch``.
    """

    def __init__(self, dim: int, momentum: float = 0.9, epsilon: float = 1e-5):
        if not 0.0 < momentum < 1.0:
            raise ConfigError("batch-norm momentum must lie in (0, 1)")
        if epsilon <= 0:
            raise ConfigError("batch-norm epsilon must be positive")
        self.dim = dim
        self.momentum = momentum
        self.epsilon = epsilon
        self.gamma = Value(np.ones(dim), requires_grad=True)
        self.beta = Value(np.zeros(dim), requires_grad=True)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)

    def _own_params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def _own_buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x, ref: int | None = None) -> Value:
        """``ref`` restricts the batch statistics to the first ``ref`` rows
        (reference batch); every row is normalized with them."""
        x = T.as_value(x)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ShapeError(f"batch norm expects (batch, {self.dim}), got {x.shape}")
        if not self.training:
            xhat = (x - self.running_mean) / np.sqrt(self.running_var + self.epsilon)
            return xhat * self.gamma + self.beta
        stats = x if ref is None else x[:ref]
        n = stats.shape[0]
        if n < 2:
            raise DegenerateBatchError("batch norm in train mode needs a batch of at least 2")
        mu = stats.mean(axis=0)
        if ref is None:
            centered = x - mu
            var = (centered * centered).mean(axis=0)
        else:
            c = stats - mu
            var = (c * c).mean(axis=0)
            centered = x - mu
        xhat = centered * (var + self.epsilon) ** -0.5
        m = self.momentum
        # in-place so views handed out by named_buffers() stay live
        self.running_mean *= m
        self.running_mean += (1 - m) * mu.data
        self.running_var *= m
        self.running_var += (1 - m) * var.data * n / (n - 1)
        return xhat * self.gamma + self.beta


def batchnorm_forward(x, layer: BatchNormLayer) -> Value:
    return layer(x)


class DropoutLayer(Module):
    """Inverted dropout.

    The mask of the k-th train-mode call is drawn from a generator seeded with
    ``(rng_seed, k)``, so masks are reproducible without shared RNG state.
    """

    def __init__(self, rate: float, rng_seed: int = 0):
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = float(rate)
        self.rng_seed = int(rng_seed)
        self.step = 0

    def mask(self, shape, step: int) -> np.ndarray:
        rng = np.random.default_rng((self.rng_seed, step))
        keep = rng.random(shape) >= self.rate
        return keep / (1.0 - self.rate)

    def forward(self, x) -> Value:
        x = T.as_value(x)
        if not self.training or self.rate == 0.0:
            return x
        m = self.mask(x.shape, self.step)
        self.step += 1
        return x * m


def dropout_forward(x, layer: DropoutLayer) -> Value:
    return layer(x)


class HiddenBlock(Module):
    """Dense (affine) -> dropout -> batch norm -> leaky-relu.

    Dropout ahead of the normalization keeps its multiplicative noise away
    from the block output, which in the generator feeds a linear head.
    """

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, dropout: float = 0.3,
                 dropout_seed: int = 0, slope: float = 0.2, momentum: float = 0.9,
                 epsilon: float = 1e-5):
        self.dense = DenseLayer(n_in, n_out, "linear", rng)
        self.norm = BatchNormLayer(n_out, momentum, epsilon)
        self.drop = DropoutLayer(dropout, dropout_seed)
        self.slope = slope

    def forward(self, x, ref: int | None = None):
        h = self.norm(self.drop(self.dense(x)), ref=ref)
        return T.leaky_relu(h, self.slope)
