"""Adversarial losses with probabilities clamped to [eps, 1 - eps]."""

from __future__ import annotations

from ..autodiff import tensor as T
from ..errors import ConfigError

EPS = 1e-7
VARIANTS = ("minimax", "non-saturating")


def _clamped(p):
    return T.clip(T.as_value(p), EPS, 1.0 - EPS)


def discriminator_loss(d_real, d_fake):
    """Cross-entropy of the discriminator, halved on each term."""
    real_term = -0.5 * T.log(_clamped(d_real)).mean()
    fake_term = -0.5 * T.log(1.0 - _clamped(d_fake)).mean()
    return real_term + fake_term


def generator_loss(d_fake, variant: str = "non-saturating"):
    """``mean(log(1 - D))`` (minimax) or ``-mean(log D)`` (non-saturating), both minimized."""
    p = _clamped(d_fake)
    if variant == "minimax":
        return T.log(1.0 - p).mean()
    if variant == "non-saturating":
        return -T.log(p).mean()
    raise ConfigError(f"unknown generator loss {variant!r}; expected one of {VARIANTS}")
