"""Alternating minimax training loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff import checkpoint
from ..autodiff import tensor as T
from ..autodiff.layers import BatchNormLayer, DropoutLayer, Module
from ..autodiff.optim import Adam
from ..errors import (ConfigError, EmptyDatasetError, NonConvergenceError,
                      NonFiniteGradientError, TrainingAborted)
from .losses import VARIANTS, discriminator_loss, generator_loss
from .models import DiscriminatorModel, GeneratorModel

log = logging.getLogger(__name__)

HISTORY_FIELDS = ("step", "loss_d", "loss_g", "d_real_mean", "d_fake_mean")


@dataclass
class TrainingConfig:
    batch_size: int = 64
    total_steps: int = 5000
    d_steps_per_g_step: int = 1
    lr_g: float = 1e-4
    lr_d: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    generator_loss: str = "non-saturating"
    seed: int = 0
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None
    max_consecutive_skips: int = 10
    # final share of the steps over which both learning rates fall linearly to zero
    lr_decay_fraction: float = 0.0
    # refresh the generator's batch-norm statistics without dropout when done
    recalibrate_bn: bool = True

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (batch norm needs batch statistics)")
        if self.total_steps < 0 or self.d_steps_per_g_step < 1:
            raise ConfigError("total_steps must be >= 0 and d_steps_per_g_step >= 1")
        if self.generator_loss not in VARIANTS:
            raise ConfigError(f"generator_loss must be one of {VARIANTS}")
        if self.checkpoint_every < 0:
            raise ConfigError("checkpoint_every must be >= 0")
        if not 0.0 <= self.lr_decay_fraction <= 1.0:
            raise ConfigError("lr_decay_fraction must lie in [0, 1]")
        if self.max_consecutive_skips < 1:
            raise ConfigError("max_consecutive_skips must be >= 1")

    def lr_scale(self, step: int) -> float:
        """Multiplier on the base learning rates for the 0-based ``step``."""
        n_decay = int(round(self.lr_decay_fraction * self.total_steps))
        start = self.total_steps - n_decay
        if n_decay == 0 or step < start:
            return 1.0
        return (self.total_steps - step) / (n_decay + 1)


@dataclass
class TrainingDataset:
    """Real slow-timescale samples, one row of ``s`` aggregated kW readings each."""

    samples: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] == 0:
            raise EmptyDatasetError("training dataset is empty")
        if not np.all(np.isfinite(x)) or np.any(x < 0):
            raise ConfigError("training samples must be finite and nonnegative")
        self.samples = x

    @property
    def s(self) -> int:
        return self.samples.shape[1]

    def __len__(self):
        return self.samples.shape[0]


@dataclass
class TrainingHistory:
    records: list = field(default_factory=list)

    def append(self, **row):
        self.records.append(row)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records], dtype=float)

    def tail_mean(self, name: str, n: int) -> float:
        col = self.column(name)
        return float(col[-n:].mean()) if col.size else float("nan")

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(HISTORY_FIELDS)
            for r in self.records:
                w.writerow([r["step"]] + [repr(float(r[k])) for k in HISTORY_FIELDS[1:]])


def _snapshot(*modules):
    return [{**{k: p.data.copy() for k, p in mod.named_parameters().items()},
             **{k: b.copy() for k, b in mod.named_buffers().items()}} for mod in modules]


def _restore(modules, snap):
    for mod, arrays in zip(modules, snap):
        targets = {k: p.data for k, p in mod.named_parameters().items()}
        targets.update(mod.named_buffers())
        for k, arr in arrays.items():
            targets[k][...] = arr


def _joint(disc, real, fake):
    """Score real and generated samples in one batch, normalized with the
    batch-norm statistics of the real rows.

    Separate batches would be standardized by their own statistics, hiding
    location/scale differences from the discriminator; statistics over the
    mixed batch would let generated outliers shift the normalization of the
    real rows.
    """
    both = T.concat([T.as_value(real), fake], axis=0)
    out = disc(both, ref=real.shape[0])
    B = real.shape[0]
    return out[:B], out[B:]


def _write_checkpoint(gen, disc, directory, tag):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    checkpoint.save(gen, d / f"generator_{tag}.json")
    checkpoint.save(disc, d / f"discriminator_{tag}.json")


def train(dataset: TrainingDataset, gen: GeneratorModel, disc: DiscriminatorModel,
          cfg: TrainingConfig, progress=None):
    """Run ``cfg.total_steps`` generator updates, each preceded by
    ``cfg.d_steps_per_g_step`` discriminator updates.

    Returns ``(gen, disc, history)``; models are updated in place.
    """
    if dataset.s != gen.s or disc.s != gen.s:
        raise ConfigError(f"sample width mismatch: data s={dataset.s}, generator s={gen.s}, "
                          f"discriminator s={disc.s}")
    history = TrainingHistory()
    if cfg.total_steps == 0:
        return gen, disc, history

    gnamed, dnamed = gen.named_parameters(), disc.named_parameters()
    opt_g = Adam(list(gnamed.values()), cfg.lr_g, (cfg.beta1, cfg.beta2), names=list(gnamed))
    opt_d = Adam(list(dnamed.values()), cfg.lr_d, (cfg.beta1, cfg.beta2), names=list(dnamed))
    data_rng, noise_rng = (np.random.default_rng(s)
                           for s in np.random.SeedSequence(cfg.seed).spawn(2))
    gen.train()
    disc.train()
    n, B = len(dataset), cfg.batch_size
    skips = 0
    last_good = None

    def abort(msg):
        _restore((gen, disc), last_good)
        good = {"generator": checkpoint.state_dict(gen),
                "discriminator": checkpoint.state_dict(disc)}
        raise TrainingAborted(msg, checkpoint=good, history=history)

    step = 0
    while step < cfg.total_steps:
        last_good = _snapshot(gen, disc)
        scale = cfg.lr_scale(step)
        opt_g.state.lr, opt_d.state.lr = cfg.lr_g * scale, cfg.lr_d * scale
        try:
            for _ in range(cfg.d_steps_per_g_step):
                real = dataset.samples[data_rng.integers(0, n, B)]
                _, slow = gen(gen.sample_noise(noise_rng, B))
                d_real, d_fake = _joint(disc, real, slow.detach())
                loss_d = discriminator_loss(d_real, d_fake)
                if not np.isfinite(loss_d.data):
                    abort(f"non-finite discriminator loss at step {step + 1}")
                opt_d.zero_grad()
                loss_d.backward()
                opt_d.step()
            _, slow = gen(gen.sample_noise(noise_rng, B))
            real = dataset.samples[data_rng.integers(0, n, B)]
            _, g_fake = _joint(disc, real, slow)
            loss_g = generator_loss(g_fake, cfg.generator_loss)
            if not np.isfinite(loss_g.data):
                abort(f"non-finite generator loss at step {step + 1}")
            opt_g.zero_grad()
            loss_g.backward()
            opt_g.step()
            opt_d.zero_grad()
        except NonConvergenceError as exc:
            skips += 1
            log.warning("skipping batch at step %d: %s", step + 1, exc)
            opt_g.zero_grad()
            opt_d.zero_grad()
            if skips >= cfg.max_consecutive_skips:
                abort(f"{skips} consecutive QP failures; last: {exc}")
            continue
        except NonFiniteGradientError as exc:
            abort(str(exc))
        skips = 0
        step += 1
        history.append(step=step, loss_d=float(loss_d.data), loss_g=float(loss_g.data),
                       d_real_mean=float(d_real.data.mean()),
                       d_fake_mean=float(d_fake.data.mean()))
        if cfg.checkpoint_dir and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            _write_checkpoint(gen, disc, cfg.checkpoint_dir, f"step{step:06d}")
        if progress is not None:
            progress(step, history.records[-1])
    if cfg.recalibrate_bn:
        recalibrate_batchnorm(gen, seed=cfg.seed)
    return gen, disc, history


def _walk(module: Module):
    yield module
    for _, child in module._children():
        yield from _walk(child)


def recalibrate_batchnorm(gen: GeneratorModel, n_batches: int = 20, batch_size: int = 512,
                          seed: int = 0):
    """Re-estimate the generator's batch-norm running statistics with dropout off.

    The statistics gathered during training describe dropout-noised
    activations, while eval-mode sampling feeds dropout-free ones through
    them; the resulting variance shift distorts every later layer.  Here each
    running mean/variance is replaced by its average over ``n_batches`` fresh
    noise batches pushed through the network with dropout disabled.
    """
    mods = list(_walk(gen))
    norms = [m for m in mods if isinstance(m, BatchNormLayer)]
    drops = [m for m in mods if isinstance(m, DropoutLayer)]
    was_training = gen.training
    saved = [bn.momentum for bn in norms]
    rng = np.random.default_rng(seed)
    gen.train()
    for d in drops:
        d.training = False
    try:
        for k in range(1, n_batches + 1):
            for bn in norms:
                bn.momentum = 1.0 - 1.0 / k     # cumulative average
            gen.head_output(gen.sample_noise(rng, batch_size))
    finally:
        for bn, mom in zip(norms, saved):
            bn.momentum = mom
        gen.train(was_training)
    return gen


def sample_profiles(gen: GeneratorModel, n: int, seed: int = 0, chunk: int = 256) -> np.ndarray:
    """Draw ``n`` fast profiles (rows of m*s kW values) in eval mode."""
    was_training = gen.training
    gen.eval()
    try:
        rng = np.random.default_rng(seed)
        noise = gen.sample_noise(rng, n)
        out = np.empty((n, gen.width))
        for i in range(0, n, chunk):
            fast, _ = gen(noise[i:i + chunk])
            out[i:i + chunk] = fast.data
        return out
    finally:
        gen.train(was_training)
