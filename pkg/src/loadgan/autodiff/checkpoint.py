"""JSON checkpoints: ``{name -> {shape, data(row-major)}}`` with a format tag."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .layers import Module

FORMAT = "loadgan-checkpoint"
VERSION = 1


def state_dict(module: Module) -> dict:
    tensors = {}
    for name, p in module.named_parameters().items():
        tensors[name] = {"shape": list(p.data.shape), "data": p.data.ravel().tolist()}
    for name, buf in module.named_buffers().items():
        tensors[name] = {"shape": list(buf.shape), "data": buf.ravel().tolist(), "buffer": True}
    return {"format": FORMAT, "version": VERSION, "tensors": tensors}


def load_state_dict(module: Module, state: dict):
    if state.get("format") != FORMAT or state.get("version") != VERSION:
        raise ConfigError("unrecognized checkpoint format/version")
    tensors = state["tensors"]
    params = module.named_parameters()
    buffers = module.named_buffers()
    expected = set(params) | set(buffers)
    if set(tensors) != expected:
        missing = sorted(expected - set(tensors))
        extra = sorted(set(tensors) - expected)
        raise ConfigError(f"checkpoint does not match model (missing={missing}, extra={extra})")
    for name, entry in tensors.items():
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        target = params[name].data if name in params else buffers[name]
        if target.shape != arr.shape:
            raise ConfigError(f"shape mismatch for {name}: {arr.shape} vs {target.shape}")
        target[...] = arr


def save(module: Module, path, extra: dict | None = None):
    state = state_dict(module)
    if extra:
        state["meta"] = extra
    Path(path).write_text(json.dumps(state))


def load(module: Module, path) -> dict:
    state = json.loads(Path(path).read_text())
    load_state_dict(module, state)
    return state.get("meta", {})
