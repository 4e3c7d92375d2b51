"""Trainable parameter storage, Adam updates, and finite-difference gradient checks."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class Param:
    value: np.ndarray
    grad: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray
    step: int = 0
    kind: str = "weight"

    @classmethod
    def zeros(cls, shape, kind="weight"):
        shape = tuple(int(s) for s in shape)
        return cls(*(np.zeros(shape) for _ in range(4)), step=0, kind=kind)


class ParamStore:
    """Named dense parameters with gradients and Adam moments.

    Entries keep insertion order, which fixes the order of random draws in
    ``seeded_init`` and the coordinate numbering used by ``fd_check``.
    """

    def __init__(self):
        self.entries: dict[str, Param] = {}

    def add(self, name, shape, kind="weight"):
        if name in self.entries:
            raise KeyError(f"parameter {name!r} already exists")
        if kind not in ("weight", "bias"):
            raise ValueError(f"unknown parameter kind {kind!r}")
        self.entries[name] = Param.zeros(shape, kind)
        return self.entries[name]

    def __getitem__(self, name):
        return self.entries[name].value

    def __contains__(self, name):
        return name in self.entries

    def names(self):
        return list(self.entries)

    def grad(self, name):
        return self.entries[name].grad

    def accumulate(self, name, g):
        p = self.entries[name]
        p.grad += np.asarray(g).reshape(p.value.shape)

    def num_scalars(self):
        return sum(p.value.size for p in self.entries.values())

    def copy(self):
        out = ParamStore()
        for name, p in self.entries.items():
            out.entries[name] = Param(
                p.value.copy(), p.grad.copy(), p.adam_m.copy(), p.adam_v.copy(), p.step, p.kind
            )
        return out

    def values_equal(self, other):
        return self.names() == other.names() and all(
            np.array_equal(self[n], other[n]) for n in self.names()
        )


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.001

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")


def zero_grads(store):
    for p in store.entries.values():
        p.grad[...] = 0.0
    return store


def seeded_init(store, seed, scheme="glorot"):
    """Fill weights from ``scheme`` and zero the biases, reproducibly from ``seed``.

    ``glorot`` draws U(-a, a) with a = sqrt(6 / (fan_in + fan_out)); ``normal``
    uses N(0, 2 / (fan_in + fan_out)); ``zeros`` zeroes everything.
    """
    if scheme not in ("glorot", "normal", "zeros"):
        raise ValueError(f"unknown init scheme {scheme!r}")
    rng = np.random.default_rng(seed)
    for p in store.entries.values():
        if p.kind == "bias" or scheme == "zeros":
            p.value[...] = 0.0
            continue
        shape = p.value.shape
        fan_in, fan_out = (shape[0], shape[1]) if len(shape) >= 2 else (shape[0], shape[0])
        if scheme == "glorot":
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            p.value[...] = rng.uniform(-bound, bound, size=shape)
        else:
            p.value[...] = rng.normal(0.0, np.sqrt(2.0 / (fan_in + fan_out)), size=shape)
    return store


def adam_step(store, cfg):
    """One Adam update with bias correction and decoupled weight decay."""
    for name, p in store.entries.items():
        if not np.all(np.isfinite(p.grad)):
            raise FloatingPointError(f"non-finite gradient in parameter {name!r}")
    for p in store.entries.values():
        p.step += 1
        p.adam_m[...] = cfg.beta1 * p.adam_m + (1.0 - cfg.beta1) * p.grad
        p.adam_v[...] = cfg.beta2 * p.adam_v + (1.0 - cfg.beta2) * p.grad**2
        m_hat = p.adam_m / (1.0 - cfg.beta1**p.step)
        v_hat = p.adam_v / (1.0 - cfg.beta2**p.step)
        delta = cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        if cfg.weight_decay:
            delta = delta + cfg.learning_rate * cfg.weight_decay * p.value
        p.value -= delta
    return store


def fd_check(loss_fn, store, probes=32, h=1e-5, seed=0, names=None):
    """Compare analytic gradients against central differences.

    ``loss_fn(store)`` must return a float and accumulate its analytic gradient
    into ``store`` grads; it has to be deterministic (freeze any sampling
    noise). Returns the maximum of |analytic - numeric| / max(1e-8, |numeric|)
    over ``probes`` randomly chosen scalar coordinates, restricted to the
    parameters in ``names`` when given.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    names = store.names() if names is None else list(names)
    zero_grads(store)
    base = loss_fn(store)
    if not np.isfinite(base):
        raise FloatingPointError("loss_fn returned a non-finite value")
    analytic = {n: store.grad(n).copy() for n in names}
    sizes = np.array([store[n].size for n in names])
    total = int(sizes.sum())
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(probes, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    for flat in np.sort(picks):
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        name, idx = names[k], int(flat - offsets[k])
        value = store[name].reshape(-1)
        orig = value[idx]
        value[idx] = orig + h
        up = loss_fn(store)
        value[idx] = orig - h
        down = loss_fn(store)
        value[idx] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise FloatingPointError("loss_fn returned a non-finite value")
        numeric = (up - down) / (2.0 * h)
        a = analytic[name].reshape(-1)[idx]
        worst = max(worst, abs(a - numeric) / max(1e-8, abs(numeric)))
    zero_grads(store)
    for n in names:
        store.entries[n].grad[...] = analytic[n]
    return float(worst)


def save_checkpoint(store, path, meta=None):
    """Binary checkpoint (npz): values, moments and step counts, bit-exact."""
    arrays = {}
    for name, p in store.entries.items():
        arrays[f"value/{name}"] = p.value
        arrays[f"m/{name}"] = p.adam_m
        arrays[f"v/{name}"] = p.adam_v
    header = {
        "names": store.names(),
        "kinds": [p.kind for p in store.entries.values()],
        "steps": [p.step for p in store.entries.values()],
        "meta": meta or {},
    }
    arrays["__header__"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Inverse of ``save_checkpoint``; returns (store, meta)."""
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(bytes(data["__header__"]).decode())
        store = ParamStore()
        for name, kind, step in zip(header["names"], header["kinds"], header["steps"]):
            value = data[f"value/{name}"]
            p = store.add(name, value.shape, kind)
            p.value[...] = value
            p.adam_m[...] = data[f"m/{name}"]
            p.adam_v[...] = data[f"v/{name}"]
            p.step = step
    return store, header["meta"]
