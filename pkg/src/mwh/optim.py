"""In-place parameter updates (Adam, momentum SGD) and per-epoch LR schedules."""
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError


def _check_shapes(params, grads):
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} parameters but {len(grads)} gradients")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"parameter {p.shape} vs gradient {g.shape}")


class Adam:
    """Bias-corrected Adam (Kingma & Ba defaults)."""

    def __init__(self, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        _check_shapes(params, grads)
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params


class SGD:
    """Heavy-ball momentum: v <- momentum * v + g; p <- p - lr * v."""

    def __init__(self, lr=0.1, momentum=0.9):
        self.lr = lr
        self.momentum = momentum
        self.velocity = None

    def step(self, params, grads):
        _check_shapes(params, grads)
        if self.velocity is None:
            self.velocity = [np.zeros_like(p) for p in params]
        for p, g, v in zip(params, grads, self.velocity):
            v *= self.momentum
            v += g
            p -= self.lr * v
        return params


def adam_step(state, params, grads):
    return state.step(params, grads)


def sgd_step(state, params, grads):
    return state.step(params, grads)


def make_optimizer(name, lr=None, momentum=0.9):
    name = name.lower()
    if name == "adam":
        return Adam(lr=0.001 if lr is None else lr)
    if name == "sgd":
        return SGD(lr=0.1 if lr is None else lr, momentum=momentum)
    raise ConfigError(f"unknown optimizer {name!r}")


@dataclass(frozen=True)
class LrSchedule:
    kind: str = "constant"  # constant | step | cosine
    base_lr: float = 0.001
    milestones: tuple = ()
    factor: float = 0.1
    total_epochs: int = 1

    def __post_init__(self):
        if self.kind not in ("constant", "step", "cosine"):
            raise ConfigError(f"unknown LR schedule {self.kind!r}")
        ms = tuple(int(x) for x in self.milestones)
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ConfigError(f"milestones must be strictly increasing, got {ms}")
        object.__setattr__(self, "milestones", ms)
        if self.kind == "cosine" and self.total_epochs < 1:
            raise ConfigError("cosine schedule needs total_epochs >= 1")


def lr_at(schedule, epoch):
    """Learning rate for a 0-based epoch index."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if schedule.kind == "constant":
        return schedule.base_lr
    if schedule.kind == "step":
        passed = sum(1 for ms in schedule.milestones if epoch >= ms)
        return schedule.base_lr * schedule.factor ** passed
    return 0.5 * schedule.base_lr * (1.0 + math.cos(math.pi * epoch / schedule.total_epochs))
