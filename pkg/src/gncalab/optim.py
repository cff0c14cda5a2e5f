"""Adam, gradient clipping and a reduce-on-plateau scheduler."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .autodiff import Tensor


class Adam:
    """Adam with bias-corrected moments. Updates parameter arrays in place."""

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: Sequence[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ValueError("one gradient per parameter required")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if g.shape != p.data.shape:
                raise ValueError(f"gradient shape {g.shape} != param shape {p.data.shape}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads))


def clip_global_norm(grads: Sequence[np.ndarray], max_norm: float) -> list[np.ndarray]:
    """Rescale the whole gradient list so its joint L2 norm is <= max_norm."""
    norm = global_norm(grads)
    if norm > max_norm and norm > 0.0:
        s = max_norm / norm
        return [g * s for g in grads]
    return [g.copy() for g in grads]


class PlateauScheduler:
    """Multiply lr by `factor` after `patience` consecutive non-improving steps.

    An update counts as improving when the monitored value drops below the
    best seen so far by more than `min_delta`.
    """

    def __init__(
        self,
        optimizer: Adam,
        factor: float = 0.1,
        patience: int = 10,
        min_delta: float = 0.0,
        min_lr: float = 0.0,
    ):
        self.optimizer = optimizer
        self.factor = float(factor)
        self.patience = int(patience)
        self.min_delta = float(min_delta)
        self.min_lr = float(min_lr)
        self.best = math.inf
        self.stale = 0

    def update(self, value: float) -> bool:
        """Returns True when this call reduced the learning rate."""
        if value < self.best - self.min_delta:
            self.best = value
            self.stale = 0
            return False
        self.stale += 1
        if self.stale >= self.patience:
            self.stale = 0
            new_lr = max(self.optimizer.lr * self.factor, self.min_lr)
            reduced = new_lr < self.optimizer.lr
            self.optimizer.lr = new_lr
            return reduced
        return False


class EarlyStop:
    """Signal stop after `patience` consecutive non-improving updates."""

    def __init__(self, patience: int, min_delta: float = 0.0):
        self.patience = int(patience)
        self.min_delta = float(min_delta)
        self.best = math.inf
        self.stale = 0

    def update(self, value: float) -> bool:
        if value < self.best - self.min_delta:
            self.best = value
            self.stale = 0
            return False
        self.stale += 1
        return self.stale >= self.patience
