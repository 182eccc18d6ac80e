"""Adam with bias correction and a reduce-on-plateau learning-rate schedule."""

from __future__ import annotations

import numpy as np

from .params import ParamStore


class Adam:
    def __init__(
        self,
        store: ParamStore,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {name: np.zeros_like(t.data) for name, t in store.items()}
        self._v = {name: np.zeros_like(t.data) for name, t in store.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, tensor in self.store.items():
            g = grads.get(name)
            if g is None:
                continue
            m = self._m[name] = b1 * self._m[name] + (1 - b1) * g
            v = self._v[name] = b2 * self._v[name] + (1 - b2) * g * g
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            tensor.data = tensor.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class PlateauScheduler:
    """Halve the learning rate when the monitored metric stops improving."""

    def __init__(
        self,
        opt: Adam,
        factor: float = 0.5,
        patience: int = 20,
        min_lr: float = 1e-6,
        min_delta: float = 1e-5,
    ):
        self.opt = opt
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.min_delta = min_delta
        self.best = np.inf
        self.stale = 0

    def update(self, metric: float) -> bool:
        """Feed one epoch's metric (lower is better); True if lr was cut."""
        if metric < self.best - self.min_delta:
            self.best = metric
            self.stale = 0
            return False
        self.stale += 1
        if self.stale > self.patience and self.opt.lr > self.min_lr:
            self.opt.lr = max(self.opt.lr * self.factor, self.min_lr)
            self.stale = 0
            return True
        return False
