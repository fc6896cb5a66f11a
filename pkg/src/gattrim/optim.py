"""Adam optimizer and validation-metric early stopping."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class EarlyStopper:
    """Stop once consecutive non-improving updates exceed patience.

    patience=0 stops at the first update that fails to beat the best metric
    seen so far (strict improvement).
    """

    def __init__(self, patience: int):
        self.patience = int(patience)
        self.best = -np.inf
        self.stale = 0

    def update(self, metric: float) -> bool:
        """Feed one epoch's metric; True means it improved on the best."""
        if metric > self.best:
            self.best = metric
            self.stale = 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stale > self.patience


class Adam:
    """Adam with L2 regularization folded into the gradient.

    Weight decay is applied as `g + weight_decay * theta` before the moment
    updates, so a parameter with zero gradient and nonzero decay still moves
    toward zero.
    """

    def __init__(self, params: list[Tensor], lr: float = 0.001,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1, self.beta2 = betas
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.t = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                if self.weight_decay == 0.0:
                    continue
                g = self.weight_decay * p.values
            elif self.weight_decay != 0.0:
                g = g + self.weight_decay * p.values
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / b1t
            v_hat = self.v[i] / b2t
            p.values -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
