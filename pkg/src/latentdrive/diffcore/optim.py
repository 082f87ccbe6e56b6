"""First-order optimizers over a fixed parameter list.

A ``None`` gradient on a leaf means zero: the parameter is left untouched
(for Adam this also keeps the moment state exactly at its fixed point when
the state is zero).
"""

from __future__ import annotations

import numpy as np


class SGD:
    """Plain gradient descent: w <- w - lr * g."""

    def __init__(self, params, lr: float):
        self.params = list(params)
        self.lr = lr

    def step(self):
        for p in self.params:
            if p.grad is None:
                continue
            p.data = p.data - self.lr * p.grad

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def state_arrays(self):
        return {}

    def load_state_arrays(self, arrays):
        if arrays:
            raise ValueError("SGD carries no state arrays")


class Adam:
    """Adam with bias correction; moments stored per parameter in order."""

    def __init__(self, params, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * (g * g)
            m_hat = self.m[i] / bc1
            v_hat = self.v[i] / bc2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def state_arrays(self):
        """Moment arrays keyed for checkpointing; includes the step count."""
        out = {"optim.t": np.array(self.t, dtype=np.int64)}
        for i, p in enumerate(self.params):
            name = p.name if p.name is not None else f"param{i}"
            out[f"optim.m.{name}"] = self.m[i]
            out[f"optim.v.{name}"] = self.v[i]
        return out

    def load_state_arrays(self, arrays):
        self.t = int(arrays["optim.t"])
        for i, p in enumerate(self.params):
            name = p.name if p.name is not None else f"param{i}"
            self.m[i] = np.array(arrays[f"optim.m.{name}"], dtype=p.data.dtype)
            self.v[i] = np.array(arrays[f"optim.v.{name}"], dtype=p.data.dtype)


def build_optimizer(name: str, params, lr: float):
    name = name.lower()
    if name == "adam":
        return Adam(params, lr)
    if name == "sgd":
        return SGD(params, lr)
    raise ValueError(f"unknown optimizer '{name}' (expected adam or sgd)")
