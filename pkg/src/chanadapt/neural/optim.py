"""Adam optimizer over named parameter lists.

Frozen parameters are skipped entirely: no update is applied and their
moment buffers are never touched, so a frozen block stays byte-identical
through any number of steps.
"""

import numpy as np


class Adam:
    def __init__(self, parameters, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.parameters = list(parameters)
        names = [p.name for p in self.parameters]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = {p.name: np.zeros_like(p.value) for p in self.parameters}
        self.v = {p.name: np.zeros_like(p.value) for p in self.parameters}

    def zero_grad(self):
        for p in self.parameters:
            p.zero_grad()

    def step(self):
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.step_count
        bc2 = 1.0 - b2 ** self.step_count
        for p in self.parameters:
            if not p.trainable:
                continue
            g = p.grad
            m = self.m[p.name]
            v = self.v[p.name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.value -= (p.value.dtype.type(self.lr) * update).astype(p.value.dtype)

    def state(self):
        """Moment buffers and step count, for checkpointing."""
        return {"step": self.step_count, "m": dict(self.m), "v": dict(self.v)}

    def load_state(self, state):
        self.step_count = int(state["step"])
        for name in self.m:
            if name in state["m"]:
                self.m[name] = np.array(state["m"][name], dtype=self.m[name].dtype)
                self.v[name] = np.array(state["v"][name], dtype=self.v[name].dtype)
