"""Small fully connected network with hand-written backpropagation."""

from __future__ import annotations

import numpy as np


class MLP:
    """tanh hidden layers, linear output.  Inputs are row batches ``(n, d_in)``."""

    def __init__(self, dims, rng: np.random.Generator | None = None, out_scale: float = 0.01):
        self.dims = tuple(int(d) for d in dims)
        if len(self.dims) < 2:
            raise ValueError("need at least input and output dimension")
        self.weights = []
        self.biases = []
        for k, (a, b) in enumerate(zip(self.dims[:-1], self.dims[1:])):
            if rng is None:
                w = np.zeros((a, b))
            else:
                scale = out_scale if k == len(self.dims) - 2 else 1.0
                w = rng.normal(0.0, scale / np.sqrt(a), (a, b))
            self.weights.append(w)
            self.biases.append(np.zeros(b))

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MLP":
        new = MLP.__new__(MLP)
        new.dims = self.dims
        new.weights = [w.copy() for w in self.weights]
        new.biases = [b.copy() for b in self.biases]
        return new

    def forward(self, x: np.ndarray):
        """Returns (output of shape (n,), cache for backward)."""
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if k == last else np.tanh(z)
            acts.append(h)
        return h[:, 0], acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(np.atleast_2d(x))[0]

    def backward(self, acts, dout: np.ndarray) -> list[np.ndarray]:
        """Gradients w.r.t. ``params`` given dLoss/dOutput of shape (n,)."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.weights)
        delta = dout[:, None]
        for k in range(len(self.weights) - 1, -1, -1):
            grads_w[k] = acts[k].T @ delta
            grads_b[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k].T) * (1.0 - acts[k] ** 2)
        out = []
        for gw, gb in zip(grads_w, grads_b):
            out += [gw, gb]
        return out


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        """In-place descent step on the registered arrays."""
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self):
        return (self.t, [m.copy() for m in self.m], [v.copy() for v in self.v])

    def restore(self, state) -> None:
        self.t = state[0]
        for dst, src in zip(self.m, state[1]):
            dst[...] = src
        for dst, src in zip(self.v, state[2]):
            dst[...] = src
