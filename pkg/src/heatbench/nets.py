"""Small fully connected networks with hand-written backprop, plus Adam.

Everything is float64 numpy.  Parameters live in flat dicts mapping names
like "pi.W0" to arrays, which keeps optimizer state, checkpointing and
gradient checks straightforward.
"""

from __future__ import annotations

import numpy as np


def orthogonal(shape: tuple[int, int], gain: float, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal initialization (QR of a Gaussian, sign-corrected)."""
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


class Mlp:
    """input -> hidden -> hidden -> scalar head, tanh on hidden layers.

    Weight names are prefixed so several networks share one parameter dict.
    """

    def __init__(self, prefix: str, in_dim: int, hidden: int = 64):
        self.prefix = prefix
        self.in_dim = in_dim
        self.hidden = hidden

    def init_params(self, rng: np.random.Generator, head_gain: float = 1.0) -> dict:
        p = self.prefix
        h, d = self.hidden, self.in_dim
        return {
            f"{p}.W0": orthogonal((h, d), np.sqrt(2.0), rng),
            f"{p}.b0": np.zeros(h),
            f"{p}.W1": orthogonal((h, h), np.sqrt(2.0), rng),
            f"{p}.b1": np.zeros(h),
            f"{p}.W2": orthogonal((1, h), head_gain, rng),
            f"{p}.b2": np.zeros(1),
        }

    def forward(self, params: dict, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        """Returns (out (B,), cache for backward)."""
        p = self.prefix
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"expected (B, {self.in_dim}) input, got {x.shape}")
        a1 = np.tanh(x @ params[f"{p}.W0"].T + params[f"{p}.b0"])
        a2 = np.tanh(a1 @ params[f"{p}.W1"].T + params[f"{p}.b1"])
        out = a2 @ params[f"{p}.W2"].T + params[f"{p}.b2"]
        return out[:, 0], (x, a1, a2)

    def backward(self, params: dict, cache: tuple, dout: np.ndarray) -> dict:
        """Gradients for dL/dout of shape (B,)."""
        p = self.prefix
        x, a1, a2 = cache
        d2 = dout[:, None]                       # (B, 1)
        grads = {
            f"{p}.W2": d2.T @ a2,
            f"{p}.b2": d2.sum(axis=0),
        }
        da2 = d2 @ params[f"{p}.W2"]
        dz2 = da2 * (1.0 - a2 * a2)              # tanh'
        grads[f"{p}.W1"] = dz2.T @ a1
        grads[f"{p}.b1"] = dz2.sum(axis=0)
        da1 = dz2 @ params[f"{p}.W1"]
        dz1 = da1 * (1.0 - a1 * a1)
        grads[f"{p}.W0"] = dz1.T @ x
        grads[f"{p}.b0"] = dz1.sum(axis=0)
        return grads


def global_norm(grads: dict) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_grads_(grads: dict, max_norm: float) -> float:
    """Scale grads in place to a global norm of at most max_norm."""
    norm = global_norm(grads)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for k in grads:
            grads[k] = grads[k] * scale
    return norm


class Adam:
    """Adaptive-moment gradient descent over a named parameter dict."""

    def __init__(self, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g
            params[k] = params[k] - self.lr * (self.m[k] / bias1) / (
                np.sqrt(self.v[k] / bias2) + self.eps)


__all__ = ["Adam", "Mlp", "clip_grads_", "global_norm", "orthogonal"]
