"""Dense ReLU networks with exact reverse-mode gradients, Adam and soft updates.

Parameters live in one flat float64 vector (per layer: weights row-major
``(n_in, n_out)`` then biases), so optimisers and target-network updates are
plain vector operations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MLP_FORMAT = "tactile_insertion.mlp"
MLP_VERSION = 1


class ShapeError(ValueError):
    pass


class Mlp:
    """Fully connected network: ReLU hidden layers, identity or scaled-tanh head."""

    def __init__(self, sizes, output: str = "identity", bound=None, rng=None, final_scale: float = 0.01):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ShapeError(f"invalid layer sizes {sizes}")
        if output not in ("identity", "tanh"):
            raise ValueError(f"unknown output activation {output!r}")
        self.output = output
        self.bound = None
        if output == "tanh":
            b = np.broadcast_to(np.asarray(1.0 if bound is None else bound, dtype=float), (self.sizes[-1],))
            self.bound = b.copy()
        self.params = np.zeros(self.n_params)
        self._bind()
        if rng is not None:
            self.init_he(rng, final_scale)

    @property
    def n_params(self) -> int:
        return sum(a * b + b for a, b in zip(self.sizes[:-1], self.sizes[1:]))

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    @property
    def n_out(self) -> int:
        return self.sizes[-1]

    def _bind(self):
        self.layers = []
        off = 0
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            w = self.params[off : off + a * b].reshape(a, b)
            off += a * b
            bias = self.params[off : off + b]
            off += b
            self.layers.append((w, bias))

    def init_he(self, rng: np.random.Generator, final_scale: float = 0.01):
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            w[...] = rng.normal(0.0, np.sqrt(2.0 / w.shape[0]), w.shape)
            if i == last:
                w *= final_scale
            b[...] = 0.0

    def architecture(self) -> tuple:
        return (self.sizes, self.output, None if self.bound is None else tuple(self.bound))

    def copy(self) -> "Mlp":
        out = Mlp(self.sizes, self.output, self.bound)
        out.params[:] = self.params
        return out

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = x[None, :] if single else x
        if x2.ndim != 2 or x2.shape[1] != self.n_in:
            raise ShapeError(f"expected input width {self.n_in}, got shape {x.shape}")
        return x2, single

    def forward(self, x) -> np.ndarray:
        h, single = self._check_input(x)
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            h = h @ w + b
            if i < last:
                np.maximum(h, 0.0, out=h)
        if self.output == "tanh":
            h = self.bound * np.tanh(h)
        return h[0] if single else h

    __call__ = forward

    def forward_cache(self, x):
        h, single = self._check_input(x)
        inputs = []
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            inputs.append(h)
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        t = None
        if self.output == "tanh":
            t = np.tanh(h)
            h = self.bound * t
        return (h[0] if single else h), (inputs, t, single)

    def backward_cache(self, cache, grad_out) -> tuple[np.ndarray, np.ndarray]:
        """Gradients of sum(output * grad_out) w.r.t. parameters and input."""
        inputs, t, single = cache
        g = np.asarray(grad_out, dtype=float)
        g = g[None, :] if single and g.ndim == 1 else g
        if g.shape != (inputs[0].shape[0], self.n_out):
            raise ShapeError(f"output gradient shape {g.shape} does not match")
        if t is not None:
            g = g * self.bound * (1.0 - t * t)
        grad = np.empty(self.n_params)
        offsets = []
        off = 0
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            offsets.append(off)
            off += a * b + b
        for i in range(len(self.layers) - 1, -1, -1):
            w, _ = self.layers[i]
            h_in = inputs[i]
            a, b = w.shape
            o = offsets[i]
            grad[o : o + a * b] = (h_in.T @ g).reshape(-1)
            grad[o + a * b : o + a * b + b] = g.sum(axis=0)
            g = g @ w.T
            if i > 0:
                g = g * (h_in > 0.0)
        return grad, (g[0] if single else g)

    def to_dict(self) -> dict:
        return {
            "format": MLP_FORMAT,
            "version": MLP_VERSION,
            "sizes": list(self.sizes),
            "output": self.output,
            "bound": None if self.bound is None else [float(x) for x in self.bound],
            "params": [float(x) for x in self.params],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        if d.get("format") != MLP_FORMAT:
            raise ValueError("not a network document")
        if d.get("version") != MLP_VERSION:
            raise ValueError(f"unsupported network document version {d.get('version')}")
        net = cls(d["sizes"], d["output"], d["bound"])
        params = np.asarray(d["params"], dtype=float)
        if params.shape != net.params.shape:
            raise ShapeError("parameter count does not match layer sizes")
        net.params[:] = params
        return net


def forward(net: Mlp, x) -> np.ndarray:
    return net.forward(x)


def backward(net: Mlp, x, output_gradient) -> np.ndarray:
    """Parameter gradient of ``sum(net(x) * output_gradient)``."""
    _, cache = net.forward_cache(x)
    return net.backward_cache(cache, output_gradient)[0]


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0

    @classmethod
    def for_params(cls, params: np.ndarray, lr: float = 1e-3, **kw) -> "AdamState":
        return cls(np.zeros_like(params), np.zeros_like(params), lr, **kw)

    def to_dict(self) -> dict:
        return {
            "m": [float(x) for x in self.m],
            "v": [float(x) for x in self.v],
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "t": self.t,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AdamState":
        return cls(np.asarray(d["m"], dtype=float), np.asarray(d["v"], dtype=float), d["lr"], d["beta1"], d["beta2"], d["eps"], d["t"])


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> np.ndarray:
    """One bias-corrected Adam update, in place on ``params``."""
    if grads.shape != params.shape or state.m.shape != params.shape:
        raise ShapeError("parameter, gradient and moment shapes differ")
    state.t += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grads
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def soft_update(target: Mlp, source: Mlp, tau: float = 0.005) -> Mlp:
    if target.architecture() != source.architecture():
        raise ShapeError("target and source architectures differ")
    target.params *= 1.0 - tau
    target.params += tau * source.params
    return target
