"""Minimal dense-network engine: forward pass, exact backprop, losses, optimizers.

Everything runs on float64 numpy arrays. Inputs may be single vectors
(shape ``(n,)``) or batches (shape ``(batch, n)``); layers cache their
forward state so a matching backward pass can be run immediately after.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("linear", "relu", "softmax")

PROB_FLOOR = 1e-15  # keeps softmax outputs in open (0,1) and -log(p) finite


class NonFiniteError(FloatingPointError):
    """A tensor crossing a layer boundary contained NaN or Inf."""


def _check_finite(x: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"non-finite values entering {where}")


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction for stability.

    Outputs are floored at PROB_FLOOR and renormalized, so every entry is
    strictly inside (0, 1) even when the input magnitudes reach 1e6.
    """
    z = np.asarray(z, dtype=np.float64)
    _check_finite(z, "softmax")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    e = np.maximum(e, PROB_FLOOR)
    return e / e.sum(axis=-1, keepdims=True)


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def cross_entropy(p: np.ndarray, target_index: int) -> float:
    """-log p[target] of a single probability vector, clamped at PROB_FLOOR."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError(f"expected a probability vector, got shape {p.shape}")
    if not 0 <= target_index < p.shape[0]:
        raise IndexError(f"target index {target_index} out of range for {p.shape[0]} classes")
    return float(-np.log(max(p[target_index], PROB_FLOOR)))


def cross_entropy_mean(p: np.ndarray, targets: np.ndarray) -> float:
    """Batch-mean cross-entropy of row-wise probabilities against integer targets."""
    picked = p[np.arange(p.shape[0]), targets]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())


class DenseLayer:
    """Fully connected layer: activation(W @ x + b).

    weights has shape (out, in), bias shape (out,). ``softmax`` is only
    meant as the final activation of a receiver stack; its backward expects
    the gradient w.r.t. the pre-activation (the usual p - onehot shortcut).
    """

    def __init__(self, weights: np.ndarray, bias: np.ndarray, activation: str):
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        if weights.ndim != 2 or bias.ndim != 1 or weights.shape[0] != bias.shape[0]:
            raise ValueError(f"inconsistent layer shapes {weights.shape} / {bias.shape}")
        self.weights = weights
        self.bias = bias
        self.activation = activation
        self._x: np.ndarray | None = None  # cached input
        self._pre: np.ndarray | None = None  # cached pre-activation
        self._out: np.ndarray | None = None

    @classmethod
    def glorot(cls, n_in: int, n_out: int, activation: str, rng: np.random.Generator) -> "DenseLayer":
        """Glorot-uniform weights, zero bias."""
        limit = np.sqrt(6.0 / (n_in + n_out))
        w = rng.uniform(-limit, limit, size=(n_out, n_in))
        return cls(w, np.zeros(n_out), activation)

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_in:
            raise ValueError(f"input width {x.shape[-1]} != layer in-dimension {self.n_in}")
        _check_finite(x, "dense layer")
        pre = x @ self.weights.T + self.bias
        if self.activation == "relu":
            out = relu(pre)
        elif self.activation == "softmax":
            out = softmax(pre)
        else:
            out = pre
        self._x, self._pre, self._out = x, pre, out
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        """Propagate gradients; returns grad w.r.t. the layer input.

        For a softmax layer ``grad_out`` must already be the gradient w.r.t.
        the pre-activation (cross-entropy pairing gives p - onehot).
        Stores weight/bias gradients on ``self.grad_weights/.grad_bias``.
        """
        if self._x is None:
            raise RuntimeError("backward called without a cached forward pass")
        if self.activation == "relu":
            grad_pre = grad_out * (self._pre > 0.0)
        else:  # linear output, or softmax fed with pre-activation gradient
            grad_pre = np.asarray(grad_out, dtype=np.float64)
        x = self._x
        if x.ndim == 1:
            self.grad_weights = np.outer(grad_pre, x)
            self.grad_bias = grad_pre.copy()
        else:
            self.grad_weights = grad_pre.T @ x
            self.grad_bias = grad_pre.sum(axis=0)
        grad_x = grad_pre @ self.weights
        self._x = self._pre = self._out = None
        return grad_x


def dense_forward(x: np.ndarray, layer: DenseLayer) -> np.ndarray:
    """Apply one dense layer; caches state on the layer for backward()."""
    return layer.forward(x)


class DenseStack:
    """A feedforward chain of DenseLayers sharing one forward/backward cycle."""

    def __init__(self, layers: list[DenseLayer]):
        for a, b in zip(layers, layers[1:]):
            if a.n_out != b.n_in:
                raise ValueError(f"layer widths do not chain: {a.n_out} -> {b.n_in}")
        for layer in layers[:-1]:
            if layer.activation == "softmax":
                raise ValueError("softmax is only permitted as the final activation")
        self.layers = layers

    @classmethod
    def build(cls, dims: list[int], activations: list[str], rng: np.random.Generator) -> "DenseStack":
        """dims = [in, h1, ..., out]; one activation per layer."""
        if len(activations) != len(dims) - 1:
            raise ValueError("need one activation per layer")
        layers = [
            DenseLayer.glorot(dims[i], dims[i + 1], activations[i], rng)
            for i in range(len(dims) - 1)
        ]
        return cls(layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        """Returns the gradient w.r.t. the stack input; layer grads stay on the layers."""
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def parameters(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            out.append((f"{prefix}layer{i}.weights", layer.weights))
            out.append((f"{prefix}layer{i}.bias", layer.bias))
        return out

    def gradients(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            out.append((f"{prefix}layer{i}.weights", layer.grad_weights))
            out.append((f"{prefix}layer{i}.bias", layer.grad_bias))
        return out


@dataclass
class GradientStore:
    """Named gradient tensors, shape-congruent with the parameters they differentiate."""

    grads: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, name: str, grad: np.ndarray) -> None:
        self.grads[name] = grad

    def check_congruent(self, params: dict[str, np.ndarray]) -> None:
        if set(self.grads) != set(params):
            raise ValueError("gradient/parameter name sets differ")
        for name, g in self.grads.items():
            if g.shape != params[name].shape:
                raise ValueError(f"shape mismatch for {name}: {g.shape} vs {params[name].shape}")


def sgd_step(params: dict[str, np.ndarray], grads: GradientStore, lr: float) -> None:
    """In-place SGD update theta -= lr * g."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    grads.check_congruent(params)
    for name, theta in params.items():
        g = grads.grads[name]
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {name}")
        theta -= lr * g


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: GradientStore,
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """In-place Adam update with bias correction."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    grads.check_congruent(params)
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for name, theta in params.items():
        g = grads.grads[name]
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {name}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        theta -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


@dataclass
class GradCheckEntry:
    name: str
    max_rel_error: float
    worst_index: tuple


@dataclass
class GradCheckReport:
    entries: list[GradCheckEntry]
    step: float

    @property
    def max_rel_error(self) -> float:
        return max((e.max_rel_error for e in self.entries), default=0.0)

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error <= tolerance

    def summary(self) -> str:
        lines = [f"{e.name}: max rel err {e.max_rel_error:.3e} at {e.worst_index}" for e in self.entries]
        lines.append(f"overall max rel err {self.max_rel_error:.3e} (fd step {self.step:g})")
        return "\n".join(lines)


def finite_difference_check(
    loss_fn,
    params: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    step: float = 1e-5,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    ``loss_fn()`` re-evaluates the scalar loss from the current parameter
    values; every entry of every array in ``params`` is perturbed in place
    (and restored). Relative error is |a - n| / max(|a|, |n|, 1e-8).
    Intended for models with at most ~1e4 parameters.
    """
    entries = []
    for name, theta in params.items():
        a = analytic[name]
        num = np.zeros_like(theta)
        flat = theta.reshape(-1)
        nflat = num.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn()
            flat[i] = orig - step
            down = loss_fn()
            flat[i] = orig
            nflat[i] = (up - down) / (2.0 * step)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(num)), 1e-8)
        rel = np.abs(a - num) / denom
        worst = np.unravel_index(np.argmax(rel), rel.shape) if rel.size else ()
        entries.append(GradCheckEntry(name, float(rel.max(initial=0.0)), worst))
    return GradCheckReport(entries, step)


def parameter_checksum(params: dict[str, np.ndarray]) -> str:
    """sha256 over the raw bytes of all parameters in name order."""
    h = hashlib.sha256()
    for name in sorted(params):
        h.update(name.encode())
        h.update(np.ascontiguousarray(params[name]).tobytes())
    return h.hexdigest()
