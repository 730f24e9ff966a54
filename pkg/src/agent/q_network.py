"""Multilayer perceptron Q-network with manual backpropagation and Adam."""
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from utils.errors import ShapeError

N_ACTIONS = 3


class ForwardCache(NamedTuple):
    """Layer inputs and hidden pre-activations kept for the backward pass."""
    inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_grad(x: np.ndarray) -> np.ndarray:
    return (x > 0).astype(x.dtype)


class QNetwork:
    """ReLU hidden layers, identity output; weights stored as (fan_in, fan_out)."""

    def __init__(self, input_size: int, hidden_sizes: Sequence[int] = (128, 128),
                 output_size: int = N_ACTIONS, rng: Optional[np.random.Generator] = None,
                 dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.layer_sizes = [int(input_size)] + [int(h) for h in hidden_sizes] + [int(output_size)]
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            # He initialization for ReLU layers
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append((rng.standard_normal((fan_in, fan_out)) * scale).astype(self.dtype))
            self.biases.append(np.zeros(fan_out, dtype=self.dtype))

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    @property
    def hidden_sizes(self) -> Tuple[int, ...]:
        return tuple(self.layer_sizes[1:-1])

    @property
    def parameter_count(self) -> int:
        return sum(a * b + b for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in [W0, b0, W1, b1, ...] order (views, not copies)."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        return params

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=self.dtype)
        if x.shape[-1] != self.input_size or x.ndim not in (1, 2):
            raise ShapeError(f"observation length {x.shape[-1] if x.ndim else 0} does not match "
                             f"network input size {self.input_size}")
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Q-values for one observation (shape (3,)) or a batch (shape (n, 3))."""
        return self.forward_cache(x)[0]

    def forward_cache(self, x: np.ndarray) -> Tuple[np.ndarray, ForwardCache]:
        x = self._check_input(x)
        single = x.ndim == 1
        h = x[None, :] if single else x
        inputs, pre_activations = [], []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            if i < last:
                pre_activations.append(z)
                h = relu(z)
            else:
                h = z
        return (h[0] if single else h), ForwardCache(inputs, pre_activations)

    def backward(self, cache: ForwardCache, grad_output: np.ndarray) -> List[np.ndarray]:
        """Gradients in parameters() order given dLoss/dQ for the cached batch."""
        delta = np.asarray(grad_output, dtype=self.dtype)
        if delta.ndim == 1:
            delta = delta[None, :]
        grads: List[np.ndarray] = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            grads[2 * i] = cache.inputs[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.weights[i].T) * relu_grad(cache.pre_activations[i - 1])
        return grads

    def copy(self) -> "QNetwork":
        clone = QNetwork.__new__(QNetwork)
        clone.dtype = self.dtype
        clone.layer_sizes = list(self.layer_sizes)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def load_from(self, other: "QNetwork"):
        """Copy another network's parameters in place (bit-exact)."""
        if other.layer_sizes != self.layer_sizes:
            raise ShapeError(f"architecture {other.layer_sizes} does not match {self.layer_sizes}")
        for mine, theirs in zip(self.parameters(), other.parameters()):
            np.copyto(mine, theirs)

    def set_parameters(self, arrays: Sequence[np.ndarray]):
        params = self.parameters()
        if len(arrays) != len(params):
            raise ShapeError(f"expected {len(params)} parameter arrays, got {len(arrays)}")
        for mine, value in zip(params, arrays):
            value = np.asarray(value)
            if value.shape != mine.shape:
                raise ShapeError(f"parameter shape {value.shape} does not match {mine.shape}")
            np.copyto(mine, value.astype(self.dtype))


class AdamOptimizer:
    """Adam with bias-corrected moments, updating parameters in place."""

    def __init__(self, parameters: Sequence[np.ndarray], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in parameters]
        self.v = [np.zeros_like(p) for p in parameters]

    def step(self, parameters: Sequence[np.ndarray], grads: Sequence[np.ndarray]):
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(parameters, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            p -= update.astype(p.dtype)

    def state_arrays(self) -> List[np.ndarray]:
        return list(self.m) + list(self.v)

    def load_state(self, t: int, arrays: Sequence[np.ndarray]):
        n = len(self.m)
        if len(arrays) != 2 * n:
            raise ShapeError(f"expected {2 * n} optimizer arrays, got {len(arrays)}")
        self.t = int(t)
        for target, value in zip(self.m + self.v, arrays):
            np.copyto(target, np.asarray(value).astype(target.dtype))
