"""Feed-forward function approximators with exact reverse-mode gradients.

A network is an architecture spec plus one flat float64 parameter vector.
Backprop is hand-rolled and differentiates with respect to either the
parameters or the input, which is all the actor/critic machinery needs.
Optimization is a self-contained Adam; target networks track their online
copies by Polyak averaging.  No computation graphs, no convolutions, just a
fixed stack of affine layers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("identity", "tanh", "softplus")


@dataclass(frozen=True)
class MlpSpec:
    """Widths (input first, output last) plus hidden/output activations."""

    layer_widths: tuple[int, ...]
    hidden_activation: str = "relu"
    output_activation: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if len(self.layer_widths) < 2:
            raise ValueError("spec needs at least an input and an output width")
        if any(w < 1 for w in self.layer_widths):
            raise ValueError(f"layer widths must be >= 1, got {self.layer_widths}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def in_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def out_dim(self) -> int:
        return self.layer_widths[-1]

    def param_count(self) -> int:
        return sum(a * b + b for a, b in zip(self.layer_widths, self.layer_widths[1:]))


@lru_cache(maxsize=None)
def _layout(spec: MlpSpec) -> tuple:
    """Per layer: (weight slice, bias slice, weight shape) into the flat vector."""
    entries = []
    offset = 0
    for fan_in, fan_out in zip(spec.layer_widths, spec.layer_widths[1:]):
        wsl = slice(offset, offset + fan_in * fan_out)
        bsl = slice(wsl.stop, wsl.stop + fan_out)
        entries.append((wsl, bsl, (fan_in, fan_out)))
        offset = bsl.stop
    return tuple(entries)


class Mlp:
    """Spec + flat float64 params.  Evaluation is pure and deterministic."""

    __slots__ = ("spec", "_params", "_weights", "_biases")

    def __init__(self, spec: MlpSpec, params: np.ndarray):
        self.spec = spec
        self.params = params

    @property
    def params(self) -> np.ndarray:
        return self._params

    @params.setter
    def params(self, value: np.ndarray):
        value = np.ascontiguousarray(value, dtype=np.float64)
        expected = self.spec.param_count()
        if value.shape != (expected,):
            raise ValueError(f"params shape {value.shape} != ({expected},) for spec {self.spec}")
        self._params = value
        layout = _layout(self.spec)
        self._weights = [value[wsl].reshape(shape) for wsl, _, shape in layout]
        self._biases = [value[bsl] for _, bsl, _ in layout]

    def copy(self) -> "Mlp":
        return Mlp(self.spec, self._params.copy())


def init(spec: MlpSpec, seed: int) -> Mlp:
    """Fan-in uniform weights (+-1/sqrt(fan_in)), zero biases, seeded."""
    rng = np.random.default_rng(seed)
    params = np.zeros(spec.param_count())
    for wsl, _, (fan_in, fan_out) in _layout(spec):
        bound = 1.0 / np.sqrt(fan_in)
        params[wsl] = rng.uniform(-bound, bound, size=fan_in * fan_out)
    return Mlp(spec, params)


def _hidden(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _hidden_deriv(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    y = np.tanh(z)
    return 1.0 - y * y


def _output(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return z
    if kind == "tanh":
        return np.tanh(z)
    return np.logaddexp(0.0, z)  # softplus, overflow-safe


def _output_deriv(z: np.ndarray, y: np.ndarray, kind: str) -> np.ndarray | None:
    # None means derivative 1 (identity head): lets callers skip a multiply.
    if kind == "identity":
        return None
    if kind == "tanh":
        return 1.0 - y * y
    return 0.5 * (1.0 + np.tanh(0.5 * z))  # sigmoid, overflow-safe


def forward_cache(net: Mlp, x: np.ndarray):
    """Batched forward keeping layer inputs and pre-activations for backward.

    x has shape (batch, in_dim); returns (output (batch, out_dim), cache).
    """
    acts = [x]
    pres = []
    a = x
    last = len(net._weights) - 1
    for i, (w, b) in enumerate(zip(net._weights, net._biases)):
        z = a @ w
        z += b
        pres.append(z)
        if i < last:
            a = _hidden(z, net.spec.hidden_activation)
            acts.append(a)
    y = _output(pres[-1], net.spec.output_activation)
    return y, (acts, pres, y)


def forward_batch(net: Mlp, x: np.ndarray) -> np.ndarray:
    return forward_cache(net, x)[0]


def _mask_hidden(delta: np.ndarray, z: np.ndarray, kind: str) -> np.ndarray:
    # in place: delta is always a fresh matmul result by the time this runs
    if kind == "relu":
        return np.multiply(delta, z > 0.0, out=delta)
    y = np.tanh(z)
    return np.multiply(delta, 1.0 - y * y, out=delta)


def backward_params(net: Mlp, cache, upstream: np.ndarray) -> np.ndarray:
    """Gradient wrt params of sum_b upstream_b . output_b, as one flat vector."""
    acts, pres, y = cache
    deriv = _output_deriv(pres[-1], y, net.spec.output_activation)
    delta = upstream if deriv is None else upstream * deriv
    grad = np.empty_like(net._params)
    layout = _layout(net.spec)
    hidden = net.spec.hidden_activation
    for i in range(len(layout) - 1, -1, -1):
        wsl, bsl, _ = layout[i]
        grad[wsl] = (acts[i].T @ delta).ravel()
        grad[bsl] = delta.sum(axis=0)
        if i > 0:
            delta = _mask_hidden(delta @ net._weights[i].T, pres[i - 1], hidden)
    return grad


def backward_input(net: Mlp, cache, upstream: np.ndarray) -> np.ndarray:
    """Gradient wrt the input batch of sum_b upstream_b . output_b."""
    _, pres, y = cache
    deriv = _output_deriv(pres[-1], y, net.spec.output_activation)
    delta = upstream if deriv is None else upstream * deriv
    hidden = net.spec.hidden_activation
    for i in range(len(net._weights) - 1, 0, -1):
        delta = _mask_hidden(delta @ net._weights[i].T, pres[i - 1], hidden)
    return delta @ net._weights[0].T


def _check_input(net: Mlp, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.spec.in_dim,):
        raise ValueError(f"input shape {x.shape} != ({net.spec.in_dim},)")
    return x


def _check_upstream(net: Mlp, upstream: np.ndarray) -> np.ndarray:
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (net.spec.out_dim,):
        raise ValueError(f"upstream shape {upstream.shape} != ({net.spec.out_dim},)")
    return upstream


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Single-sample forward pass: (in_dim,) -> (out_dim,)."""
    x = _check_input(net, x)
    return forward_cache(net, x[None, :])[0][0]


def grad_params(net: Mlp, x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Exact gradient of upstream . output wrt the flat parameter vector."""
    x = _check_input(net, x)
    upstream = _check_upstream(net, upstream)
    _, cache = forward_cache(net, x[None, :])
    return backward_params(net, cache, upstream[None, :])


def grad_input(net: Mlp, x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Exact gradient of upstream . output wrt the input vector."""
    x = _check_input(net, x)
    upstream = _check_upstream(net, upstream)
    _, cache = forward_cache(net, x[None, :])
    return backward_input(net, cache, upstream[None, :])[0]


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(n_params: int, learning_rate: float) -> AdamState:
    if learning_rate <= 0.0:
        raise ValueError("learning rate must be positive")
    return AdamState(np.zeros(n_params), np.zeros(n_params), 0, learning_rate)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState):
    """One bias-corrected Adam update; pure, returns (new_params, new_state)."""
    if params.shape != grad.shape or params.shape != state.first_moment.shape:
        raise ValueError("params / grad / moments length mismatch")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment
    m += (1.0 - state.beta1) * grad
    v = state.beta2 * state.second_moment
    v += (1.0 - state.beta2) * (grad * grad)
    # update = lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps), fused
    denom = np.sqrt(v / (1.0 - state.beta2**t))
    denom += state.eps
    step = np.divide(m, denom, out=denom)
    step *= state.learning_rate / (1.0 - state.beta1**t)
    return params - step, replace(state, first_moment=m, second_moment=v, step_count=t)


def polyak(target: Mlp, source: Mlp, tau: float) -> Mlp:
    """target' = (1 - tau) * target + tau * source, componentwise."""
    if target.spec != source.spec:
        raise ValueError("polyak requires identical specs")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    return Mlp(target.spec, (1.0 - tau) * target.params + tau * source.params)
