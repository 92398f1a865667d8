"""Small dense feedforward networks with exact reverse-mode gradients.

Row-vector convention: a layer maps ``x`` of shape ``(B, n_in)`` to
``act(x @ W.T + b)`` with ``W`` of shape ``(n_out, n_in)``. A single vector
input of shape ``(n_in,)`` is accepted and treated as a batch of one.
Everything runs in float64.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidInput, NumericalError

LEAKY_SLOPE = 0.2
ACTIVATIONS = ("relu", "leaky_relu", "tanh", "identity")

_network_ids = itertools.count()


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "leaky_relu":
        return np.where(z > 0, z, LEAKY_SLOPE * z)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name, z, a):
    # derivative of the activation at pre-activation z (a = act(z))
    if name == "relu":
        return (z > 0).astype(float)
    if name == "leaky_relu":
        return np.where(z > 0, 1.0, LEAKY_SLOPE)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


@dataclass
class Layer:
    W: np.ndarray
    b: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.W = np.array(self.W, dtype=float, ndmin=2)
        self.b = np.array(self.b, dtype=float, ndmin=1)
        if self.activation not in ACTIVATIONS:
            raise InvalidInput(f"unknown activation {self.activation!r}")
        if self.b.shape != (self.W.shape[0],):
            raise InvalidInput(f"bias shape {self.b.shape} does not match weight {self.W.shape}")


class Network:
    """Ordered chain of dense layers.

    ``version`` increments on every parameter update so tapes recorded before
    an update are rejected by :func:`backward`.
    """

    def __init__(self, layers: Sequence[Layer]):
        if not layers:
            raise InvalidInput("network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.W.shape[0] != nxt.W.shape[1]:
                raise InvalidInput(
                    f"layer dimensions do not chain: {prev.W.shape} -> {nxt.W.shape}"
                )
        self.layers = list(layers)
        for p in self.params():
            if not np.all(np.isfinite(p)):
                raise InvalidInput("network parameters must be finite")
        self.uid = next(_network_ids)
        self.version = 0

    @classmethod
    def init(cls, dims: Sequence[int], activations, rng: np.random.Generator):
        """Uniform init in ``+-1/sqrt(fan_in)`` for weights and biases.

        ``activations`` is one name per layer, or a single name for the hidden
        layers (the output layer is then ``identity``).
        """
        n = len(dims) - 1
        if n < 1:
            raise InvalidInput("dims must list at least input and output sizes")
        if isinstance(activations, str):
            activations = [activations] * (n - 1) + ["identity"]
        if len(activations) != n:
            raise InvalidInput("need one activation per layer")
        layers = []
        for fan_in, fan_out, act in zip(dims[:-1], dims[1:], activations):
            bound = 1.0 / np.sqrt(fan_in)
            W = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            b = rng.uniform(-bound, bound, size=fan_out)
            layers.append(Layer(W, b, act))
        return cls(layers)

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].W.shape[1]] + [l.W.shape[0] for l in self.layers]

    @property
    def activations(self) -> list[str]:
        return [l.activation for l in self.layers]

    def params(self) -> list[np.ndarray]:
        out = []
        for l in self.layers:
            out += [l.W, l.b]
        return out

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        if len(params) != 2 * len(self.layers):
            raise InvalidInput("wrong number of parameter arrays")
        for l, W, b in zip(self.layers, params[0::2], params[1::2]):
            if W.shape != l.W.shape or b.shape != l.b.shape:
                raise InvalidInput("parameter shapes do not match network")
            l.W = np.array(W, dtype=float)
            l.b = np.array(b, dtype=float)
        self.version += 1

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "Network":
        return Network([Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers])

    def truncated(self, layer_index: int) -> "Network":
        """Sub-network ending at the pre-activation of ``layer_index``."""
        n = len(self.layers)
        if layer_index < 0:
            layer_index += n
        if not 0 <= layer_index < n:
            raise InvalidInput(f"layer index {layer_index} out of range for {n} layers")
        layers = [Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers[: layer_index + 1]]
        layers[-1].activation = "identity"
        return Network(layers)

    def __call__(self, x):
        return forward(self, x)[0]


@dataclass
class Tape:
    net_uid: int
    version: int
    squeeze: bool
    inputs: list = field(default_factory=list)
    preacts: list = field(default_factory=list)
    outputs: list = field(default_factory=list)


def forward(net: Network, x):
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = np.atleast_2d(x)
    if h.ndim != 2 or h.shape[1] != net.dims[0]:
        raise InvalidInput(f"input shape {x.shape} does not match input dim {net.dims[0]}")
    tape = Tape(net.uid, net.version, squeeze)
    for l in net.layers:
        tape.inputs.append(h)
        z = h @ l.W.T + l.b
        h = _act(l.activation, z)
        tape.preacts.append(z)
        tape.outputs.append(h)
    return (h[0] if squeeze else h), tape


def backward(net: Network, tape: Tape, out_grad):
    """Gradients of ``sum(out_grad * output)``.

    Returns ``(param_grads, input_grad)`` with ``param_grads`` aligned with
    ``net.params()``; parameter gradients are summed over the batch.
    """
    if tape.net_uid != net.uid or tape.version != net.version:
        raise InvalidInput("tape does not belong to the current network state")
    g = np.asarray(out_grad, dtype=float)
    g = g[None, :] if tape.squeeze else g
    if g.shape != tape.outputs[-1].shape:
        raise InvalidInput(f"out_grad shape {g.shape} does not match output {tape.outputs[-1].shape}")
    grads = [None] * (2 * len(net.layers))
    for i in reversed(range(len(net.layers))):
        l = net.layers[i]
        dz = g * _act_grad(l.activation, tape.preacts[i], tape.outputs[i])
        grads[2 * i] = dz.T @ tape.inputs[i]
        grads[2 * i + 1] = dz.sum(axis=0)
        g = dz @ l.W
    return grads, (g[0] if tape.squeeze else g)


@dataclass
class OptimizerState:
    """Adam state; ``m`` and ``v`` are shaped like the parameter list."""

    lr: float = 1e-3
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        return cls(
            lr=lr,
            b1=betas[0],
            b2=betas[1],
            eps=eps,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def optimizer_step(state: OptimizerState, params, grads):
    """One bias-corrected Adam update; returns new parameter arrays."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise InvalidInput("params, grads and optimizer state do not align")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise InvalidInput("gradient shape does not match parameter")
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient", step=state.t + 1)
    state.t += 1
    c1 = 1.0 - state.b1**state.t
    c2 = 1.0 - state.b2**state.t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = state.b1 * state.m[i] + (1.0 - state.b1) * g
        state.v[i] = state.b2 * state.v[i] + (1.0 - state.b2) * g * g
        mhat = state.m[i] / c1
        vhat = state.v[i] / c2
        out.append(p - state.lr * mhat / (np.sqrt(vhat) + state.eps))
    return out


def apply_step(net: Network, state: OptimizerState, grads) -> None:
    net.set_params(optimizer_step(state, net.params(), grads))


# weight files ---------------------------------------------------------------

MAGIC = "regdgm-weights 1"


def write_weights(path, net: Network, extra: dict | None = None) -> None:
    """Write ``net`` as text: header lines then one parameter per line.

    Parameters are written layer by layer, ``W`` row-major then ``b``, in
    ``%.17g`` so they round-trip exactly. ``extra`` maps header keys to lists
    of numbers (used for extractor normalization).
    """
    lines = [MAGIC, "dims " + " ".join(map(str, net.dims)), "activations " + " ".join(net.activations)]
    for key, vals in (extra or {}).items():
        vals = np.atleast_1d(np.asarray(vals, dtype=float))
        lines.append(f"{key} " + " ".join(f"{v:.17g}" for v in vals))
    flat = np.concatenate([p.ravel() for p in net.params()])
    lines.append(f"params {flat.size}")
    lines += [f"{v:.17g}" for v in flat]
    Path(path).write_text("\n".join(lines) + "\n")


def read_weights(path) -> tuple[Network, dict]:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != MAGIC:
        raise InvalidInput(f"{path}: not a weight file (missing '{MAGIC}' header)")
    header = {}
    i = 1
    while i < len(text) and not text[i].startswith("params"):
        key, _, rest = text[i].partition(" ")
        header[key] = rest.split()
        i += 1
    if i == len(text) or "dims" not in header or "activations" not in header:
        raise InvalidInput(f"{path}: incomplete header")
    n = int(text[i].split()[1])
    flat = np.array([float(v) for v in text[i + 1 : i + 1 + n]])
    if flat.size != n:
        raise InvalidInput(f"{path}: expected {n} parameters, found {flat.size}")
    dims = [int(d) for d in header.pop("dims")]
    acts = header.pop("activations")
    layers, k = [], 0
    for fan_in, fan_out, act in zip(dims[:-1], dims[1:], acts):
        W = flat[k : k + fan_in * fan_out].reshape(fan_out, fan_in)
        k += fan_in * fan_out
        b = flat[k : k + fan_out]
        k += fan_out
        layers.append(Layer(W, b, act))
    if k != n:
        raise InvalidInput(f"{path}: parameter count does not match dims")
    extra = {key: np.array([float(v) for v in vals]) for key, vals in header.items()}
    return Network(layers), extra
