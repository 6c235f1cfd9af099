"""Dense networks: the affine encoder and the state-space generator MLP.

Inputs are batched row vectors, ``x`` of shape ``(B, in_width)``. A layer
computes ``act(x @ weight.T + bias)`` with ``weight`` of shape
``(out_width, in_width)``.

The generator output of width ``5n^2 + nr + mn`` is split in this order,
each piece reshaped row-major:

    [0, 4n^2)                 -> W  (2n x 2n)
    [4n^2, 5n^2)              -> V  (n x n)
    [5n^2, 5n^2 + nr)         -> B  (n x r)
    [5n^2 + nr, 5n^2+nr+mn)   -> C  (m x n)
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("identity", "sigmoid", "tanh", "relu")


class ShapeMismatch(ValueError):
    pass


def activate(name, z):
    if name == "identity":
        return z
    if name == "sigmoid":
        return expit(z)
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    raise ValueError(f"unknown activation {name!r}")


def activate_grad(name, z, a):
    """Derivative of the activation given pre-activation ``z`` and output ``a``."""
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (z > 0.0).astype(float)
    return np.ones_like(z)


@dataclass
class DenseLayer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float).reshape(-1)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeMismatch(
                f"weight {self.weight.shape} and bias {self.bias.shape} are inconsistent"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_width(self):
        return self.weight.shape[1]

    @property
    def out_width(self):
        return self.weight.shape[0]


class Mlp:
    """Stack of dense layers with cached forward and explicit backward."""

    def __init__(self, layers):
        self.layers = list(layers)
        if not self.layers:
            raise ShapeMismatch("a network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_width != b.in_width:
                raise ShapeMismatch(f"layer widths {a.out_width} -> {b.in_width} do not chain")

    @property
    def in_width(self):
        return self.layers[0].in_width

    @property
    def out_width(self):
        return self.layers[-1].out_width

    def forward(self, x):
        """Return ``(output, cache)`` for a batch ``x`` of shape (B, in_width)."""
        x = np.asarray(x, dtype=float)
        cache = []
        for layer in self.layers:
            z = x @ layer.weight.T + layer.bias
            a = activate(layer.activation, z)
            cache.append((x, z, a))
            x = a
        return x, cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, dout):
        """Gradients for every layer as ``[(dweight, dbias), ...]`` plus ``dx``."""
        deltas, dx = self.backward_deltas(cache, dout)
        return self.grads_from_deltas([c[0] for c in cache], deltas), dx

    def backward_deltas(self, cache, dout):
        """Per-layer pre-activation gradients and ``dx``, without weight grads."""
        deltas = [None] * len(self.layers)
        g = np.asarray(dout, dtype=float)
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            _, z, a = cache[i]
            if layer.activation != "identity":
                g = g * activate_grad(layer.activation, z, a)
            deltas[i] = g
            g = g @ layer.weight
        return deltas, g

    @staticmethod
    def grads_from_deltas(inputs, deltas):
        return [(g.T @ x, g.sum(axis=0)) for x, g in zip(inputs, deltas)]

    def params(self, prefix):
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"{prefix}.{i}.weight"] = layer.weight
            out[f"{prefix}.{i}.bias"] = layer.bias
        return out

    def named_grads(self, prefix, grads):
        out = {}
        for i, (dw, db) in enumerate(grads):
            out[f"{prefix}.{i}.weight"] = dw
            out[f"{prefix}.{i}.bias"] = db
        return out

    def spec(self):
        return [
            {"in": l.in_width, "out": l.out_width, "activation": l.activation}
            for l in self.layers
        ]

    def copy(self):
        return type(self)(
            [DenseLayer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )


class EncoderNet(Mlp):
    """Affine map y(k) -> x(k); every layer uses the identity activation."""

    def __init__(self, layers):
        super().__init__(layers)
        if any(l.activation != "identity" for l in self.layers):
            raise ValueError("encoder layers must use the identity activation")


class GeneratorNet(Mlp):
    """MLP rho -> flat (W, V, B, C) vector; the output layer is linear."""

    def __init__(self, layers):
        super().__init__(layers)
        if self.layers[-1].activation != "identity":
            raise ValueError("the generator output layer must be linear")


@dataclass
class GeneratedMatrices:
    W: np.ndarray
    V: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def flatten(self):
        return np.concatenate([self.W.ravel(), self.V.ravel(), self.B.ravel(), self.C.ravel()])


def output_width(n, m, r):
    return 5 * n * n + n * r + m * n


def split_output(out, n, m, r):
    """Split generator outputs of shape (..., D) into batched (W, V, B, C)."""
    out = np.asarray(out, dtype=float)
    D = output_width(n, m, r)
    if out.shape[-1] != D:
        raise ShapeMismatch(f"generator width {out.shape[-1]} != 5n^2+nr+mn = {D}")
    lead = out.shape[:-1]
    o1, o2, o3 = 4 * n * n, 5 * n * n, 5 * n * n + n * r
    return (
        out[..., :o1].reshape(lead + (2 * n, 2 * n)),
        out[..., o1:o2].reshape(lead + (n, n)),
        out[..., o2:o3].reshape(lead + (n, r)),
        out[..., o3:].reshape(lead + (m, n)),
    )


def join_output(W, V, B, C):
    """Inverse of :func:`split_output` for batched pieces."""
    lead = W.shape[:-2]
    return np.concatenate(
        [W.reshape(lead + (-1,)), V.reshape(lead + (-1,)), B.reshape(lead + (-1,)), C.reshape(lead + (-1,))],
        axis=-1,
    )


def encoder_forward(g, y):
    """Initial-state estimate for one output vector ``y`` of length m."""
    return g(np.asarray(y, dtype=float).reshape(1, -1))[0]


def generator_forward(f, rho, n, m, r):
    out = f(np.asarray(rho, dtype=float).reshape(1, -1))[0]
    W, V, B, C = split_output(out, n, m, r)
    return GeneratedMatrices(W, V, B, C)


def init_weights(widths, activations, seed):
    """Glorot-uniform weights and zero biases for the given layer widths.

    ``widths`` lists every width from input to output; ``activations`` has
    one entry per layer.
    """
    if len(activations) != len(widths) - 1:
        raise ValueError("need one activation per layer")
    if any(w < 1 for w in widths):
        raise ValueError(f"widths must be positive, got {widths}")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(widths[:-1], widths[1:], activations):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out), act))
    return layers


def init_encoder(m, n, hidden=(32,), seed=0):
    widths = [m, *hidden, n]
    return EncoderNet(init_weights(widths, ["identity"] * (len(widths) - 1), seed))


def init_generator(n, m, r, hidden=(32, 32), activation="sigmoid", seed=0):
    widths = [n, *hidden, output_width(n, m, r)]
    acts = [activation] * len(hidden) + ["identity"]
    return GeneratorNet(init_weights(widths, acts, seed))
