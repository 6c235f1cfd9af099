"""NN-SS model and the shared state-space rollout.

The recursion, for k = 0 .. T-1 with rho_k = x(k):

    (A_k, B_k, C_k) = matrices(rho_k)
    x(k+1) = A_k x(k) + B_k u(k)
    y(k)   = C_k x(k)

``rollout`` and ``rollout_backward`` work with any object exposing
``step_forward(rho) -> (A, B, C, cache)`` and
``step_backward(cache, dA, dB, dC) -> (grads, drho)``; the constant-matrix
baseline reuses them unchanged. Optional hooks ``begin_rollout()`` and
``end_backward(grads)`` let a model hoist work out of the time loop.
"""

from dataclasses import dataclass, field

import numpy as np

from . import net
from .numkernel import spectral_radius
from .schurparam import transition_backward, transition_forward


class NnssModel:
    """Encoder ``g``, generator ``f``, global ``eps_tilde`` and fixed ``gamma``."""

    kind = "nnss"

    def __init__(self, encoder, generator, n, m, r, eps_tilde=0.0, gamma=0.99):
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
        if encoder.in_width != m or encoder.out_width != n:
            raise net.ShapeMismatch(f"encoder maps {encoder.in_width}->{encoder.out_width}, need {m}->{n}")
        if generator.in_width != n:
            raise net.ShapeMismatch(f"generator input width {generator.in_width} != n = {n}")
        if generator.out_width != net.output_width(n, m, r):
            raise net.ShapeMismatch(
                f"generator width {generator.out_width} != 5n^2+nr+mn = {net.output_width(n, m, r)}"
            )
        self.encoder = encoder
        self.generator = generator
        self.n, self.m, self.r = n, m, r
        self.eps = np.array([float(eps_tilde)])
        self.gamma = float(gamma)

    @classmethod
    def create(cls, n, m, r, enc_hidden=(32,), gen_hidden=(32, 32), activation="sigmoid",
               gamma=0.99, seed=0):
        ss = np.random.SeedSequence(seed).spawn(2)
        enc = net.init_encoder(m, n, enc_hidden, seed=ss[0])
        gen = net.init_generator(n, m, r, gen_hidden, activation, seed=ss[1])
        return cls(enc, gen, n, m, r, 0.0, gamma)

    @property
    def eps_tilde(self):
        return float(self.eps[0])

    def params(self):
        p = self.encoder.params("enc")
        p.update(self.generator.params("gen"))
        p["eps_tilde"] = self.eps
        return p

    def copy(self):
        return NnssModel(self.encoder.copy(), self.generator.copy(), self.n, self.m, self.r,
                         self.eps_tilde, self.gamma)

    def step_forward(self, rho):
        out, gcache = self.generator.forward(rho)
        W, V, B, C = net.split_output(out, self.n, self.m, self.r)
        A, tcache = transition_forward(W, V, self.eps_tilde, self.gamma)
        return A, B, C, (gcache, tcache)

    def step_backward(self, cache, dA, dB, dC):
        gcache, tcache = cache
        dW, dV, dEps = transition_backward(tcache, dA)
        deltas, drho = self.generator.backward_deltas(gcache, net.join_output(dW, dV, dB, dC))
        # weight gradients are formed once per rollout in end_backward
        self._pending.append(([c[0] for c in gcache], deltas))
        return {"eps_tilde": np.array([dEps])}, drho

    def begin_rollout(self):
        self._pending = []

    def end_backward(self, grads):
        nl = len(self.generator.layers)
        inputs = [np.concatenate([p[0][i] for p in self._pending]) for i in range(nl)]
        deltas = [np.concatenate([p[1][i] for p in self._pending]) for i in range(nl)]
        self._pending = []
        gg = self.generator.grads_from_deltas(inputs, deltas)
        grads.update(self.generator.named_grads("gen", gg))


@dataclass
class RolloutTrace:
    states: np.ndarray
    outputs: np.ndarray
    matrices: list = field(default_factory=list)
    spectral_radii: list = field(default_factory=list)


def rollout(model, U, x0):
    """Batched rollout over inputs ``U`` (B, T, r) from states ``x0`` (B, n).

    Returns states (B, T+1, n), outputs (B, T, m) and per-step caches.
    """
    Bn, T, _ = U.shape
    X = np.empty((Bn, T + 1, model.n))
    Y = np.empty((Bn, T, model.m))
    X[:, 0] = x0
    caches = []
    if hasattr(model, "begin_rollout"):
        model.begin_rollout()
    for k in range(T):
        x = X[:, k]
        A, Bm, C, cache = model.step_forward(x)
        X[:, k + 1] = (A @ x[..., None])[..., 0] + (Bm @ U[:, k, :, None])[..., 0]
        Y[:, k] = (C @ x[..., None])[..., 0]
        caches.append((A, Bm, C, cache))
    return X, Y, caches


def _accumulate(total, grads):
    for k, g in grads.items():
        if k in total:
            total[k] += g
        else:
            total[k] = np.array(g, dtype=float)


def rollout_backward(model, X, U, caches, dY, dX):
    """Exact BPTT through :func:`rollout`.

    ``dY`` (B, T, m) and ``dX`` (B, T+1, n) are loss gradients with respect to
    outputs and states. Returns ``(grads, dx0)``; grads excludes the encoder.
    """
    T = U.shape[1]
    grads = {}
    gx = np.array(dX[:, T], dtype=float)
    for k in range(T - 1, -1, -1):
        A, _, C, cache = caches[k]
        x = X[:, k]
        dy = dY[:, k]
        dA = gx[:, :, None] * x[:, None, :]
        dB = gx[:, :, None] * U[:, k, None, :]
        dC = dy[:, :, None] * x[:, None, :]
        step_grads, drho = model.step_backward(cache, dA, dB, dC)
        _accumulate(grads, step_grads)
        gx = (
            (np.swapaxes(A, -1, -2) @ gx[..., None])[..., 0]
            + (np.swapaxes(C, -1, -2) @ dy[..., None])[..., 0]
            + dX[:, k]
            + drho
        )
    if hasattr(model, "end_backward"):
        model.end_backward(grads)
    return grads, gx


def infer(model, u_seq, y0, audit=False, record_matrices=False):
    """Single-trajectory rollout: encode ``y0`` and run over ``u_seq`` (K+1, r).

    The trace holds K+2 states and K+1 outputs. With ``audit`` the spectral
    radius of every generated transition matrix is recorded.
    """
    U = np.asarray(u_seq, dtype=float).reshape(1, -1, model.r)
    x0 = model.encoder(np.asarray(y0, dtype=float).reshape(1, -1))
    X, Y, caches = rollout(model, U, x0)
    trace = RolloutTrace(X[0], Y[0])
    if audit or record_matrices:
        for A, Bm, C, _ in caches:
            A0 = np.broadcast_to(A, (1,) + A.shape[-2:])[0].copy()
            if audit:
                trace.spectral_radii.append(spectral_radius(A0).spectral_radius)
            if record_matrices:
                trace.matrices.append(
                    (A0, np.broadcast_to(Bm, (1,) + Bm.shape[-2:])[0].copy(),
                     np.broadcast_to(C, (1,) + C.shape[-2:])[0].copy())
                )
    return trace


def simulate(model, Y, U):
    """Simulation mode over a whole series: encode ``Y[0]``, then run free on ``U``.

    Returns predicted outputs with the same row count as ``Y``.
    """
    Y = np.asarray(Y, dtype=float)
    return infer(model, U, Y[0]).outputs
