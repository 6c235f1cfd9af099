"""Constant-matrix Schur-stable state-space baseline.

Same encoder, losses and training loop as the NN-SS model; only the
scheduling dependence is removed, so ``(A, B, C)`` are fixed trainable
matrices with ``A`` built from free Schur factors.
"""

import numpy as np

from . import net
from .model import infer
from .schurparam import SchurFactors, fit_to_target, transition_backward, transition_forward
from .train import fit


class ConstantSsModel:
    kind = "baseline"

    def __init__(self, factors, B, C, encoder):
        self.n = factors.n
        self.W = np.array(factors.W, dtype=float)
        self.V = np.array(factors.V, dtype=float)
        self.eps = np.array([factors.eps_tilde])
        self.gamma = factors.gamma
        self.B = np.array(B, dtype=float).reshape(self.n, -1)
        self.C = np.array(C, dtype=float).reshape(-1, self.n)
        self.m, self.r = self.C.shape[0], self.B.shape[1]
        if encoder.in_width != self.m or encoder.out_width != self.n:
            raise net.ShapeMismatch("encoder does not map outputs to states")
        self.encoder = encoder

    @classmethod
    def create(cls, n, m, r, enc_hidden=(32,), gamma=0.99, seed=0, A_init=None):
        ss = np.random.SeedSequence(seed).spawn(3)
        rng = np.random.default_rng(ss[0])
        if A_init is None:
            factors = SchurFactors(rng.standard_normal((2 * n, 2 * n)) / np.sqrt(2 * n),
                                   rng.standard_normal((n, n)) / np.sqrt(n), 0.0, gamma)
        else:
            factors, _ = fit_to_target(A_init, gamma, seed=int(rng.integers(2**31)))
        B = rng.uniform(-1, 1, (n, r)) / np.sqrt(n)
        C = rng.uniform(-1, 1, (m, n)) / np.sqrt(n)
        return cls(factors, B, C, net.init_encoder(m, n, enc_hidden, seed=ss[2]))

    @property
    def eps_tilde(self):
        return float(self.eps[0])

    @property
    def factors(self):
        return SchurFactors(self.W, self.V, self.eps_tilde, self.gamma)

    @property
    def A(self):
        return transition_forward(self.W, self.V, self.eps_tilde, self.gamma)[0]

    def params(self):
        p = self.encoder.params("enc")
        p.update({"W": self.W, "V": self.V, "eps_tilde": self.eps, "B": self.B, "C": self.C})
        return p

    def copy(self):
        return ConstantSsModel(SchurFactors(self.W.copy(), self.V.copy(), self.eps_tilde, self.gamma),
                               self.B.copy(), self.C.copy(), self.encoder.copy())

    def begin_rollout(self):
        self._step = transition_forward(self.W, self.V, self.eps_tilde, self.gamma)

    def step_forward(self, rho):
        A, tcache = self._step
        return A, self.B, self.C, tcache

    def step_backward(self, cache, dA, dB, dC):
        # A is shared by every step; its Schur backward runs once in end_backward
        return {"_dA": dA.sum(axis=0), "B": dB.sum(axis=0), "C": dC.sum(axis=0)}, 0.0

    def end_backward(self, grads):
        dW, dV, dEps = transition_backward(self._step[1], grads.pop("_dA"))
        grads.update({"W": dW, "V": dV, "eps_tilde": np.array([dEps])})


def baseline_infer(model, u_seq, y0, audit=False):
    """Rollout with the frozen (A, B, C); identical recursion to the NN-SS model."""
    return infer(model, u_seq, y0, audit=audit)


def baseline_fit(windows, val, config, init=None, m=None, r=None, model=None):
    """Train a constant-matrix baseline; ``init`` is an optional target A."""
    if model is None:
        if m is None or r is None:
            m, r = windows[0].outputs.shape[1], windows[0].inputs.shape[1]
        model = ConstantSsModel.create(config.order_n, m, r, tuple(config.enc_hidden),
                                       config.gamma, config.seed, A_init=init)
    return fit(model, windows, val, config)

