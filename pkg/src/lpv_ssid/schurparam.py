"""Stable-by-design transition matrices.

Free factors ``(W, V, eps_tilde, gamma)`` map to

    S = W^T W + exp(eps_tilde) I_2n
    E = (S11 + S22) / (2 gamma) + V - V^T
    A = S12 E^{-1}

with ``S11 = S[:n, :n]``, ``S12 = S[:n, n:]``, ``S22 = S[n:, n:]``. Every
output satisfies ``spectral_radius(A) < gamma``: with ``P = S11`` the matrix
``gamma (E + E^T) - P - S12^T P^{-1} S12`` equals the Schur complement
``S22 - S12^T S11^{-1} S12`` of the positive definite ``S``, which makes
``E^T P^{-1} E`` a strict Lyapunov certificate for ``E^{-1} S12 / gamma``
(similar to ``A / gamma``). The symmetric part of ``E`` is positive definite,
so ``E`` is never singular. The map is onto the open disk of radius gamma.

All batched helpers take a leading batch axis: ``W`` is ``(B, 2n, 2n)``.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .numkernel import _eye, as_mat, invert, spectral_radius

logger = logging.getLogger(__name__)

EPS_TILDE_CLAMP = 30.0


@dataclass(frozen=True)
class SchurFactors:
    W: np.ndarray
    V: np.ndarray
    eps_tilde: float = 0.0
    gamma: float = 0.99

    def __post_init__(self):
        V = as_mat(self.V, name="V")
        n = V.shape[0]
        if n < 1 or V.shape[1] != n:
            raise ValueError(f"V must be square with n >= 1, got {V.shape}")
        W = as_mat(self.W, 2 * n, 2 * n, name="W")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not np.isfinite(self.eps_tilde):
            raise ValueError("eps_tilde must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "eps_tilde", float(self.eps_tilde))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n(self):
        return self.V.shape[0]


@dataclass(frozen=True)
class SchurGradients:
    dW: np.ndarray
    dV: np.ndarray
    dEpsTilde: float


def clamp_eps_tilde(eps_tilde):
    """Return ``(clamped value, was_clamped)``."""
    e = float(np.clip(eps_tilde, -EPS_TILDE_CLAMP, EPS_TILDE_CLAMP))
    return e, e != eps_tilde


def assemble_S(W, eps_tilde):
    """``S = W^T W + exp(eps_tilde) I``; eps_tilde is clamped to [-30, 30]."""
    W = np.asarray(W, dtype=float)
    if W.shape[-1] != W.shape[-2] or W.shape[-1] % 2:
        raise ValueError(f"W must be square of even size, got {W.shape}")
    e, clamped = clamp_eps_tilde(eps_tilde)
    if clamped:
        logger.warning("eps_tilde=%g clamped to %g before exponentiation", eps_tilde, e)
    S = np.swapaxes(W, -1, -2) @ W
    S += np.exp(e) * _eye(W.shape[-1])
    return S


def transition_forward(W, V, eps_tilde, gamma):
    """Batched transition map. Returns ``A`` (B, n, n) and a backward cache."""
    n = V.shape[-1]
    S = assemble_S(W, eps_tilde)
    S11 = S[..., :n, :n]
    S12 = S[..., :n, n:]
    S22 = S[..., n:, n:]
    E = (S11 + S22) / (2.0 * gamma) + V - np.swapaxes(V, -1, -2)
    # symmetric part of E is positive definite: no row exchanges needed
    Einv = invert(E, pivoting=False)
    A = S12 @ Einv
    return A, (W, S12, Einv, eps_tilde, gamma)


def transition_backward(cache, dA):
    """Reverse pass of :func:`transition_forward`.

    Returns per-sample ``dW``, ``dV`` and the batch-summed ``d eps_tilde``.
    """
    W, S12, Einv, eps_tilde, gamma = cache
    n = S12.shape[-1]
    EinvT = np.swapaxes(Einv, -1, -2)
    dS12 = dA @ EinvT
    # d(E^-1) = -E^-1 dE E^-1
    dE = -EinvT @ (np.swapaxes(S12, -1, -2) @ dA) @ EinvT
    dV = dE - np.swapaxes(dE, -1, -2)
    dS = np.zeros(W.shape)
    dS[..., :n, :n] = dE / (2.0 * gamma)
    dS[..., n:, n:] = dE / (2.0 * gamma)
    dS[..., :n, n:] = dS12
    dW = W @ (dS + np.swapaxes(dS, -1, -2))
    e, clamped = clamp_eps_tilde(eps_tilde)
    dEps = 0.0 if clamped else float(np.exp(e) * np.trace(dS, axis1=-2, axis2=-1).sum())
    return dW, dV, dEps


def build_transition(f):
    """Schur-stable ``A`` for one set of factors; ``spectral_radius(A) < gamma``."""
    A, _ = transition_forward(f.W, f.V, f.eps_tilde, f.gamma)
    return A


def build_transition_backward(f, dA):
    dA = as_mat(dA, f.n, f.n, name="dA")
    _, cache = transition_forward(f.W, f.V, f.eps_tilde, f.gamma)
    dW, dV, dEps = transition_backward(cache, dA)
    return SchurGradients(dW, dV, dEps)


def random_factors(rng, n, gamma, eps_range=(-6.0, 2.0)):
    """Draw factors with log-uniform entry scale in [0.1, 10] and uniform eps_tilde."""
    scale = 10.0 ** rng.uniform(-1.0, 1.0)
    W = scale * rng.standard_normal((2 * n, 2 * n))
    V = scale * rng.standard_normal((n, n))
    return SchurFactors(W, V, rng.uniform(*eps_range), gamma)


def fit_to_target(A_target, gamma, seed, lr=1e-2, max_iter=5000, tol=1e-8, train_eps=True):
    """Fit factors whose transition matrix approximates ``A_target``.

    Adam on the squared Frobenius error from a seeded random start. Returns
    ``(best factors, best Frobenius residual)``. Targets outside the open disk
    of radius ``gamma`` are unreachable; a warning is issued and the residual
    stays bounded away from zero.
    """
    # local import: train depends on this module
    from .train import AdamState, adam_step

    T = as_mat(A_target, name="A_target")
    n = T.shape[0]
    if T.shape[1] != n:
        raise ValueError(f"A_target must be square, got {T.shape}")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if spectral_radius(T).spectral_radius >= gamma:
        warnings.warn(
            f"target spectral radius >= gamma={gamma}; the fit cannot reach it exactly",
            stacklevel=2,
        )
    rng = np.random.default_rng(seed)
    params = {
        "W": rng.standard_normal((2 * n, 2 * n)) / np.sqrt(2 * n),
        "V": rng.standard_normal((n, n)) / np.sqrt(n),
        "eps_tilde": np.zeros(1),
    }
    state = AdamState.zeros_like(params)
    best = (np.inf, None)
    for _ in range(max_iter + 1):
        A, cache = transition_forward(params["W"], params["V"], params["eps_tilde"][0], gamma)
        R = A - T
        res = float(np.linalg.norm(R))
        if res < best[0]:
            best = (res, {k: v.copy() for k, v in params.items()})
        if res < tol:
            break
        dW, dV, dEps = transition_backward(cache, 2.0 * R)
        grads = {"W": dW, "V": dV, "eps_tilde": np.array([dEps if train_eps else 0.0])}
        adam_step(params, grads, state, lr)
    res, p = best
    return SchurFactors(p["W"], p["V"], float(p["eps_tilde"][0]), gamma), res
