"""Self-checks shared by the CLI and the acceptance suite."""

from dataclasses import dataclass

import numpy as np

from .baseline import ConstantSsModel
from .model import NnssModel
from .numkernel import SingularMatrix, spectral_radius
from .schurparam import build_transition, random_factors
from .train import loss_and_grad


def flat_grad(grads, params):
    return np.concatenate([np.ravel(grads.get(k, np.zeros_like(p))) for k, p in params.items()])


def fd_gradient(model, Yb, Ub, lam, h=1e-6, normalization="printed"):
    """Central finite differences of the total loss for every parameter entry."""
    out = []
    for p in model.params().values():
        for i in range(p.size):
            old = p.flat[i]
            p.flat[i] = old + h
            lp = loss_and_grad(model, Yb, Ub, lam, normalization, want_grad=False)[0]
            p.flat[i] = old - h
            lm = loss_and_grad(model, Yb, Ub, lam, normalization, want_grad=False)[0]
            p.flat[i] = old
            out.append((lp - lm) / (2 * h))
    return np.array(out)


def gradient_error(model, Yb, Ub, lam, normalization="printed"):
    """Norm-wise relative error between analytic and finite-difference gradients."""
    _, grads, _ = loss_and_grad(model, Yb, Ub, lam, normalization)
    a = flat_grad(grads, model.params())
    f = fd_gradient(model, Yb, Ub, lam, normalization=normalization)
    return float(np.linalg.norm(a - f) / max(np.linalg.norm(a), np.linalg.norm(f), 1e-300))


def random_gradient_case(seed, kind="nnss"):
    """A small random model and batch: n <= 3, L <= 10."""
    rng = np.random.default_rng(seed)
    n, m, r = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 3))
    L, B = int(rng.integers(3, 11)), int(rng.integers(1, 4))
    gamma = float(rng.choice([0.5, 0.9, 0.99, 1.0]))
    act = str(rng.choice(["sigmoid", "tanh"]))
    if kind == "nnss":
        model = NnssModel.create(n, m, r, enc_hidden=(int(rng.integers(1, 5)),),
                                 gen_hidden=(int(rng.integers(2, 6)), int(rng.integers(2, 6))),
                                 activation=act, gamma=gamma, seed=int(rng.integers(2**31)))
    else:
        model = ConstantSsModel.create(n, m, r, enc_hidden=(int(rng.integers(1, 5)),), gamma=gamma,
                                       seed=int(rng.integers(2**31)))
    model.eps[0] = rng.uniform(-2, 1)
    Yb = rng.standard_normal((B, L, m))
    Ub = rng.standard_normal((B, L, r))
    lam = float(rng.uniform(0.0, 1.0))
    return model, Yb, Ub, lam


def grad_check(samples=20, seed=0, kind="nnss"):
    """Relative gradient errors for ``samples`` random configurations."""
    ss = np.random.SeedSequence(seed).generate_state(samples)
    return [gradient_error(*random_gradient_case(int(s), kind)) for s in ss]


@dataclass
class StabilityResult:
    samples: int
    violations: int
    singular: int
    max_ratio: float  # largest spectral_radius / gamma seen


def stability_check(samples, ns=(1, 2, 3, 4, 5, 6), gammas=(0.5, 0.9, 1.0), eps_range=(-6.0, 2.0),
                    seed=0):
    """Sample random Schur factors and count draws with radius >= gamma."""
    rng = np.random.default_rng(seed)
    viol = sing = 0
    worst = 0.0
    for _ in range(samples):
        n = int(rng.choice(ns))
        g = float(rng.choice(gammas))
        f = random_factors(rng, n, g, eps_range)
        try:
            rad = spectral_radius(build_transition(f)).spectral_radius
        except SingularMatrix:
            sing += 1
            continue
        worst = max(worst, rad / g)
        viol += rad >= g
    return StabilityResult(samples, int(viol), sing, worst)
