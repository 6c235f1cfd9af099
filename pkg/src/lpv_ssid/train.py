"""Trajectory windows, the composite multi-step loss, Adam, and the fit loop."""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .model import rollout, rollout_backward, simulate
from .numkernel import SingularMatrix, spectral_radius

logger = logging.getLogger(__name__)


class WindowTooLong(ValueError):
    pass


class DegenerateWindow(ValueError):
    pass


class NonFiniteLoss(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrajectoryWindow:
    outputs: np.ndarray
    inputs: np.ndarray
    origin_index: int  # 1-based start row in the source series


@dataclass
class TrainConfig:
    L: int = 80
    stride: int = 2
    batch_size: int = 64
    learning_rate: float = 1e-3
    epochs: int = 200
    lam: float = 0.01
    seed: int = 0
    gamma: float = 0.99
    patience: int = 20
    order_n: int = 2
    normalization: str = "printed"
    enc_hidden: tuple = (32,)
    gen_hidden: tuple = (32, 32)
    activation: str = "sigmoid"
    audit_samples: int = 16

    def validate(self):
        if self.L < 2:
            raise DegenerateWindow(f"window length L={self.L} must be >= 2")
        if self.normalization == "printed" and self.L < 3:
            # the state term then has a single step and a zero denominator
            raise DegenerateWindow("printed normalization needs L >= 3")
        if self.normalization not in ("printed", "natural"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.stride < 1 or self.batch_size < 1:
            raise ValueError("stride and batch_size must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.epochs < 0 or self.patience < 1:
            raise ValueError("epochs must be >= 0 and patience >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.order_n < 1:
            raise ValueError("order_n must be >= 1")
        return self

    def to_dict(self):
        d = asdict(self)
        d["enc_hidden"] = list(self.enc_hidden)
        d["gen_hidden"] = list(self.gen_hidden)
        return d


@dataclass
class AdamState:
    first_moment: dict
    second_moment: dict
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    @classmethod
    def zeros_like(cls, params):
        return cls(
            {k: np.zeros_like(v) for k, v in params.items()},
            {k: np.zeros_like(v) for k, v in params.items()},
        )


def adam_step(params, grads, state, lr):
    """One bias-corrected Adam update, in place on ``params`` and ``state``.

    Parameters missing from ``grads`` see a zero gradient.
    """
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for k, p in params.items():
        g = grads.get(k)
        m = state.first_moment[k]
        v = state.second_moment[k]
        m *= b1
        v *= b2
        if g is not None:
            m += (1.0 - b1) * g
            v += (1.0 - b2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps_adam)
    return params, state


@dataclass
class TrainReport:
    seed: int
    train_loss: list = field(default_factory=list)
    val_rmse: list = field(default_factory=list)
    max_spectral_radius: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    def rows(self):
        for i, (tl, vr, sr) in enumerate(zip(self.train_loss, self.val_rmse, self.max_spectral_radius)):
            yield {"epoch": i, "train_loss": tl, "val_rmse": vr, "max_spectral_radius": sr}


def make_windows(Y, U, L, s):
    """Length-``L`` windows starting at rows 1, 1+s, ... (1-based)."""
    Y = np.asarray(Y, dtype=float)
    U = np.asarray(U, dtype=float)
    K = Y.shape[0]
    if U.shape[0] != K:
        raise ValueError("outputs and inputs need the same number of rows")
    if L > K:
        raise WindowTooLong(f"window length {L} exceeds series length {K}")
    if L < 1 or s < 1:
        raise ValueError("L and s must be >= 1")
    N = (K - L) // s + 1
    return [TrajectoryWindow(Y[i * s : i * s + L], U[i * s : i * s + L], 1 + i * s) for i in range(N)]


def _denominator(T, width, normalization):
    if normalization == "printed":
        if T < 2:
            raise DegenerateWindow("need at least two time steps for the printed normalization")
        return (T - 1) * width
    return T * width


def _as_batch(a):
    a = np.asarray(a, dtype=float)
    return a[None] if a.ndim == 2 else a


def response_loss(y, yhat, normalization="printed"):
    """Batch-mean multi-step output error.

    ``y``/``yhat`` hold steps k = 0..L along axis 1, so T = L + 1 rows. The
    printed normalization sums all T rows and divides by ``L * m``; the
    natural one divides by ``T * m``.
    """
    y, yhat = _as_batch(y), _as_batch(yhat)
    if y.shape != yhat.shape:
        raise ValueError(f"shape mismatch {y.shape} vs {yhat.shape}")
    _, T, m = y.shape
    d = _denominator(T, m, normalization)
    return float(np.mean(np.sum((y - yhat) ** 2, axis=(1, 2)) / d))


def state_loss(x, x_enc, normalization="printed"):
    """Batch-mean gap between propagated and encoder states.

    Inputs hold steps k = 1..L along axis 1 (the initial state excluded), so
    T = L rows; the printed normalization divides by ``(L - 1) * n``.
    """
    x, x_enc = _as_batch(x), _as_batch(x_enc)
    if x.shape != x_enc.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_enc.shape}")
    _, T, n = x.shape
    if normalization == "printed" and T == 1:
        raise DegenerateWindow("state loss with L = 1 divides by zero")
    d = _denominator(T, n, normalization)
    return float(np.mean(np.sum((x - x_enc) ** 2, axis=(1, 2)) / d))


def total_loss(response, state, lam):
    return response + lam * state


def stack_windows(windows):
    return (
        np.stack([w.outputs for w in windows]),
        np.stack([w.inputs for w in windows]),
    )


def loss_and_grad(model, Yb, Ub, lam, normalization="printed", want_grad=True):
    """Total loss over a batch of windows and its gradient for every parameter.

    Windows have L rows. The rollout covers rows 0..L-1; the state term
    compares propagated and encoded states at rows 1..L-1.
    """
    Bn, L, m = Yb.shape
    n = model.n
    Xe, ecache = model.encoder.forward(Yb.reshape(Bn * L, m))
    Xe = Xe.reshape(Bn, L, n)
    X, Yhat, caches = rollout(model, Ub, Xe[:, 0])
    resp = response_loss(Yb, Yhat, normalization)
    st = state_loss(X[:, 1:L], Xe[:, 1:], normalization)
    loss = total_loss(resp, st, lam)
    parts = {"response": resp, "state": st, "caches": caches}
    if not want_grad:
        return loss, None, parts
    dr = _denominator(L, m, normalization)
    ds = _denominator(L - 1, n, normalization)
    dY = -2.0 * (Yb - Yhat) / (Bn * dr)
    dX = np.zeros_like(X)
    gap = 2.0 * lam * (X[:, 1:L] - Xe[:, 1:]) / (Bn * ds)
    dX[:, 1:L] = gap
    grads, dx0 = rollout_backward(model, X, Ub, caches, dY, dX)
    dXe = np.empty_like(Xe)
    dXe[:, 0] = dx0
    dXe[:, 1:] = -gap
    eg, _ = model.encoder.backward(ecache, dXe.reshape(Bn * L, n))
    grads.update(model.encoder.named_grads("enc", eg))
    return loss, grads, parts


def channel_rmse(y, yhat):
    return float(np.mean(np.sqrt(np.mean((np.asarray(y) - np.asarray(yhat)) ** 2, axis=0))))


def _audit(caches, rng, k):
    """Largest spectral radius among ``k`` sampled transition matrices."""
    worst = 0.0
    for _ in range(k):
        A = caches[rng.integers(len(caches))][0]
        A = A[rng.integers(A.shape[0])] if A.ndim == 3 else A
        worst = max(worst, spectral_radius(A).spectral_radius)
    return worst


def fit(model, windows, val, config, val_metric=None):
    """Train ``model`` in place on ``windows``; returns ``(model, TrainReport)``.

    ``val`` is a ``(Y, U)`` pair evaluated in simulation mode after every
    epoch. The best-RMSE parameters are restored at the end. ``val_metric``
    replaces the validation RMSE (used to test early stopping).
    """
    config.validate()
    report = TrainReport(seed=config.seed)
    if config.epochs == 0:
        return model, report
    if not windows:
        raise ValueError("no training windows")
    Yw, Uw = stack_windows(windows)
    if Yw.shape[1] < 3 and config.normalization == "printed":
        raise DegenerateWindow("printed normalization needs windows of at least 3 rows")
    params = model.params()
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(config.seed)
    audit_rng = np.random.default_rng([config.seed, 1])
    Yv, Uv = val
    best = (math.inf, {k: v.copy() for k, v in params.items()})
    since_best = 0
    N = len(windows)
    for epoch in range(config.epochs):
        order = rng.permutation(N)
        epoch_loss = 0.0
        caches = None
        for start in range(0, N, config.batch_size):
            idx = order[start : start + config.batch_size]
            try:
                loss, grads, parts = loss_and_grad(model, Yw[idx], Uw[idx], config.lam, config.normalization)
            except SingularMatrix as exc:
                # the bracket is nonsingular for finite factors, so this means NaN or overflow
                raise NonFiniteLoss(
                    f"transition bracket broke down at epoch {epoch}, batch starting {start}: {exc}; "
                    f"check the data for NaN and try a lower learning rate than {config.learning_rate}"
                ) from exc
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch}, batch starting {start} "
                    f"(response={parts['response']}, state={parts['state']}); "
                    f"try a lower learning rate than {config.learning_rate}"
                )
            adam_step(params, grads, state, config.learning_rate)
            epoch_loss += loss * len(idx)
            caches = parts["caches"]
        report.train_loss.append(epoch_loss / N)
        report.max_spectral_radius.append(_audit(caches, audit_rng, config.audit_samples))
        if val_metric is not None:
            score = float(val_metric(model, epoch))
        else:
            score = channel_rmse(Yv, simulate(model, Yv, Uv))
        report.val_rmse.append(score)
        logger.info("epoch %d loss %.6g val_rmse %.6g", epoch, report.train_loss[-1], score)
        if score < best[0]:
            best = (score, {k: v.copy() for k, v in params.items()})
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                report.stopped_early = True
                break
    for k, v in best[1].items():
        params[k][...] = v
    return model, report
