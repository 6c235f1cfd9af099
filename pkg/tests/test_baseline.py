import numpy as np
import pytest

from lpv_ssid.baseline import ConstantSsModel, baseline_fit, baseline_infer
from lpv_ssid.checks import gradient_error
from lpv_ssid.data import RawSeries, chrono_split, input_signal, zscore_fit
from lpv_ssid.evaluation import simulate_and_report
from lpv_ssid.model import infer
from lpv_ssid.numkernel import spectral_radius
from lpv_ssid.schurparam import build_transition, random_factors
from lpv_ssid.train import TrainConfig, make_windows
from rigs import HALF_W, rigged_baseline, rigged_nnss


def test_hand_recursion():
    model = rigged_baseline(HALF_W, [[0.0]], [[1.0]], [[1.0]])
    assert model.A[0, 0] == 0.5
    tr = baseline_infer(model, [[1.0], [0.0], [0.0]], [1.0])
    assert tr.outputs[:, 0].tolist() == [1.0, 1.5, 0.75]


def test_matches_constant_generator(rng):
    f = random_factors(rng, 3, 0.9)
    B, C = rng.standard_normal((3, 2)), rng.standard_normal((2, 3))
    base = rigged_baseline(f.W, f.V, B, C, f.eps_tilde, f.gamma)
    nnss = rigged_nnss(f.W, f.V, B, C, f.eps_tilde, f.gamma)
    u, y0 = rng.standard_normal((40, 2)), rng.standard_normal(2)
    a, b = baseline_infer(base, u, y0), infer(nnss, u, y0)
    np.testing.assert_allclose(a.outputs, b.outputs, atol=1e-12)
    np.testing.assert_allclose(a.states, b.states, atol=1e-12)


def test_free_response_decays(rng):
    f = random_factors(rng, 3, 0.95)
    model = rigged_baseline(f.W, f.V, np.ones((3, 1)), np.ones((1, 3)), f.eps_tilde, f.gamma)
    rho = spectral_radius(build_transition(f)).spectral_radius
    tr = infer(model, np.zeros((200, 1)), [1.0])
    norms = np.linalg.norm(tr.states, axis=1)
    k = np.arange(len(norms))
    # the constant absorbs transient growth from a non-normal A
    assert np.all(norms <= 1e3 * norms[0] * (rho + 1e-3) ** k)
    assert norms[-1] < norms[0]


def test_init_from_zero_target():
    model = ConstantSsModel.create(2, 1, 1, A_init=np.zeros((2, 2)), seed=0)
    assert np.abs(model.A).max() < 1e-3
    tr = infer(model, np.zeros((3, 1)), [0.7])
    x0 = tr.states[0]
    np.testing.assert_allclose(tr.outputs[0], model.C @ x0)
    np.testing.assert_allclose(tr.states[1], model.A @ x0, atol=1e-15)


def test_init_from_target():
    target = np.array([[0.5, 0.1], [0.0, 0.3]])
    model = ConstantSsModel.create(2, 1, 1, A_init=target, seed=2)
    assert np.linalg.norm(model.A - target) / np.linalg.norm(target) < 1e-3


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_fd(seed):
    r = np.random.default_rng(seed)
    model = ConstantSsModel.create(2, 1, 2, enc_hidden=(3,), gamma=0.9, seed=seed)
    assert gradient_error(model, r.standard_normal((2, 5, 1)), r.standard_normal((2, 5, 2)), 0.5) < 1e-5


def linear_splits():
    A = np.array([[0.8, 0.2], [-0.1, 0.7]])
    B = np.array([1.0, 0.5])
    C = np.array([1.0, 0.3])
    u = input_signal(1500, seed=1) - 0.5
    x, Y = np.zeros(2), []
    for uk in u:
        Y.append(C @ x)
        x = A @ x + B * uk
    parts = chrono_split(RawSeries(np.array(Y)[:, None], u[:, None]))
    norm = zscore_fit(parts[0])
    return dict(zip(("train", "val", "test"), (norm.apply(p) for p in parts)))


def test_identifies_linear_system():
    sp = linear_splits()
    cfg = TrainConfig(L=20, stride=4, batch_size=32, learning_rate=1e-2, epochs=200, enc_hidden=(4,))
    windows = make_windows(sp["train"].outputs, sp["train"].inputs, cfg.L, cfg.stride)
    model, rep = baseline_fit(windows, (sp["val"].outputs, sp["val"].inputs), cfg)
    report, _ = simulate_and_report(model, sp)
    assert report.rmse["test"] < 0.05
    assert max(rep.max_spectral_radius) < cfg.gamma


def test_fit_is_deterministic():
    sp = linear_splits()
    cfg = TrainConfig(L=20, stride=8, batch_size=16, epochs=3, enc_hidden=(2,), seed=9)
    windows = make_windows(sp["train"].outputs, sp["train"].inputs, cfg.L, cfg.stride)
    val = (sp["val"].outputs, sp["val"].inputs)
    (m1, r1), (m2, r2) = baseline_fit(windows, val, cfg), baseline_fit(windows, val, cfg)
    assert r1.val_rmse == r2.val_rmse
    for k, v in m1.params().items():
        np.testing.assert_array_equal(v, m2.params()[k])
