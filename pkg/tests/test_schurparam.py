import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpv_ssid.numkernel import spectral_radius
from lpv_ssid.schurparam import (
    SchurFactors,
    assemble_S,
    build_transition,
    build_transition_backward,
    fit_to_target,
    random_factors,
    transition_backward,
    transition_forward,
)


def fd_factor_grads(f, dA, h=1e-6):
    """Central differences of <dA, A(W, V, eps)> for every factor entry."""

    def val(W, V, e):
        return float(np.sum(dA * build_transition(SchurFactors(W, V, e, f.gamma))))

    out = []
    for arr in (f.W, f.V):
        g = np.zeros_like(arr)
        for i in range(arr.size):
            p, m = arr.copy(), arr.copy()
            p.flat[i] += h
            m.flat[i] -= h
            args_p = (p, f.V) if arr is f.W else (f.W, p)
            args_m = (m, f.V) if arr is f.W else (f.W, m)
            g.flat[i] = (val(*args_p, f.eps_tilde) - val(*args_m, f.eps_tilde)) / (2 * h)
        out.append(g)
    out.append((val(f.W, f.V, f.eps_tilde + h) - val(f.W, f.V, f.eps_tilde - h)) / (2 * h))
    return out


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)


def test_assemble_S_examples():
    np.testing.assert_array_equal(assemble_S(np.eye(2), 0.0), 2 * np.eye(2))
    np.testing.assert_array_equal(assemble_S(np.zeros((2, 2)), 0.0), np.eye(2))
    np.testing.assert_array_equal(assemble_S(np.array([[1.0, 1.0], [0.0, 1.0]]), 0.0), [[2, 1], [1, 3]])


def test_assemble_S_clamps_eps(caplog):
    S = assemble_S(np.zeros((2, 2)), 100.0)
    np.testing.assert_allclose(S, np.exp(30.0) * np.eye(2))
    assert "clamped" in caplog.text


def test_transition_zero_off_diagonal():
    assert build_transition(SchurFactors(np.eye(2), np.zeros((1, 1)), 0.0, 1.0))[0, 0] == 0.0


def test_transition_scalar_hand_value():
    # S = [[2,1],[1,3]]; bracket E = (2 + 3) / (2 * 1) = 2.5; A = 1 / 2.5
    A = build_transition(SchurFactors(np.array([[1.0, 1.0], [0.0, 1.0]]), np.zeros((1, 1)), 0.0, 1.0))
    assert A[0, 0] == pytest.approx(0.4, abs=1e-15)


def test_transition_half_rig():
    # S = [[2,1],[1,2]], E = (2 + 2) / 2 = 2
    A = build_transition(SchurFactors(np.array([[1.0, 1.0], [0.0, 0.0]]), np.zeros((1, 1)), 0.0, 1.0))
    assert A[0, 0] == 0.5


def test_random_n3_is_stable():
    f = random_factors(np.random.default_rng(3), 3, 0.9)
    assert spectral_radius(build_transition(f)).spectral_radius < 0.9


@given(st.integers(1, 6), st.sampled_from([0.5, 0.9, 1.0]), st.integers(0, 2**32 - 1))
def test_stable_for_any_factors(n, gamma, seed):
    f = random_factors(np.random.default_rng(seed), n, gamma)
    assert spectral_radius(build_transition(f)).spectral_radius < gamma


def test_radius_below_each_gamma_at_fixed_factors(rng):
    f = random_factors(rng, 4, 1.0)
    for g in (0.3, 0.6, 0.9, 1.0):
        A = build_transition(SchurFactors(f.W, f.V, f.eps_tilde, g))
        assert spectral_radius(A).spectral_radius < g


def test_radius_reaches_near_gamma():
    # large off-diagonal coupling with tiny eps pushes |A| toward gamma
    W = np.array([[1.0, 1.0], [0.0, 0.0]]) * 100
    A = build_transition(SchurFactors(W, np.zeros((1, 1)), -30.0, 0.9))
    assert 0.89 < abs(A[0, 0]) < 0.9


def test_factors_validation():
    with pytest.raises(ValueError):
        SchurFactors(np.eye(3), np.zeros((1, 1)))
    with pytest.raises(ValueError):
        SchurFactors(np.eye(2), np.zeros((1, 1)), gamma=1.5)
    with pytest.raises(ValueError):
        SchurFactors(np.eye(2), np.zeros((2, 2)))


def test_backward_zero_upstream(rng):
    f = random_factors(rng, 2, 0.9)
    g = build_transition_backward(f, np.zeros((2, 2)))
    assert not np.any(g.dW) and not np.any(g.dV) and g.dEpsTilde == 0.0


def test_backward_scalar_example():
    f = SchurFactors(np.array([[1.0, 1.0], [0.0, 1.0]]), np.zeros((1, 1)), 0.0, 1.0)
    g = build_transition_backward(f, np.ones((1, 1)))
    dW, dV, de = fd_factor_grads(f, np.ones((1, 1)))
    assert rel_err(g.dW, dW) < 1e-6
    assert rel_err(g.dEpsTilde, de) < 1e-6
    assert np.all(g.dV == 0.0) and np.allclose(dV, 0.0)


@pytest.mark.parametrize("seed", range(100))
def test_backward_matches_fd(seed):
    r = np.random.default_rng(seed)
    n = int(r.integers(1, 4))
    f = random_factors(r, n, float(r.choice([0.5, 0.9, 1.0])), eps_range=(-3, 1))
    dA = r.standard_normal((n, n))
    g = build_transition_backward(f, dA)
    dW, dV, de = fd_factor_grads(f, dA)
    got = np.concatenate([g.dW.ravel(), g.dV.ravel(), [g.dEpsTilde]])
    want = np.concatenate([dW.ravel(), dV.ravel(), [de]])
    assert rel_err(got, want) < 1e-5


def test_batched_forward_matches_single(rng):
    fs = [random_factors(rng, 2, 0.9) for _ in range(4)]
    W = np.stack([f.W for f in fs])
    V = np.stack([f.V for f in fs])
    A, cache = transition_forward(W, V, 0.3, 0.9)
    for Ai, f in zip(A, fs):
        np.testing.assert_allclose(Ai, build_transition(SchurFactors(f.W, f.V, 0.3, 0.9)), atol=1e-14)
    dW, dV, _ = transition_backward(cache, np.ones_like(A))
    assert dW.shape == W.shape and dV.shape == V.shape


def test_fit_zero_target():
    _, res = fit_to_target(np.zeros((2, 2)), 0.99, seed=0)
    assert res < 1e-6


def test_fit_round_trip():
    r = np.random.default_rng(5)
    f = random_factors(r, 3, 0.9)
    A = build_transition(f)
    g, res = fit_to_target(A, 0.9, seed=1)
    assert res / np.linalg.norm(A) < 1e-3
    assert np.linalg.norm(build_transition(g) - A) == pytest.approx(res)


def test_fit_unreachable_scalar():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        f, res = fit_to_target(np.array([[1.5]]), 0.99, seed=0, max_iter=2000)
    assert res >= 0.51
    assert abs(build_transition(f)[0, 0]) < 0.99
    assert any("radius" in str(w.message) for w in caught)
