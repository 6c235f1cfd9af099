import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lpv_ssid.numkernel import NoConvergence, SingularMatrix, eigenvalues, invert, spectral_radius


def test_invert_identity():
    np.testing.assert_array_equal(invert(np.eye(3)), np.eye(3))


def test_invert_diagonal():
    np.testing.assert_allclose(invert(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]), rtol=0, atol=1e-15)


def test_invert_multiply_back(rng):
    for _ in range(50):
        M = rng.standard_normal((4, 4))
        if np.linalg.cond(M) > 1e6:
            continue
        assert np.abs(M @ invert(M) - np.eye(4)).max() < 1e-9


def test_invert_needs_row_exchange():
    M = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(invert(M), M)


def test_invert_batched_matches_single(rng):
    Ms = rng.standard_normal((5, 3, 3)) + 3 * np.eye(3)
    out = invert(Ms)
    for M, Mi in zip(Ms, out):
        np.testing.assert_allclose(Mi, invert(M), atol=1e-14)


def test_invert_singular():
    with pytest.raises(SingularMatrix):
        invert(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularMatrix):
        invert(np.zeros((2, 2)))


def test_invert_rejects_non_square():
    with pytest.raises(ValueError):
        invert(np.ones((2, 3)))


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_double_inverse_round_trip(n, seed):
    r = np.random.default_rng(seed)
    M = r.standard_normal((n, n)) + n * np.eye(n)
    assert np.abs(invert(invert(M)) - M).max() < 1e-8


def test_spectral_radius_examples():
    assert spectral_radius(np.diag([0.3, -0.8])).spectral_radius == pytest.approx(0.8, abs=1e-15)
    assert spectral_radius(np.array([[0.0, 0.5], [-0.5, 0.0]])).spectral_radius == pytest.approx(0.5, abs=1e-14)
    assert spectral_radius(np.eye(2)).spectral_radius == pytest.approx(1.0, abs=1e-15)


def test_spectral_report_fields():
    rep = spectral_radius(np.diag([0.3, -0.8]))
    assert sorted(rep.eigenvalue_moduli) == pytest.approx([0.3, 0.8])
    assert rep.iterations_used >= 0


def as_complex(pairs):
    return np.array([complex(a, b) for a, b in pairs])


def test_eigenvalues_match_lapack(rng):
    for n in range(1, 9):
        for _ in range(10):
            M = rng.standard_normal((n, n))
            ours = np.sort_complex(as_complex(eigenvalues(M)))
            ref = np.sort_complex(np.linalg.eigvals(M))
            np.testing.assert_allclose(ours, ref, atol=1e-9 * max(1, np.abs(ref).max()))


def test_companion_matrix_roots():
    # roots 1, 2, 3: x^3 - 6x^2 + 11x - 6
    M = np.array([[6.0, -11.0, 6.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    np.testing.assert_allclose(np.sort(as_complex(eigenvalues(M)).real), [1.0, 2.0, 3.0], atol=1e-10)


def test_dimension_limit():
    with pytest.raises(ValueError):
        spectral_radius(np.eye(65))


def test_no_convergence_carries_partial_moduli():
    err = NoConvergence("x", [0.5])
    assert err.partial_moduli == [0.5]


@given(st.integers(2, 6), st.floats(-5, 5), st.integers(0, 2**32 - 1))
def test_radius_scales_with_constant(n, c, seed):
    M = np.random.default_rng(seed).standard_normal((n, n))
    lhs = spectral_radius(c * M).spectral_radius
    assert lhs == pytest.approx(abs(c) * spectral_radius(M).spectral_radius, abs=1e-9)


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_radius_transpose_invariant(n, seed):
    M = np.random.default_rng(seed).standard_normal((n, n))
    assert spectral_radius(M.T).spectral_radius == pytest.approx(spectral_radius(M).spectral_radius, abs=1e-9)


@pytest.mark.parametrize("c", [1.6482697307786084e-247, 1e-300, 1e250, 0.0])
def test_radius_at_extreme_scales(c):
    M = np.random.default_rng(74).standard_normal((4, 4))
    expected = abs(c) * spectral_radius(M).spectral_radius
    assert spectral_radius(c * M).spectral_radius == pytest.approx(expected, rel=1e-12, abs=0.0)
