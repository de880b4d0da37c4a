"""Structured matrix predicates against independent oracles.

The library decides Hurwitz/Schur properties without an eigensolver, so
numpy's eigvals serves as the independent oracle here.
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from krasovskii import (
    is_metzler,
    is_nonnegative,
    m_matrix_inverse,
    metzler_hurwitz,
    perron_root,
    schur_cohn_nonneg,
    tilde_transform,
)
from krasovskii.matrices import as_matrix, as_vector


def spectral_abscissa(A):
    return float(np.max(np.linalg.eigvals(A).real))


def spectral_radius(M):
    return float(np.max(np.abs(np.linalg.eigvals(M))))


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------

def test_as_matrix_rejects_nonfinite():
    with pytest.raises(ValueError):
        as_matrix([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(ValueError):
        as_matrix([[np.inf]])


def test_as_matrix_square_check():
    with pytest.raises(ValueError):
        as_matrix([[1.0, 2.0]], square=True)
    M = as_matrix([[1, 2], [3, 4]], square=True)
    assert M.dtype == float and M.shape == (2, 2)


def test_as_vector_size_check():
    v = as_vector([1, 2, 3], size=3)
    assert v.shape == (3,)
    with pytest.raises(ValueError):
        as_vector([1, 2], size=3)
    with pytest.raises(ValueError):
        as_vector([1.0, np.nan])


def test_sign_predicates():
    assert is_metzler([[-5.0, 0.3], [0.0, -1.0]])
    assert not is_metzler([[-5.0, -0.3], [0.0, -1.0]])
    # off-diagonal tolerance absorbs tiny negatives
    assert is_metzler([[-1.0, -1e-14], [0.0, -1.0]])
    assert is_nonnegative([[0.0, 1.0], [2.0, 3.0]])
    assert not is_nonnegative([[0.0, -1e-6], [0.0, 0.0]])


# ---------------------------------------------------------------------------
# perron_root
# ---------------------------------------------------------------------------

def test_perron_quadratic_oracle():
    # eigenvalues of [[0.2,0.3],[0.1,0.4]]: (0.6 +- sqrt(0.04+0.12))/2 -> 0.5, 0.1
    M = np.array([[0.2, 0.3], [0.1, 0.4]])
    assert perron_root(M) == pytest.approx(0.5, abs=1e-10)


def test_perron_permutation():
    # irreducible but periodic: power iteration alone would not settle
    assert perron_root(np.array([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx(1.0, abs=1e-9)


def test_perron_edge_cases():
    assert perron_root(np.zeros((3, 3))) == pytest.approx(0.0, abs=1e-12)
    assert perron_root(np.array([[0.7]])) == pytest.approx(0.7, abs=1e-12)
    D = np.diag([0.2, 0.9, 0.5])
    assert perron_root(D) == pytest.approx(0.9, abs=1e-9)


def test_perron_reducible_block():
    # strictly upper-triangular: nilpotent, the root is 0
    M = np.array([[0.0, 5.0, 1.0], [0.0, 0.0, 2.0], [0.0, 0.0, 0.0]])
    assert perron_root(M) == pytest.approx(0.0, abs=1e-9)


def test_perron_rejects_negative_entries():
    with pytest.raises(ValueError):
        perron_root(np.array([[0.1, -0.2], [0.3, 0.4]]))


@settings(max_examples=200, deadline=None)
@given(arrays(float, (4, 4), elements=st.floats(0.0, 5.0)))
def test_perron_matches_eigvals(M):
    assert perron_root(M) == pytest.approx(spectral_radius(M), abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(arrays(float, (3, 3), elements=st.floats(0.0, 2.0)),
       arrays(float, (3, 3), elements=st.floats(0.0, 1.0)))
def test_perron_monotone_in_entries(M, E):
    # adding nonnegative entries can only grow the root
    assert perron_root(M + E) >= perron_root(M) - 1e-9


# ---------------------------------------------------------------------------
# metzler_hurwitz / schur_cohn
# ---------------------------------------------------------------------------

def test_metzler_hurwitz_known_cases():
    assert metzler_hurwitz(np.array([[-2.0, 1.0], [1.0, -2.0]]))
    assert not metzler_hurwitz(np.array([[-1.0, 1.0], [3.0, -2.0]]))  # det < 0
    assert not metzler_hurwitz(np.array([[0.0]]))  # marginal is not Hurwitz


def test_metzler_hurwitz_requires_metzler():
    with pytest.raises(ValueError):
        metzler_hurwitz(np.array([[-1.0, -0.5], [0.2, -1.0]]))


def test_metzler_hurwitz_eig_oracle():
    rng = np.random.default_rng(42)
    for _ in range(300):
        n = int(rng.integers(1, 6))
        A = rng.uniform(0.0, 1.0, (n, n))
        np.fill_diagonal(A, rng.uniform(-3.0, 0.5, n))
        alpha = spectral_abscissa(A)
        if abs(alpha) < 1e-9:
            continue
        assert metzler_hurwitz(A) == (alpha < 0.0)


def test_schur_cohn_eig_oracle():
    rng = np.random.default_rng(11)
    for _ in range(300):
        n = int(rng.integers(1, 5))
        D = rng.uniform(0.0, 2.0 / n, (n, n))
        rho = spectral_radius(D)
        if abs(rho - 1.0) < 1e-6:
            continue
        assert schur_cohn_nonneg(D) == (rho < 1.0)


# ---------------------------------------------------------------------------
# m_matrix_inverse
# ---------------------------------------------------------------------------

def test_m_matrix_inverse_neumann_oracle():
    D = np.array([[0.1, 0.2], [0.3, 0.1]])
    # Neumann series converges: (I-D)^{-1} = sum D^k
    S = np.eye(2)
    P = np.eye(2)
    for _ in range(200):
        P = P @ D
        S += P
    X = m_matrix_inverse(D)
    np.testing.assert_allclose(X, S, atol=1e-12)
    assert np.all(X >= 0.0)


def test_m_matrix_inverse_residual_bound():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        D = rng.uniform(0.0, 0.9 / n, (n, n))
        X = m_matrix_inverse(D)
        R = np.eye(n) - (np.eye(n) - D) @ X
        assert np.max(np.abs(R)) <= 1e-10
        assert np.all(X >= -1e-14)


def test_m_matrix_inverse_rejects_unstable():
    with pytest.raises(ValueError):
        m_matrix_inverse(np.array([[1.0]]))
    with pytest.raises(ValueError):
        m_matrix_inverse(np.array([[0.5, -0.1], [0.0, 0.5]]))  # negative entry


# ---------------------------------------------------------------------------
# tilde transform
# ---------------------------------------------------------------------------

def test_tilde_basic():
    A = np.array([[-2.0, -0.5], [0.3, -1.0]])
    B = np.array([[0.1, -0.2], [-0.3, 0.4]])
    D = np.array([[-0.25, 0.1], [0.0, 0.2]])
    At, Bt, Dt = tilde_transform(A, B, D)
    np.testing.assert_array_equal(np.diag(At), np.diag(A))  # diagonal kept
    assert is_metzler(At)
    np.testing.assert_array_equal(Bt, np.abs(B))
    np.testing.assert_array_equal(Dt, np.abs(D))


@settings(max_examples=100, deadline=None)
@given(arrays(float, (3, 3), elements=st.floats(-2.0, 2.0)),
       arrays(float, (3, 3), elements=st.floats(-2.0, 2.0)),
       arrays(float, (3, 3), elements=st.floats(-2.0, 2.0)))
def test_tilde_idempotent(A, B, D):
    At, Bt, Dt = tilde_transform(A, B, D)
    At2, Bt2, Dt2 = tilde_transform(At, Bt, Dt)
    np.testing.assert_array_equal(At, At2)
    np.testing.assert_array_equal(Bt, Bt2)
    np.testing.assert_array_equal(Dt, Dt2)
