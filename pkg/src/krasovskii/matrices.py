"""Structured dense-matrix tests used by the stability machinery.

Every decision in this package reduces to sign-structured linear algebra on
small dense matrices: Metzler state matrices, nonnegative interconnection
matrices, M-matrix inverses and Perron roots.  General eigensolvers are
deliberately avoided; each test exploits the sign structure instead, so the
results are deterministic and cheap to cross-check.
"""
from __future__ import annotations

import numpy as np

# Entrywise slack for sign/structure checks.
SIGN_TOL = 1e-12
# Required strict distance of a spectral radius from one.
SCHUR_MARGIN = 1e-9


def as_matrix(a, *, square: bool = False, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-d float array, rejecting NaN/Inf and bad shapes."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def as_vector(a, *, size: int | None = None, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-d float array, rejecting NaN/Inf and bad shapes."""
    v = np.asarray(a, dtype=float).reshape(-1)
    if size is not None and v.size != size:
        raise ValueError(f"{name} must have length {size}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def is_metzler(A, tol: float = SIGN_TOL) -> bool:
    """True if all off-diagonal entries are >= -tol."""
    A = as_matrix(A, square=True, name="A")
    off = A - np.diag(np.diag(A))
    return bool(np.all(off >= -tol))


def is_nonnegative(M, tol: float = SIGN_TOL) -> bool:
    """True if all entries are >= -tol."""
    M = as_matrix(M, name="M")
    return bool(np.all(M >= -tol))


def metzler_hurwitz(A) -> bool:
    """Hurwitz test for a Metzler matrix via leading principal minors.

    A Metzler matrix A is Hurwitz iff -A is a nonsingular M-matrix, which
    holds iff every leading principal minor of -A is strictly positive.
    No eigenvalue computation is involved.
    """
    A = as_matrix(A, square=True, name="A")
    if not is_metzler(A):
        raise ValueError("principal-minor Hurwitz test requires a Metzler matrix")
    return _leading_minors_positive(-A)


def _leading_minors_positive(T: np.ndarray) -> bool:
    for k in range(1, T.shape[0] + 1):
        if not np.linalg.det(T[:k, :k]) > 0.0:
            return False
    return True


def perron_root(M) -> float:
    """Spectral radius of a nonnegative matrix.

    Power iteration on M + I (the shift keeps the iterate strictly positive,
    so the Collatz-Wielandt quotients always bracket the root).  If the
    bracket stalls -- reducible or periodic structure -- the root is located
    by bisection on s: all leading principal minors of s*I - M are positive
    exactly when s exceeds the spectral radius.
    """
    M = as_matrix(M, square=True, name="M")
    if not is_nonnegative(M):
        raise ValueError("perron_root requires a nonnegative matrix")
    M = np.maximum(M, 0.0)
    n = M.shape[0]
    if n == 1:
        return float(M[0, 0])

    S = M + np.eye(n)
    x = np.ones(n)
    lo, hi = 0.0, float(np.max(M.sum(axis=1)))
    for _ in range(500):
        y = S @ x
        if not np.all(x > 0.0):
            break  # reducible structure starved an entry; bisect instead
        quot = y / x
        lo = max(lo, float(quot.min()) - 1.0)
        hi = min(hi, float(quot.max()) - 1.0)
        if hi - lo <= 1e-12 * max(1.0, hi):
            return 0.5 * (lo + hi)
        x = y / y.max()
    return _perron_bisect(M, lo, hi)


def _perron_bisect(M: np.ndarray, lo: float, hi: float) -> float:
    """Bisection fallback: s > rho(M) iff sI - M has positive leading minors."""
    n = np.eye(M.shape[0])
    hi = hi + 1e-9 * max(1.0, hi)  # make the upper end strictly exceed the root
    while not _leading_minors_positive(hi * n - M):
        hi = 2.0 * hi + 1.0
    for _ in range(200):
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if _leading_minors_positive(mid * n - M):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def schur_cohn_nonneg(D, margin: float = SCHUR_MARGIN) -> bool:
    """True if the spectral radius of nonnegative D is < 1 - margin."""
    return perron_root(D) < 1.0 - margin


def m_matrix_inverse(D) -> np.ndarray:
    """(I - D)^{-1} for nonnegative D with spectral radius below one.

    Solved by LU factorization with partial pivoting plus iterative
    refinement; the entrywise residual of (I - D) X = I is driven below
    1e-10 or a RuntimeError is raised.  The result is entrywise nonnegative
    up to roundoff (it equals the Neumann series sum of D^k).
    """
    D = as_matrix(D, square=True, name="D")
    if not is_nonnegative(D):
        raise ValueError("m_matrix_inverse requires a nonnegative matrix")
    if not schur_cohn_nonneg(D):
        raise ValueError("spectral radius of D is not strictly below one")
    n = D.shape[0]
    eye = np.eye(n)
    Z = eye - D
    X = np.linalg.solve(Z, eye)
    for _ in range(4):
        R = eye - Z @ X
        if float(np.max(np.abs(R))) <= 1e-10:
            return X
        X = X + np.linalg.solve(Z, R)
    raise RuntimeError("(I - D) inversion failed the 1e-10 residual check")


def tilde_transform(A, B, D) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Majorant triple for the neutral-class reduction.

    A keeps its diagonal, off-diagonal entries are replaced by their absolute
    values (so the result is Metzler); B and D are replaced by their
    entrywise absolute values.  Idempotent, and the identity on inputs that
    are already Metzler / nonnegative.
    """
    A = as_matrix(A, square=True, name="A")
    B = as_matrix(B, square=True, name="B")
    D = as_matrix(D, square=True, name="D")
    if not (A.shape == B.shape == D.shape):
        raise ValueError("tilde_transform requires equally sized square matrices")
    A_t = np.abs(A)
    np.fill_diagonal(A_t, np.diag(A))
    return A_t, np.abs(B), np.abs(D)
