"""Strict common linear-copositive feasibility via a dense simplex.

The single primitive behind every certificate: given square matrices
M_1, ..., M_K, find nu >> 0 with (M_k^T nu)_j <= -t for all k, j, together
with the largest achievable t under the box 1 <= nu_j <= nu_cap.  The solver
is a small dense-tableau primal simplex specialised to this structure: the
variables are shifted so the all-ones vector is the base point (which makes
every box row feasible from the start), one pivot on the negative part of t
restores feasibility of the remaining rows, and Bland's rule guarantees
termination.  No external LP solver is involved, so verdicts are
deterministic down to the last bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrices import as_matrix, as_vector

NU_CAP = 1e6
SLACK_THRESHOLD = 1e-9
_PIVOT_TOL = 1e-9
_COST_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FeasibilityProblem:
    """Matrices M_k whose transposes must share a strict negative direction."""

    matrices: tuple[np.ndarray, ...]

    def __init__(self, matrices):
        mats = tuple(as_matrix(M, square=True, name=f"matrices[{i}]")
                     for i, M in enumerate(matrices))
        if not mats:
            raise ValueError("at least one matrix is required")
        n = mats[0].shape[0]
        for i, M in enumerate(mats):
            if M.shape[0] != n:
                raise ValueError(f"matrices[{i}] has size {M.shape[0]}, expected {n}")
        for M in mats:
            M.flags.writeable = False
        object.__setattr__(self, "matrices", mats)

    @property
    def n(self) -> int:
        return self.matrices[0].shape[0]


@dataclass(frozen=True, eq=False)
class FeasibilityResult:
    feasible: bool
    witness: np.ndarray | None
    slack: float
    iterations: int


def check_vector(problem: FeasibilityProblem, nu) -> float:
    """Worst margin max_{k,j} (M_k^T nu)_j for a strictly positive nu.

    Negative means nu is a strict common witness; the more negative, the
    larger the decrease margin it certifies.
    """
    nu = as_vector(nu, size=problem.n, name="nu")
    if np.any(nu <= 0.0):
        raise ValueError("nu must be strictly positive")
    return max(float(np.max(M.T @ nu)) for M in problem.matrices)


def find_common_vector(problem: FeasibilityProblem, *,
                       nu_cap: float = NU_CAP,
                       slack_threshold: float = SLACK_THRESHOLD) -> FeasibilityResult:
    """Maximise t subject to (M_k^T nu)_j <= -t and 1 <= nu_j <= nu_cap.

    Feasible (SAT) iff the optimum exceeds slack_threshold.  The reported
    slack is recomputed from the returned vector in plain arithmetic, so
    `check_vector(problem, witness) == -slack` holds exactly.
    """
    if not nu_cap > 1.0:
        raise ValueError("nu_cap must exceed 1")
    n = problem.n
    K = len(problem.matrices)
    m_rows = K * n + n
    nv = n + 2  # u_1..u_n, t+, t-

    T = np.zeros((m_rows + 1, nv + m_rows + 1))
    for k, M in enumerate(problem.matrices):
        for j in range(n):
            r = k * n + j
            T[r, :n] = M[:, j]          # (M^T u)_j
            T[r, n] = 1.0               # +t
            T[r, n + 1] = -1.0          # -t
            T[r, -1] = -float(M[:, j].sum())
    for j in range(n):
        r = K * n + j
        T[r, j] = 1.0                   # u_j <= cap - 1
        T[r, -1] = nu_cap - 1.0
    T[:m_rows, nv:nv + m_rows] = np.eye(m_rows)
    T[-1, n] = -1.0                     # maximise t = t+ - t-
    T[-1, n + 1] = 1.0

    basis = list(range(nv, nv + m_rows))
    pivots = 0

    rhs = T[:m_rows, -1]
    if float(rhs.min()) < 0.0:
        # One pivot on t- (basic in the most violated row) restores
        # feasibility: every constraint row carries the same -1 coefficient
        # and the box rows are untouched.
        r = int(np.argmin(rhs))
        _pivot(T, basis, r, n + 1)
        pivots += 1

    max_pivots = 1000 + 200 * (m_rows + nv)
    while True:
        enter = -1
        for j in range(nv + m_rows):
            if T[-1, j] < -_COST_TOL:
                enter = j               # Bland: lowest eligible index
                break
        if enter < 0:
            break
        col = T[:m_rows, enter]
        eligible = np.nonzero(col > _PIVOT_TOL)[0]
        if eligible.size == 0:
            raise RuntimeError("LP unbounded; malformed feasibility problem")
        ratios = T[eligible, -1] / col[eligible]
        best = float(ratios.min())
        ties = eligible[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))  # Bland tie-break
        _pivot(T, basis, r, enter)
        pivots += 1
        if pivots > max_pivots:
            raise RuntimeError("simplex iteration limit exceeded")

    x = np.zeros(nv)
    for i, bi in enumerate(basis):
        if bi < nv:
            x[bi] = T[i, -1]
    nu = np.clip(1.0 + x[:n], 1.0, nu_cap)
    slack = -check_vector(problem, nu)
    feasible = slack > slack_threshold
    witness = None
    if feasible:
        witness = nu
        witness.flags.writeable = False
    return FeasibilityResult(feasible=feasible, witness=witness,
                             slack=slack, iterations=pivots)


def _pivot(T: np.ndarray, basis: list[int], r: int, c: int) -> None:
    T[r] = T[r] / T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])
    basis[r] = c


def brute_force_feasible(problem: FeasibilityProblem, grid_points: int = 60) -> bool:
    """Grid scan over the normalised positive directions (dimension <= 3).

    The predicate M_k^T nu << 0 is invariant under positive scaling of nu,
    so scanning the unit simplex interior suffices.  Independent of the
    simplex solver; used to cross-check its verdicts.
    """
    n = problem.n
    if n > 3:
        raise ValueError("brute force scan supports dimension <= 3 only")
    g = int(grid_points)
    if g < n + 1:
        raise ValueError("grid too coarse for the requested dimension")

    if n == 1:
        pts = np.array([[1.0]])
    elif n == 2:
        i = np.arange(1, g)
        pts = np.column_stack([i, g - i]) / g
    else:
        i, j = np.meshgrid(np.arange(1, g), np.arange(1, g), indexing="ij")
        i, j = i.ravel(), j.ravel()
        keep = i + j <= g - 1
        i, j = i[keep], j[keep]
        pts = np.column_stack([i, j, g - i - j]) / g

    worst = np.full(pts.shape[0], -np.inf)
    for M in problem.matrices:
        worst = np.maximum(worst, (pts @ M).max(axis=1))
    return bool(np.any(worst < 0.0))
