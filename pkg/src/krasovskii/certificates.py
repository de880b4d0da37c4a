"""Construction and verification of linear decrease certificates.

A certificate is a weight pair (nu, mu) plus a decrease margin beta: nu
weights the instantaneous state, mu weights the delayed memory term of the
functional, and every trajectory of the certified class then dissipates the
functional at rate beta.  Each builder follows the same constructive shape:
a strict-feasibility LP produces nu, and mu is assembled from elementwise
maxima of the delayed couplings plus an explicit split of the LP slack.

Builders never return unchecked output: all strict inequalities the
decrease argument relies on are re-verified numerically first.  For
genuinely switched difference parts the elementwise-max recipe can fail
those inequalities even when every LP step succeeds; that surfaces as a
ConstructionError, not as a bogus certificate.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .feasibility import (
    NU_CAP,
    SLACK_THRESHOLD,
    FeasibilityProblem,
    find_common_vector,
)
from .matrices import as_vector, m_matrix_inverse
from .systems import (
    CoupledSystem,
    DiscreteDelaySystem,
    NeutralSystem,
    SwitchedDelaySystem,
    neutral_comparison,
    validate,
)

BETA_CHECK = 1e-10
TUPLE_CAP = 100_000


class CertificateError(RuntimeError):
    """Base class for certificate construction failures."""


class StructuralError(CertificateError):
    """The descriptor violates the sign/structure hypotheses of its class."""

    def __init__(self, violations):
        self.violations = list(violations)
        listed = "; ".join(str(v) for v in self.violations[:5])
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        super().__init__(f"structural violations present: {listed}{more}")


class InfeasibleSystemError(CertificateError):
    """The feasibility LP is UNSAT: no certificate of this form exists."""


class ConstructionError(CertificateError):
    """The constructive recipe could not complete or failed verification."""


@dataclass(frozen=True, eq=False)
class Derivation:
    """How a certificate was obtained, for reproducibility.

    q: uniform LP-slack vector added into mu (continuous single/multi delay
    and discrete classes); w: per-channel elementwise maxima of the delayed
    couplings (continuous: B^T nu maxima; coupled/neutral: per-mode
    (I-D)^{-T} B^T nu vectors; discrete: the d vectors); v: contraction
    direction for the difference part; eps: final halved weight of v;
    slack: recomputed LP slack t*; lp_iterations: total simplex pivots.
    """

    slack: float
    lp_iterations: int
    q: np.ndarray | None = None
    w: tuple[np.ndarray, ...] | None = None
    v: np.ndarray | None = None
    eps: float | None = None


@dataclass(frozen=True, eq=False)
class Certificate:
    """Functional coefficients (nu, mu, beta) for one system class.

    kind matches the system class tag; mu holds one vector per delay
    channel (coupled and neutral classes have a single channel).  beta is
    the realized worst-case margin over all strict decrease inequalities.
    """

    kind: str
    nu: np.ndarray
    mu: tuple[np.ndarray, ...]
    beta: float
    derivation: Derivation


@dataclass(frozen=True)
class MarginReport:
    """Worst realized left-hand side per inequality family.

    Each entry maps a family name to max over modes/coordinates of the
    left-hand side that must be strictly negative; the report passes iff
    every entry is <= -beta_check.
    """

    entries: tuple[tuple[str, float], ...]
    passed: bool
    beta_check: float

    @property
    def worst(self) -> float:
        return max(v for _, v in self.entries)


def class_tag(system) -> str:
    if isinstance(system, SwitchedDelaySystem):
        return "switched_delay"
    if isinstance(system, CoupledSystem):
        return "coupled"
    if isinstance(system, NeutralSystem):
        return "neutral"
    if isinstance(system, DiscreteDelaySystem):
        return "discrete"
    raise TypeError(f"unknown system descriptor {type(system).__name__}")


def _require_valid(system) -> None:
    violations = validate(system)
    if violations:
        raise StructuralError(violations)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def feasibility_problem_for(system, tuple_cap: int = TUPLE_CAP) -> FeasibilityProblem:
    """The canonical strict-feasibility problem deciding certifiability.

    switched_delay: all composites A^(s) + B_1^(p1) + ... + B_l^(pl) over
    mode tuples; coupled: all pairs A^(s) + B^(r)(I-D^(r))^{-1}C^(s);
    neutral: the tilde majorant pairs; discrete: mode tuples of
    A^(s) + sum_r B_r^(pr) - I.  Tuple enumeration is refused beyond
    tuple_cap matrices.
    """
    if isinstance(system, SwitchedDelaySystem):
        return FeasibilityProblem(_delay_composites(system.A, system.B, tuple_cap, shift=0.0))
    if isinstance(system, CoupledSystem):
        Ks = [m_matrix_inverse(D) for D in system.D]
        mats = []
        for s in range(system.num_modes):
            for r in range(system.num_modes):
                mats.append(system.A[s] + system.B[r] @ Ks[r] @ system.C[s])
        return FeasibilityProblem(mats)
    if isinstance(system, NeutralSystem):
        A_t, B_t, D_t = neutral_comparison(system)
        K = m_matrix_inverse(D_t)
        mats = []
        for s in range(system.num_modes):
            for r in range(system.num_modes):
                mats.append(A_t[s] + B_t[r] @ K)
        return FeasibilityProblem(mats)
    if isinstance(system, DiscreteDelaySystem):
        return FeasibilityProblem(_delay_composites(system.A, system.B, tuple_cap, shift=1.0))
    raise TypeError(f"unknown system descriptor {type(system).__name__}")


def _delay_composites(A, B, tuple_cap, shift: float):
    N, L = len(A), len(B)
    count = N ** (L + 1)
    if count > tuple_cap:
        raise ConstructionError(
            f"tuple enumeration needs {count} composites, above the cap {tuple_cap}")
    n = A[0].shape[0]
    eye = shift * np.eye(n)
    mats = []
    for picks in product(range(N), repeat=L + 1):
        M = A[picks[0]] - eye
        for r in range(L):
            M = M + B[r][picks[r + 1]]
        mats.append(M)
    return mats


def difference_problem_for(system) -> FeasibilityProblem:
    """Feasibility problem for the shared contraction direction v.

    Matrices D^(r) - I, so a witness v satisfies (D^(r))^T v << v for every
    mode; for neutral systems the single majorant matrix |D| - I is used.
    """
    if isinstance(system, CoupledSystem):
        eye = np.eye(system.m)
        return FeasibilityProblem([D - eye for D in system.D])
    if isinstance(system, NeutralSystem):
        _, _, D_t = neutral_comparison(system)
        return FeasibilityProblem([D_t - np.eye(system.n)])
    raise TypeError("difference directions exist for coupled and neutral systems only")


# ---------------------------------------------------------------------------
# Margin evaluation shared by builders and verification
# ---------------------------------------------------------------------------

def _margin_entries(system, nu, mus):
    """Worst LHS per strict inequality family, plus positivity entries."""
    entries: list[tuple[str, float]] = []
    if isinstance(system, SwitchedDelaySystem):
        mu_sum = np.sum(mus, axis=0)
        for s, As in enumerate(system.A):
            entries.append((f"state[{s}]", float(np.max(As.T @ nu + mu_sum))))
        for r, chan in enumerate(system.B):
            for s, Bs in enumerate(chan):
                entries.append((f"delay[{r}][{s}]", float(np.max(Bs.T @ nu - mus[r]))))
    elif isinstance(system, CoupledSystem):
        mu = mus[0]
        for s in range(system.num_modes):
            entries.append((f"state[{s}]",
                            float(np.max(system.A[s].T @ nu + system.C[s].T @ mu))))
        eye = np.eye(system.m)
        for r in range(system.num_modes):
            entries.append((f"difference[{r}]",
                            float(np.max(system.B[r].T @ nu + (system.D[r] - eye).T @ mu))))
    elif isinstance(system, NeutralSystem):
        mu = mus[0]
        A_t, B_t, D_t = neutral_comparison(system)
        eye = np.eye(system.n)
        for s in range(system.num_modes):
            entries.append((f"state[{s}]", float(np.max(A_t[s].T @ nu + mu))))
        for s in range(system.num_modes):
            entries.append((f"difference[{s}]",
                            float(np.max(B_t[s].T @ nu + (D_t - eye).T @ mu))))
    elif isinstance(system, DiscreteDelaySystem):
        mu_sum = np.sum(mus, axis=0)
        eye = np.eye(system.n)
        for s, As in enumerate(system.A):
            entries.append((f"state[{s}]", float(np.max((As - eye).T @ nu + mu_sum))))
        for r, chan in enumerate(system.B):
            for s, Bs in enumerate(chan):
                entries.append((f"delay[{r}][{s}]", float(np.max(Bs.T @ nu - mus[r]))))
    else:
        raise TypeError(f"unknown system descriptor {type(system).__name__}")

    positivity = [("nu_positive", float(-np.min(nu))),
                  ("mu_positive", float(-min(np.min(m) for m in mus)))]
    return entries, positivity


def verify_certificate(system, cert: Certificate,
                       beta_check: float = BETA_CHECK) -> MarginReport:
    """Re-check every strict inequality of the class with the stored nu, mu.

    Passes iff each family's worst left-hand side is <= -beta_check and the
    weights are strictly positive.  Works on hand-made certificates too;
    only the class tag must match the system.
    """
    tag = class_tag(system)
    if cert.kind != tag:
        raise CertificateError(
            f"certificate class '{cert.kind}' does not match system class '{tag}'")
    nu = as_vector(cert.nu, name="nu")
    mus = tuple(as_vector(m, name="mu") for m in cert.mu)
    decrease, positivity = _margin_entries(system, nu, mus)
    all_entries = tuple(decrease + positivity)
    passed = all(worst <= -beta_check for _, worst in all_entries)
    return MarginReport(entries=all_entries, passed=passed, beta_check=beta_check)


def _finish(system, kind, nu, mus, derivation) -> Certificate:
    decrease, _ = _margin_entries(system, nu, mus)
    beta = min(-worst for _, worst in decrease)
    cert = Certificate(kind=kind, nu=_freeze(nu), mu=tuple(_freeze(m) for m in mus),
                       beta=float(beta), derivation=derivation)
    report = verify_certificate(system, cert)
    if not report.passed:
        raise ConstructionError(
            f"decrease inequalities failed verification (worst margin {report.worst:.3e}); "
            "the elementwise-max construction is not sufficient for this system")
    return cert


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_switched_delay(system: SwitchedDelaySystem, *,
                         nu_cap: float = NU_CAP,
                         slack_threshold: float = SLACK_THRESHOLD) -> Certificate:
    """Certificate for single-delay switched systems (the L = 1 case).

    nu comes from the LP over all pairs A^(s) + B^(r); with q the uniform
    slack vector and w the elementwise max of B^(s)T nu, mu = w + q/2 makes
    both inequality families strict with margin q/2.
    """
    if system.num_channels != 1:
        raise ValueError("single-delay builder requires exactly one delay channel")
    return build_multi_delay(system, nu_cap=nu_cap, slack_threshold=slack_threshold)


def build_multi_delay(system: SwitchedDelaySystem, *,
                      nu_cap: float = NU_CAP,
                      slack_threshold: float = SLACK_THRESHOLD,
                      tuple_cap: int = TUPLE_CAP) -> Certificate:
    """Certificate for switched systems with several delay channels.

    The LP runs over every mode tuple A^(s) + B_1^(p1) + ... + B_l^(pl);
    the slack is split evenly across channels: mu_r = w_r + q/(2l).
    """
    _require_valid(system)
    problem = feasibility_problem_for(system, tuple_cap=tuple_cap)
    res = find_common_vector(problem, nu_cap=nu_cap, slack_threshold=slack_threshold)
    if not res.feasible:
        raise InfeasibleSystemError(
            "no certificate of this form: the common-direction LP over the "
            f"delay composites is infeasible (best slack {res.slack:.3e})")
    nu = np.asarray(res.witness, dtype=float)
    t = res.slack
    L = system.num_channels
    q = np.full(system.n, t)
    w = tuple(np.max([Bs.T @ nu for Bs in chan], axis=0) for chan in system.B)
    mus = tuple(w_r + q / (2.0 * L) for w_r in w)
    deriv = Derivation(slack=t, lp_iterations=res.iterations, q=_freeze(q),
                       w=tuple(_freeze(w_r) for w_r in w))
    return _finish(system, "switched_delay", nu, mus, deriv)


def build_coupled(system: CoupledSystem, *,
                  nu_cap: float = NU_CAP,
                  slack_threshold: float = SLACK_THRESHOLD,
                  max_halvings: int = 60) -> Certificate:
    """Certificate for a single-mode coupled differential-difference system."""
    if system.num_modes != 1:
        raise ValueError("use build_switched_coupled for systems with several modes")
    return build_switched_coupled(system, nu_cap=nu_cap,
                                  slack_threshold=slack_threshold,
                                  max_halvings=max_halvings)


def build_switched_coupled(system: CoupledSystem, *,
                           nu_cap: float = NU_CAP,
                           slack_threshold: float = SLACK_THRESHOLD,
                           max_halvings: int = 60) -> Certificate:
    """Certificate for switched coupled systems.

    Requires (i) a shared contraction direction v with D^(r)T v << v, (ii)
    strict feasibility over all pair composites A^(s) + B^(r)(I-D^(r))^{-1}
    C^(s).  mu is the elementwise max over r of (I-D^(r))^{-T} B^(r)T nu
    plus eps*v, with eps halved from 1 until the state inequality regains
    half the LP slack.  Both inequality families are re-verified: the
    elementwise-max step can genuinely fail them for mode-dependent
    difference parts, in which case no certificate is produced.
    """
    _require_valid(system)
    vres = find_common_vector(difference_problem_for(system),
                              nu_cap=nu_cap, slack_threshold=slack_threshold)
    if not vres.feasible:
        raise ConstructionError(
            "no common contraction direction for the difference part: the "
            "D-matrices admit no shared v with D^T v << v")
    v = np.asarray(vres.witness, dtype=float)

    res = find_common_vector(feasibility_problem_for(system),
                             nu_cap=nu_cap, slack_threshold=slack_threshold)
    if not res.feasible:
        raise InfeasibleSystemError(
            "no certificate of this form: composite not Hurwitz for some mode "
            f"pair (best slack {res.slack:.3e})")
    nu = np.asarray(res.witness, dtype=float)
    t = res.slack

    Ks = [m_matrix_inverse(D) for D in system.D]
    per_mode = [Ks[r].T @ (system.B[r].T @ nu) for r in range(system.num_modes)]
    base = np.max(per_mode, axis=0)

    mu, eps = _halve_eps(base, v, t, max_halvings,
                         lambda cand: max(float(np.max(system.A[s].T @ nu + system.C[s].T @ cand))
                                          for s in range(system.num_modes)))
    deriv = Derivation(slack=t, lp_iterations=res.iterations + vres.iterations,
                       w=tuple(_freeze(p) for p in per_mode), v=_freeze(v), eps=eps)
    return _finish(system, "coupled", nu, (mu,), deriv)


def _halve_eps(base, v, slack, max_halvings, worst_state):
    """Shrink the v-weight until the state inequality keeps half the slack."""
    eps = 1.0
    for _ in range(max_halvings + 1):
        cand = base + eps * v
        if worst_state(cand) <= -0.5 * slack:
            return cand, eps
        eps *= 0.5
    raise ConstructionError(
        "epsilon search exhausted: the state inequality cannot be restored "
        "for any weight of the contraction direction")


def build_neutral(system: NeutralSystem, *,
                  nu_cap: float = NU_CAP,
                  slack_threshold: float = SLACK_THRESHOLD,
                  max_halvings: int = 60) -> Certificate:
    """Certificate for switched neutral systems via the majorant reduction.

    Works on the tilde data (A~, B~ = |A D + G|, D~ = |D|): the LP runs over
    pairs A~^(s) + B~^(r)(I-D~)^{-1}; mu is the elementwise max over s of
    (I-D~)^{-T} B~^(s)T nu plus eps*v with v the contraction direction of
    D~.  The certified functional then decreases along every trajectory of
    the original neutral dynamics.
    """
    _require_valid(system)
    A_t, B_t, D_t = neutral_comparison(system)
    vres = find_common_vector(difference_problem_for(system),
                              nu_cap=nu_cap, slack_threshold=slack_threshold)
    if not vres.feasible:
        raise ConstructionError(
            "no contraction direction for |D|: spectral radius too close to one")
    v = np.asarray(vres.witness, dtype=float)

    res = find_common_vector(feasibility_problem_for(system),
                             nu_cap=nu_cap, slack_threshold=slack_threshold)
    if not res.feasible:
        raise InfeasibleSystemError(
            "no certificate of this form: majorant composite not Hurwitz for "
            f"some mode pair (best slack {res.slack:.3e})")
    nu = np.asarray(res.witness, dtype=float)
    t = res.slack

    K = m_matrix_inverse(D_t)
    per_mode = [K.T @ (B_t[s].T @ nu) for s in range(system.num_modes)]
    base = np.max(per_mode, axis=0)

    mu, eps = _halve_eps(base, v, t, max_halvings,
                         lambda cand: max(float(np.max(A_t[s].T @ nu + cand))
                                          for s in range(system.num_modes)))
    deriv = Derivation(slack=t, lp_iterations=res.iterations + vres.iterations,
                       w=tuple(_freeze(p) for p in per_mode), v=_freeze(v), eps=eps)
    return _finish(system, "neutral", nu, (mu,), deriv)


def build_discrete(system: DiscreteDelaySystem, *,
                   nu_cap: float = NU_CAP,
                   slack_threshold: float = SLACK_THRESHOLD) -> Certificate:
    """Certificate for single-delay discrete switched systems.

    nu from the LP over A^(s) + B^(r) - I; with d the elementwise max of
    B^(r)T nu and w the uniform slack vector, mu = d + w/2.
    """
    if system.num_channels != 1:
        raise ValueError("single-delay builder requires exactly one delay channel")
    return build_discrete_multi(system, nu_cap=nu_cap, slack_threshold=slack_threshold)


def build_discrete_multi(system: DiscreteDelaySystem, *,
                         nu_cap: float = NU_CAP,
                         slack_threshold: float = SLACK_THRESHOLD,
                         tuple_cap: int = TUPLE_CAP) -> Certificate:
    """Certificate for discrete systems with several delay channels.

    The LP runs over every tuple A^(s) + B_1^(r1) + ... + B_m^(rm) - I; the
    per-channel weights are mu_r = d_r + w/(2m).
    """
    _require_valid(system)
    problem = feasibility_problem_for(system, tuple_cap=tuple_cap)
    res = find_common_vector(problem, nu_cap=nu_cap, slack_threshold=slack_threshold)
    if not res.feasible:
        raise InfeasibleSystemError(
            "no certificate of this form: the discrete composite LP is "
            f"infeasible (best slack {res.slack:.3e})")
    nu = np.asarray(res.witness, dtype=float)
    t = res.slack
    M = system.num_channels
    w_vec = np.full(system.n, t)
    d = tuple(np.max([Bs.T @ nu for Bs in chan], axis=0) for chan in system.B)
    mus = tuple(d_r + w_vec / (2.0 * M) for d_r in d)
    deriv = Derivation(slack=t, lp_iterations=res.iterations, q=_freeze(w_vec),
                       w=tuple(_freeze(d_r) for d_r in d))
    return _finish(system, "discrete", nu, mus, deriv)


def build_certificate(system, **options) -> Certificate:
    """Dispatch to the class-appropriate builder."""
    if isinstance(system, SwitchedDelaySystem):
        return build_multi_delay(system, **options)
    if isinstance(system, CoupledSystem):
        return build_switched_coupled(system, **options)
    if isinstance(system, NeutralSystem):
        return build_neutral(system, **options)
    if isinstance(system, DiscreteDelaySystem):
        return build_discrete_multi(system, **options)
    raise TypeError(f"unknown system descriptor {type(system).__name__}")
