"""Functional evaluation along trajectories and decrease monitoring.

The certified functionals combine a weighted state norm with weighted
integrals (continuous time) or sums (discrete time) of the delayed memory.
A true Dini derivative cannot be sampled numerically, so the monitor checks
first differences instead: plain monotonicity with a relative tolerance at
every step, and the sharper decrease-rate bound only on a random sample of
steps, with an explicit quadrature allowance so interpolation and
integrator errors cannot produce false violations.  Integrals of absolute
values treat the stored samples as piecewise linear and are evaluated
exactly for that model, because the plain trapezoid rule overshoots on
cells where the integrand changes sign.  Near the origin the rate bound
compares noise against noise, so rate spot-checks skip steps with
sup-norm below 1e-9 (monotonicity is still enforced there).

Falsification never claims instability; it only searches for growth
evidence (terminal norm exceeding the initial norm) over random
nonlinearities, delays, switching signals, and histories.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .certificates import Certificate, CertificateError
from .simulate import (
    DIVERGE_NORM,
    Trajectory,
    random_history,
    simulate_coupled,
    simulate_discrete,
    simulate_neutral,
    simulate_switched_delay,
)
from .systems import (
    CoupledSystem,
    DiscreteDelaySystem,
    NeutralSystem,
    Nonlinearity,
    SwitchedDelaySystem,
    SwitchingSignal,
    eval_nonlinearity,
    random_nonlinearity,
)

TOL_MONO = 1e-6
TOL_DISCRETE = 1e-12
RATE_FLOOR = 1e-9     # sup-norm below which rate spot-checks are skipped
RATE_SLACK = 50.0     # quadrature allowance coefficient for the rate bound


@dataclass(frozen=True)
class Violation:
    """One failed decrease check."""

    step: int
    time: float
    v_before: float
    v_after: float
    margin: float
    check: str  # "monotonic" or "rate"


@dataclass(frozen=True, eq=False)
class MonitorReport:
    """Per-sample functional values and per-step decrease margins.

    margins holds dV/dt per step for continuous classes and plain dV for
    the discrete class; worst is the largest excess over the allowed bound
    (negative when everything passes).
    """

    kind: str
    V: np.ndarray
    margins: np.ndarray
    violations: tuple[Violation, ...]
    worst: float
    passed: bool
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Pointwise functional evaluation (window-based, for direct use and tests)
# ---------------------------------------------------------------------------

def _abs_cells(g: np.ndarray, h: float) -> np.ndarray:
    """Per-cell integrals of |linear interpolant| of the signed samples g.

    Same as the trapezoid rule of |g| except on cells where g changes sign,
    where the wedge is integrated exactly; without this the trapezoid rule
    overestimates a crossing cell by up to h*|ab|/(|a|+|b|), which is far
    above the monitor's decrease tolerance at certificate scale.
    """
    a, b = g[:-1], g[1:]
    span = np.abs(a) + np.abs(b)
    cells = 0.5 * h * span
    cross = a * b < 0.0
    if np.any(cross):
        safe = np.where(cross, span, 1.0)
        cells = np.where(cross, 0.5 * h * (a * a + b * b) / safe, cells)
    return cells


def _abs_tail(g: np.ndarray, h: float, k: int) -> np.ndarray:
    # integral of |each column| over the last k intervals of the window
    if k == 0:
        return np.zeros(g.shape[1])
    seg = g[g.shape[0] - k - 1:]
    return _abs_cells(seg, h).sum(axis=0)


def _window_lags(cert: Certificate, rows: int, lags) -> tuple[int, ...]:
    if lags is None:
        return tuple([rows - 1] * len(cert.mu))
    lags = tuple(int(k) for k in lags)
    if len(lags) != len(cert.mu):
        raise ValueError(f"need {len(cert.mu)} lags, got {len(lags)}")
    if any(k < 0 for k in lags):
        raise ValueError("lags must be nonnegative")
    if max(lags) > rows - 1:
        raise ValueError("insufficient history: window shorter than the largest delay")
    return lags


def eval_V_switched(cert: Certificate, window, h: float, f: Nonlinearity,
                    lags=None) -> float:
    """nu'|x(t)| + sum_r mu_r' integral_{t-tau_r}^t |f(x(z))| dz.

    window rows span [t - max tau, t] on the h-grid, oldest first; lags
    gives each channel's delay in steps (default: all span the window).
    The integrals treat the stored samples as piecewise linear and are
    exact for that model (trapezoid rule refined at sign changes).
    """
    W = np.atleast_2d(np.asarray(window, dtype=float))
    ks = _window_lags(cert, W.shape[0], lags)
    g = eval_nonlinearity(f, W)
    total = float(cert.nu @ np.abs(W[-1]))
    for mu_r, k in zip(cert.mu, ks):
        total += float(mu_r @ _abs_tail(g, h, k))
    return total


def eval_V_coupled(cert: Certificate, x_now, y_window, h: float) -> float:
    """nu'|x(t)| + mu' integral_{t-tau}^t |y(z)| dz (piecewise linear in y).

    y_window rows span [t-tau, t]; a single row means tau = 0 and the
    integral term vanishes.
    """
    x_now = np.asarray(x_now, dtype=float).reshape(-1)
    Y = np.atleast_2d(np.asarray(y_window, dtype=float))
    total = float(cert.nu @ np.abs(x_now))
    total += float(cert.mu[0] @ _abs_tail(Y, h, Y.shape[0] - 1))
    return total


def eval_V_neutral(cert: Certificate, x_window, D, h: float) -> float:
    """nu'|x(t) - D x(t-tau)| + mu' integral_{t-tau}^t |x(z)| dz.

    The difference term uses the raw D (signs kept); x_window rows span
    [t-tau, t] on the h-grid.
    """
    W = np.atleast_2d(np.asarray(x_window, dtype=float))
    D = np.asarray(D, dtype=float)
    head = W[-1] - D @ W[0]
    total = float(cert.nu @ np.abs(head))
    total += float(cert.mu[0] @ _abs_tail(W, h, W.shape[0] - 1))
    return total


def eval_V_discrete(cert: Certificate, window, f: Nonlinearity,
                    lags=None) -> float:
    """nu'|x(k)| + sum_r mu_r' sum_{l=1..d_r} |f(x(k-l))| (exact sums).

    window rows are the states x(k - d_max), ..., x(k); the memory term
    needs the states, not just f-values, because the head term weighs
    |x(k)| itself.
    """
    W = np.atleast_2d(np.asarray(window, dtype=float))
    ks = _window_lags(cert, W.shape[0], lags)
    g = np.abs(eval_nonlinearity(f, W))
    rows = W.shape[0]
    total = float(cert.nu @ np.abs(W[-1]))
    for mu_r, d in zip(cert.mu, ks):
        if d:
            total += float(mu_r @ g[rows - 1 - d:rows - 1].sum(axis=0))
    return total


# ---------------------------------------------------------------------------
# Whole-trajectory functional series
# ---------------------------------------------------------------------------

def _abs_cumint(g: np.ndarray, h: float) -> np.ndarray:
    # cumulative integral of |each column|, signed samples in, cell-exact
    out = np.zeros_like(g)
    np.cumsum(_abs_cells(g, h), axis=0, out=out[1:])
    return out


def _require_f(traj: Trajectory, f: Nonlinearity | None) -> Nonlinearity:
    f = f if f is not None else traj.nonlinearity
    if f is None:
        raise ValueError("a nonlinearity is required to evaluate this functional")
    return f


def functional_series(cert: Certificate, traj: Trajectory,
                      f: Nonlinearity | None = None) -> np.ndarray:
    """V at every grid point t >= 0 of the trajectory."""
    if cert.kind != traj.kind:
        raise CertificateError(
            f"certificate class {cert.kind!r} does not match trajectory class {traj.kind!r}")
    if cert.kind == "switched_delay":
        f = _require_f(traj, f)
        full = traj.full_x
        k_max = max(traj.lags)
        I = _abs_cumint(eval_nonlinearity(f, full), traj.h)
        V = np.abs(traj.x) @ cert.nu
        hi = full.shape[0]
        for mu_r, k in zip(cert.mu, traj.lags):
            V = V + (I[k_max:] - I[k_max - k:hi - k]) @ mu_r
        return V
    if cert.kind == "coupled":
        k = traj.lags[0]
        V = np.abs(traj.x) @ cert.nu
        if k:
            I = _abs_cumint(traj.full_y, traj.h)
            V = V + (I[k:] - I[:I.shape[0] - k]) @ cert.mu[0]
        return V
    if cert.kind == "neutral":
        k = traj.lags[0]
        V = np.abs(traj.y) @ cert.nu
        if k:
            I = _abs_cumint(traj.full_x, traj.h)
            V = V + (I[k:] - I[:I.shape[0] - k]) @ cert.mu[0]
        return V
    if cert.kind == "discrete":
        f = _require_f(traj, f)
        full = traj.full_x
        d_max = max(traj.lags)
        G = np.abs(eval_nonlinearity(f, full))
        V = np.abs(traj.x) @ cert.nu
        samples = traj.x.shape[0]
        for mu_r, d in zip(cert.mu, traj.lags):
            if d:
                # moving sums, not prefix-sum differences: the prefix total
                # keeps the early large-scale history, and its rounding
                # (absolute, ~1e-16 * total) swamps V once the trajectory
                # has decayed below it, breaking the 1e-12 decrease check
                w = G @ mu_r
                S = np.lib.stride_tricks.sliding_window_view(w, d).sum(axis=1)
                V = V + S[d_max - d:d_max - d + samples]
        return V
    raise CertificateError(f"unknown certificate class {cert.kind!r}")


# ---------------------------------------------------------------------------
# Decrease checking
# ---------------------------------------------------------------------------

def check_decrease(traj: Trajectory, cert: Certificate,
                   f: Nonlinearity | None = None, *, rate_checks: int = 100,
                   seed: int = 0, tol_mono: float = TOL_MONO,
                   tol_discrete: float = TOL_DISCRETE,
                   rate_slack: float = RATE_SLACK) -> MonitorReport:
    """Verify the certified decrease of V along one trajectory.

    Continuous classes: V(t_{k+1}) - V(t_k) <= tol_mono * max(1, V(t_k)) at
    every step, plus the rate bound dV <= (-beta + slack)*S_k*h on up to
    rate_checks random steps, where S_k sums |f_j(x_j(t_k))| (|y_j| for the
    neutral class) and slack absorbs the O(h^2) quadrature error
    explicitly: the test applied is
        dV <= -0.5*beta*S_k*h + rate_slack*h^2*(1 + V_k + V_{k+1} + beta*S_k*h).
    Discrete class: dV <= tol_discrete absolutely at every step.

    Coupled class only: y genuinely jumps wherever the supplied history
    meets the difference equation (t = 0, propagating to every multiple of
    tau) and at switching instants, and the stored grid cannot say where
    inside a cell a jump lands.  V itself stays continuous, but its grid
    estimate wobbles by up to 0.5*h*mu'|jump| when a jump cell enters or
    leaves the sliding window, so every step also allows the piecewise-
    linear ambiguity of its two window-edge cells, 0.5*h*mu'(|dy_enter| +
    |dy_leave|) -- O(h^2) on smooth stretches, and exactly the unresolvable
    ambiguity at a jump.  The same term is added to the rate bound.
    """
    V = functional_series(cert, traj, f)
    steps = V.size - 1
    violations: list[Violation] = []
    meta = {"class": cert.kind, "tol_mono": tol_mono, "seed": seed,
            "scenario": dict(traj.meta), "diverged": traj.diverged}

    if cert.kind == "discrete":
        dV = np.diff(V)
        margins = dV.copy()
        worst = float(np.max(dV - tol_discrete)) if steps else -np.inf
        bad = np.nonzero(dV > tol_discrete)[0]
        for i in bad:
            violations.append(Violation(int(i), float(traj.t[i]), float(V[i]),
                                        float(V[i + 1]), float(dV[i]), "monotonic"))
        meta["tol_discrete"] = tol_discrete
        return MonitorReport(cert.kind, V, margins, tuple(violations), worst,
                             not violations, meta)

    h = traj.h
    dV = np.diff(V)
    margins = dV / h
    allow = tol_mono * np.maximum(1.0, V[:-1])
    jump_allow = np.zeros(steps)
    if cert.kind == "coupled" and traj.lags[0] and steps:
        mu = cert.mu[0]
        enter = np.abs(np.diff(traj.y, axis=0)) @ mu
        leave = np.abs(np.diff(traj.full_y[:steps + 1], axis=0)) @ mu
        jump_allow = 0.5 * h * (enter + leave)
        allow = allow + jump_allow
    excess = dV - allow
    worst = float(np.max(excess)) if steps else -np.inf
    for i in np.nonzero(excess > 0.0)[0]:
        violations.append(Violation(int(i), float(traj.t[i]), float(V[i]),
                                    float(V[i + 1]), float(margins[i]), "monotonic"))

    if cert.kind == "neutral":
        S = np.abs(traj.y).sum(axis=1)
    else:
        ff = _require_f(traj, f)
        S = np.abs(eval_nonlinearity(ff, traj.x)).sum(axis=1)
    scale = np.max(np.abs(traj.x), axis=1) if traj.x.size else np.zeros(0)
    candidates = np.nonzero(scale[:-1] >= RATE_FLOOR)[0]
    rng = np.random.default_rng(seed)
    n_pick = min(int(rate_checks), candidates.size)
    picked = np.sort(rng.choice(candidates, size=n_pick, replace=False)) \
        if n_pick else np.zeros(0, dtype=int)
    checked = 0
    for i in picked:
        s_k = float(S[i])
        bound = (-0.5 * cert.beta * s_k * h
                 + rate_slack * h * h * (1.0 + V[i] + V[i + 1] + cert.beta * s_k * h)
                 + jump_allow[i])
        checked += 1
        if dV[i] > bound:
            violations.append(Violation(int(i), float(traj.t[i]), float(V[i]),
                                        float(V[i + 1]), float(margins[i]), "rate"))
            worst = max(worst, float(dV[i] - bound))
    meta.update(rate_checked=checked, rate_skipped=int(steps - candidates.size),
                rate_slack=rate_slack)
    violations.sort(key=lambda v: v.step)
    return MonitorReport(cert.kind, V, margins, tuple(violations), worst,
                         not violations, meta)


# ---------------------------------------------------------------------------
# Falsification sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FalsificationResult:
    """Best growth evidence found by a randomized sweep (never a proof)."""

    found: bool
    best_ratio: float
    best_index: int
    scenario: dict
    trajectory: Trajectory | None
    ratios: tuple[float, ...]


def _worker_count() -> int:
    raw = os.environ.get("KRASOVSKII_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _random_signal(rng: np.random.Generator, num_modes: int, horizon: float,
                   h: float) -> SwitchingSignal:
    bps = [0.0]
    modes = [int(rng.integers(1, num_modes + 1))]
    t = 0.0
    while True:
        t += float(rng.integers(4, 33)) * h
        if t >= horizon:
            break
        bps.append(t)
        modes.append(int(rng.integers(1, num_modes + 1)))
    return SwitchingSignal(tuple(bps), tuple(modes), num_modes)


def _signal_meta(sig: SwitchingSignal) -> dict:
    return {"breakpoints": list(sig.breakpoints), "modes": list(sig.modes)}


def _run_scenario(system, index: int, seed, horizon: float, h: float) -> tuple:
    rng = np.random.default_rng([seed, index])
    scenario: dict = {"index": index, "seed": [int(seed), int(index)]}
    try:
        if isinstance(system, DiscreteDelaySystem):
            steps = int(round(horizon / h)) if h != 1.0 else int(horizon)
            steps = max(steps, 8)
            d_max = max(system.delays)
            f = random_nonlinearity(rng, system.n, discrete_only=True)
            window = rng.uniform(-1.0, 1.0, size=(d_max + 1, system.n))
            modes = []
            while len(modes) < steps:
                modes.extend([int(rng.integers(1, system.num_modes + 1))]
                             * int(rng.integers(1, 9)))
            traj = simulate_discrete(system, f, np.array(modes[:steps]), window, steps)
            scenario.update(steps=steps, nonlinearity=f.describe())
            init = float(np.max(np.abs(window[-1])))
        elif isinstance(system, SwitchedDelaySystem):
            lags = rng.integers(0, 33, size=system.num_channels)
            delays = tuple(float(k) * h for k in lags)
            variant = SwitchedDelaySystem(system.A, system.B, delays)
            f = random_nonlinearity(rng, system.n)
            sig = _random_signal(rng, system.num_modes, horizon, h)
            hist = random_history(rng, system.n, max(delays))
            traj = simulate_switched_delay(variant, f, sig, hist, horizon, h)
            scenario.update(tau=list(delays), horizon=horizon, step=h,
                            nonlinearity=f.describe(), signal=_signal_meta(sig))
            init = float(np.max(np.abs(traj.x[0])))
        elif isinstance(system, CoupledSystem):
            k = int(rng.integers(1, 33))
            tau = k * h
            variant = CoupledSystem(system.A, system.B, system.C, system.D, tau)
            f = random_nonlinearity(rng, system.n)
            sig = _random_signal(rng, system.num_modes, horizon, h)
            x0 = rng.uniform(-1.0, 1.0, size=system.n)
            y_hist = random_history(rng, system.m, tau)
            traj = simulate_coupled(variant, f, sig, x0, y_hist, horizon, h)
            scenario.update(tau=tau, horizon=horizon, step=h,
                            nonlinearity=f.describe(), signal=_signal_meta(sig))
            init = float(np.max(np.abs(x0)))
        elif isinstance(system, NeutralSystem):
            k = int(rng.integers(1, 33))
            tau = k * h
            variant = NeutralSystem(system.A, system.G, system.D, tau)
            sig = _random_signal(rng, system.num_modes, horizon, h)
            hist = random_history(rng, system.n, tau)
            traj = simulate_neutral(variant, sig, hist, horizon, h)
            scenario.update(tau=tau, horizon=horizon, step=h,
                            signal=_signal_meta(sig))
            init = float(np.max(np.abs(traj.x[0])))
        else:
            raise TypeError(f"unsupported system type {type(system).__name__}")
    except (ValueError, np.linalg.LinAlgError) as exc:
        scenario["error"] = str(exc)
        return -np.inf, index, scenario, None

    term = float(np.max(np.abs(traj.x[-1]))) if traj.x.size else 0.0
    init = max(init, 1e-12)
    ratio = DIVERGE_NORM if traj.diverged else term / init
    scenario["terminal_norm"] = term
    scenario["initial_norm"] = init
    scenario["diverged"] = traj.diverged
    return ratio, index, scenario, traj


def falsify(system, budget: int, seed: int = 0, *, horizon: float = 12.0,
            step: float = 1.0 / 16.0) -> FalsificationResult:
    """Randomized growth search: budget scenarios, deterministic by seed.

    Each scenario draws its own generator from [seed, index], so results
    do not depend on execution order; KRASOVSKII_THREADS bounds the
    parallelism.  Growth evidence (ratio > 1) is never a proof of
    instability, only a witness trajectory worth inspecting.
    """
    budget = int(budget)
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if isinstance(system, DiscreteDelaySystem):
        horizon, step = float(max(int(horizon), 8)), 1.0
    indices = range(budget)
    workers = min(_worker_count(), budget)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(
                lambda i: _run_scenario(system, i, seed, horizon, step), indices))
    else:
        rows = [_run_scenario(system, i, seed, horizon, step) for i in indices]
    best = max(rows, key=lambda row: (row[0], -row[1]))
    ratios = tuple(float(r[0]) for r in rows)
    return FalsificationResult(
        found=bool(best[0] > 1.0), best_ratio=float(best[0]),
        best_index=int(best[1]), scenario=best[2], trajectory=best[3],
        ratios=ratios)
