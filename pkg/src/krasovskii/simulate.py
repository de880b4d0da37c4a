"""Fixed-step trajectory generation for all system classes.

Classical fourth-order stepping on a uniform grid that every delay and
switching breakpoint aligns with: delayed samples at full steps are exact
grid reads (never interpolated), and mode changes take effect exactly at
grid points, right-continuously.  Half-step stage lookups of the retarded
class are filled by cubic Hermite interpolation from stored node
derivatives (history times are evaluated exactly from the supplied
function), which keeps the one-step method at full order; the coupled and
neutral classes read their delayed track by linear midpoint interpolation
instead, because the difference variable carries no derivative information
and may be discontinuous.

Divergence does not poison output: once the sup-norm passes 1e12 (or a
non-finite value appears) the trajectory is truncated and flagged.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .matrices import as_vector
from .systems import (
    CoupledSystem,
    DiscreteDelaySystem,
    NeutralSystem,
    Nonlinearity,
    SwitchedDelaySystem,
    SwitchingSignal,
    eval_nonlinearity,
    schur_cohn_nonneg,
)

DIVERGE_NORM = 1e12
_ALIGN_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniform-grid samples of one run, with enough history to evaluate
    delayed functionals.

    x rows cover t = 0..T; x_prehistory/y_prehistory (when present) hold the
    samples at t = -k_max*h .. -h in order.  modes[i] is the 1-based mode
    active on [t_i, t_{i+1}); lags are the delays in grid steps.
    """

    kind: str
    h: float
    t: np.ndarray
    x: np.ndarray
    modes: np.ndarray
    lags: tuple[int, ...]
    y: np.ndarray | None = None
    x_prehistory: np.ndarray | None = None
    y_prehistory: np.ndarray | None = None
    diverged: bool = False
    nonlinearity: Nonlinearity | None = None
    meta: dict = field(default_factory=dict)

    @property
    def full_x(self) -> np.ndarray:
        if self.x_prehistory is None or self.x_prehistory.size == 0:
            return self.x
        return np.vstack([self.x_prehistory, self.x])

    @property
    def full_y(self) -> np.ndarray | None:
        if self.y is None:
            return None
        if self.y_prehistory is None or self.y_prehistory.size == 0:
            return self.y
        return np.vstack([self.y_prehistory, self.y])


# ---------------------------------------------------------------------------
# Grid alignment helpers
# ---------------------------------------------------------------------------

def _lag_steps(tau: float, h: float) -> int:
    k = int(round(tau / h)) if tau > 0.0 else 0
    if abs(k * h - tau) > _ALIGN_RTOL * max(1.0, tau):
        raise ValueError(f"delay {tau!r} is not a multiple of the step {h!r}")
    return k


def _num_steps(horizon: float, h: float) -> int:
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    K = int(round(horizon / h))
    if K < 1 or abs(K * h - horizon) > _ALIGN_RTOL * max(1.0, horizon):
        raise ValueError(f"horizon {horizon!r} is not a multiple of the step {h!r}")
    return K


def snap_signal(signal: SwitchingSignal, h: float) -> tuple[SwitchingSignal, float]:
    """Round breakpoints to exact grid multiples of h.

    Returns the aligned signal and the largest shift applied.  Breakpoints
    that collide after rounding are merged, keeping the later segment's
    mode (right-continuous convention).
    """
    ks, shift = [], 0.0
    for b in signal.breakpoints:
        k = int(round(b / h))
        shift = max(shift, abs(k * h - b))
        ks.append(k)
    bp, md = [], []
    for k, m in zip(ks, signal.modes):
        t = k * h
        if bp and t <= bp[-1]:
            md[-1] = m
        else:
            bp.append(t)
            md.append(m)
    return SwitchingSignal(tuple(bp), tuple(md), signal.num_modes), shift


def _aligned_modes(signal: SwitchingSignal, h: float, t_grid: np.ndarray) -> np.ndarray:
    sig, shift = snap_signal(signal, h)
    if shift > _ALIGN_RTOL * max(1.0, signal.breakpoints[-1]):
        raise ValueError(
            "switching breakpoints are not grid-aligned; snap the signal to the step first")
    return sig.modes_on_grid(t_grid)


def _as_history(phi, dim: int, name: str):
    if callable(phi):
        return phi
    vec = as_vector(phi, size=dim, name=name)
    return lambda t, _v=vec: _v


def constant_history(value) -> callable:
    """History function that is the given vector for all t <= 0."""
    vec = np.asarray(value, dtype=float).reshape(-1)
    return lambda t: vec


def random_history(rng: np.random.Generator, dim: int, tau: float,
                   scale: float = 1.0, nonnegative: bool = False) -> callable:
    """Seeded piecewise-linear history through four random knots on [-tau, 0]."""
    lo = 0.0 if nonnegative else -scale
    if tau <= 0.0:
        vec = rng.uniform(lo, scale, size=dim)
        return constant_history(vec)
    times = np.linspace(-tau, 0.0, 4)
    vals = rng.uniform(lo, scale, size=(4, dim))

    def phi(t, _times=times, _vals=vals):
        return np.array([np.interp(t, _times, _vals[:, i]) for i in range(_vals.shape[1])])

    return phi


# ---------------------------------------------------------------------------
# Retarded switched systems
# ---------------------------------------------------------------------------

def simulate_switched_delay(system: SwitchedDelaySystem, f: Nonlinearity,
                            signal: SwitchingSignal, history, horizon: float,
                            step: float) -> Trajectory:
    """Integrate dx/dt = A^(s) f(x) + sum_r B_r^(s) f(x(t - tau_r)).

    history is a vector (constant history) or a callable on [-tau_max, 0].
    The step must divide every delay, the horizon, and every switching
    breakpoint.
    """
    h = float(step)
    if h <= 0.0:
        raise ValueError("step must be positive")
    lags = tuple(_lag_steps(tau, h) for tau in system.delays)
    K = _num_steps(horizon, h)
    k_max = max(lags)
    n, L = system.n, system.num_channels
    phi = _as_history(history, n, "history")
    t_grid = np.arange(K + 1) * h
    mode_row = _aligned_modes(signal, h, t_grid)

    X = np.empty((k_max + K + 1, n))
    DX = np.zeros_like(X)
    for i in range(k_max + 1):
        X[i] = phi((i - k_max) * h)
    if not np.all(np.isfinite(X[:k_max + 1])):
        raise ValueError("history contains non-finite values")

    diverged = False
    end = K
    for i in range(K):
        j = k_max + i
        s = int(mode_row[i]) - 1
        A = system.A[s]
        Bs = [system.B[r][s] for r in range(L)]
        x0 = X[j]

        def delayed(r: int, half: int, xi):
            k = lags[r]
            if k == 0:
                return xi
            a = j - k
            if half == 0:
                return X[a]
            if half == 2:
                return X[a + 1]
            if a < k_max:  # midpoint lies inside the supplied history: exact
                return phi((a - k_max + 0.5) * h)
            return 0.5 * (X[a] + X[a + 1]) + 0.125 * h * (DX[a] - DX[a + 1])

        def rhs(xi, half: int):
            acc = A @ eval_nonlinearity(f, xi)
            for r in range(L):
                acc = acc + Bs[r] @ eval_nonlinearity(f, delayed(r, half, xi))
            return acc

        k1 = rhs(x0, 0)
        DX[j] = k1
        k2 = rhs(x0 + 0.5 * h * k1, 1)
        k3 = rhs(x0 + 0.5 * h * k2, 1)
        k4 = rhs(x0 + h * k3, 2)
        new = x0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(new)):
            end, diverged = i, True
            break
        X[j + 1] = new
        if float(np.max(np.abs(new))) > DIVERGE_NORM:
            end, diverged = i + 1, True
            break

    used = k_max + end + 1
    return Trajectory(
        kind="switched_delay", h=h, t=t_grid[:end + 1].copy(),
        x=X[k_max:used].copy(), modes=np.asarray(mode_row[:end + 1]),
        lags=lags, x_prehistory=X[:k_max].copy() if k_max else None,
        diverged=diverged, nonlinearity=f,
        meta={"class": "switched_delay", "h": h,
              "delays": [k * h for k in lags], "horizon": float(t_grid[end])})


# ---------------------------------------------------------------------------
# Coupled differential-difference systems
# ---------------------------------------------------------------------------

def simulate_coupled(system: CoupledSystem, f: Nonlinearity,
                     signal: SwitchingSignal, x0, y_history, horizon: float,
                     step: float) -> Trajectory:
    """Integrate dx/dt = A^(s) f(x) + B^(s) y(t-tau), y = C^(s) f(x) + D^(s) y(t-tau).

    x advances by the one-step method using the stored y-history; y(t) is
    then assigned algebraically and appended.  y_history supplies y on
    [-tau, 0); the difference equation governs t >= 0, so y(0) is computed
    from x0 and y(-tau) rather than read from the history (y may jump at 0).
    With tau = 0 the recursion is solved as y = (I-D)^{-1} C f(x).
    """
    h = float(step)
    if h <= 0.0:
        raise ValueError("step must be positive")
    k = _lag_steps(system.tau, h)
    K = _num_steps(horizon, h)
    n, m, N = system.n, system.m, system.num_modes
    x_start = as_vector(x0, size=n, name="x0")
    t_grid = np.arange(K + 1) * h
    mode_row = _aligned_modes(signal, h, t_grid)

    X = np.empty((K + 1, n))
    X[0] = x_start
    diverged = False
    end = K

    if k == 0:
        for D in system.D:
            if not schur_cohn_nonneg(D):
                raise ValueError("tau = 0 requires every D spectral radius below one")
        Kin = [np.linalg.solve(np.eye(m) - D, np.eye(m)) for D in system.D]

        def y_of(s: int, x):
            return Kin[s] @ (system.C[s] @ eval_nonlinearity(f, x))

        Y = np.empty((K + 1, m))
        Y[0] = y_of(int(mode_row[0]) - 1, X[0])
        for i in range(K):
            s = int(mode_row[i]) - 1
            A, B = system.A[s], system.B[s]

            def rhs(xi):
                return A @ eval_nonlinearity(f, xi) + B @ y_of(s, xi)

            x_c = X[i]
            k1 = rhs(x_c)
            k2 = rhs(x_c + 0.5 * h * k1)
            k3 = rhs(x_c + 0.5 * h * k2)
            k4 = rhs(x_c + h * k3)
            new = x_c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(new)):
                end, diverged = i, True
                break
            X[i + 1] = new
            Y[i + 1] = y_of(int(mode_row[i + 1]) - 1, new)
            if max(float(np.max(np.abs(new))), float(np.max(np.abs(Y[i + 1])))) > DIVERGE_NORM:
                end, diverged = i + 1, True
                break
        return Trajectory(
            kind="coupled", h=h, t=t_grid[:end + 1].copy(), x=X[:end + 1].copy(),
            modes=np.asarray(mode_row[:end + 1]), lags=(0,), y=Y[:end + 1].copy(),
            diverged=diverged, nonlinearity=f,
            meta={"class": "coupled", "h": h, "tau": 0.0, "horizon": float(t_grid[end])})

    psi = _as_history(y_history, m, "y_history")
    Y = np.empty((k + K + 1, m))
    for i in range(k):
        Y[i] = psi((i - k) * h)
    if not np.all(np.isfinite(Y[:k])):
        raise ValueError("y_history contains non-finite values")
    s0 = int(mode_row[0]) - 1
    Y[k] = system.C[s0] @ eval_nonlinearity(f, X[0]) + system.D[s0] @ Y[0]

    for i in range(K):
        jy = k + i
        s = int(mode_row[i]) - 1
        A, B = system.A[s], system.B[s]
        a = jy - k

        def y_look(half: int):
            if half == 0:
                return Y[a]
            if half == 2:
                return Y[a + 1]
            if a < k:  # midpoint inside the supplied history: exact
                return psi((a - k + 0.5) * h)
            return 0.5 * (Y[a] + Y[a + 1])

        def rhs(xi, half: int):
            return A @ eval_nonlinearity(f, xi) + B @ y_look(half)

        x_c = X[i]
        k1 = rhs(x_c, 0)
        k2 = rhs(x_c + 0.5 * h * k1, 1)
        k3 = rhs(x_c + 0.5 * h * k2, 1)
        k4 = rhs(x_c + h * k3, 2)
        new = x_c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(new)):
            end, diverged = i, True
            break
        X[i + 1] = new
        s1 = int(mode_row[i + 1]) - 1
        Y[jy + 1] = system.C[s1] @ eval_nonlinearity(f, new) + system.D[s1] @ Y[jy + 1 - k]
        if max(float(np.max(np.abs(new))), float(np.max(np.abs(Y[jy + 1])))) > DIVERGE_NORM:
            end, diverged = i + 1, True
            break

    return Trajectory(
        kind="coupled", h=h, t=t_grid[:end + 1].copy(), x=X[:end + 1].copy(),
        modes=np.asarray(mode_row[:end + 1]), lags=(k,),
        y=Y[k:k + end + 1].copy(), y_prehistory=Y[:k].copy(),
        diverged=diverged, nonlinearity=f,
        meta={"class": "coupled", "h": h, "tau": k * h, "horizon": float(t_grid[end])})


# ---------------------------------------------------------------------------
# Neutral systems (reduced coupled form, linear)
# ---------------------------------------------------------------------------

def simulate_neutral(system: NeutralSystem, signal: SwitchingSignal, history,
                     horizon: float, step: float) -> Trajectory:
    """Integrate the reduced form dy/dt = A^(s) y + B^(s) x(t-tau),
    x(t) = y(t) + D x(t-tau), with B^(s) = A^(s) D + G^(s).

    history supplies x on [-tau, 0]; both the x and y tracks are returned.
    """
    h = float(step)
    if h <= 0.0:
        raise ValueError("step must be positive")
    k = _lag_steps(system.tau, h)
    K = _num_steps(horizon, h)
    n = system.n
    B = system.B
    D = system.D
    phi = _as_history(history, n, "history")
    t_grid = np.arange(K + 1) * h
    mode_row = _aligned_modes(signal, h, t_grid)
    diverged = False
    end = K

    if k == 0:
        Zin = np.linalg.solve(np.eye(n) - D, np.eye(n))
        X = np.empty((K + 1, n))
        Y = np.empty((K + 1, n))
        X[0] = phi(0.0)
        Y[0] = X[0] - D @ X[0]
        for i in range(K):
            s = int(mode_row[i]) - 1
            A_s, B_s = system.A[s], B[s]

            def rhs(yi):
                return A_s @ yi + B_s @ (Zin @ yi)

            y_c = Y[i]
            k1 = rhs(y_c)
            k2 = rhs(y_c + 0.5 * h * k1)
            k3 = rhs(y_c + 0.5 * h * k2)
            k4 = rhs(y_c + h * k3)
            new = y_c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(new)):
                end, diverged = i, True
                break
            Y[i + 1] = new
            X[i + 1] = Zin @ new
            if float(np.max(np.abs(X[i + 1]))) > DIVERGE_NORM:
                end, diverged = i + 1, True
                break
        return Trajectory(
            kind="neutral", h=h, t=t_grid[:end + 1].copy(), x=X[:end + 1].copy(),
            modes=np.asarray(mode_row[:end + 1]), lags=(0,), y=Y[:end + 1].copy(),
            diverged=diverged,
            meta={"class": "neutral", "h": h, "tau": 0.0, "horizon": float(t_grid[end])})

    X = np.empty((k + K + 1, n))
    Y = np.empty((K + 1, n))
    for i in range(k + 1):
        X[i] = phi((i - k) * h)
    if not np.all(np.isfinite(X[:k + 1])):
        raise ValueError("history contains non-finite values")
    Y[0] = X[k] - D @ X[0]

    for i in range(K):
        jx = k + i
        s = int(mode_row[i]) - 1
        A_s, B_s = system.A[s], B[s]
        a = jx - k

        def x_look(half: int):
            if half == 0:
                return X[a]
            if half == 2:
                return X[a + 1]
            if a < k:
                return phi((a - k + 0.5) * h)
            return 0.5 * (X[a] + X[a + 1])

        def rhs(yi, half: int):
            return A_s @ yi + B_s @ x_look(half)

        y_c = Y[i]
        k1 = rhs(y_c, 0)
        k2 = rhs(y_c + 0.5 * h * k1, 1)
        k3 = rhs(y_c + 0.5 * h * k2, 1)
        k4 = rhs(y_c + h * k3, 2)
        new = y_c + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(new)):
            end, diverged = i, True
            break
        Y[i + 1] = new
        X[jx + 1] = new + D @ X[jx + 1 - k]
        if float(np.max(np.abs(X[jx + 1]))) > DIVERGE_NORM:
            end, diverged = i + 1, True
            break

    return Trajectory(
        kind="neutral", h=h, t=t_grid[:end + 1].copy(), x=X[k:k + end + 1].copy(),
        modes=np.asarray(mode_row[:end + 1]), lags=(k,),
        y=Y[:end + 1].copy(), x_prehistory=X[:k].copy(),
        diverged=diverged,
        meta={"class": "neutral", "h": h, "tau": k * h, "horizon": float(t_grid[end])})


# ---------------------------------------------------------------------------
# Discrete systems (exact iteration)
# ---------------------------------------------------------------------------

def simulate_discrete(system: DiscreteDelaySystem, f: Nonlinearity, modes,
                      window, steps: int) -> Trajectory:
    """Iterate x(k+1) = A^(s) f(x(k)) + sum_r B_r^(s) f(x(k - d_r)) exactly.

    window holds the initial samples x(-d_max), ..., x(0) as rows (d_max + 1
    of them); modes is a 1-based integer sequence with one entry per step,
    or a SwitchingSignal evaluated at integer times.
    """
    steps = int(steps)
    if steps < 1:
        raise ValueError("steps must be at least 1")
    n = system.n
    d_max = max(system.delays)
    W = np.atleast_2d(np.asarray(window, dtype=float))
    if W.shape != (d_max + 1, n):
        raise ValueError(f"window must have shape {(d_max + 1, n)}, got {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValueError("window contains non-finite values")
    if isinstance(modes, SwitchingSignal):
        mode_row = np.array([modes.mode_at(float(kk)) for kk in range(steps)], dtype=int)
    else:
        mode_row = np.asarray(modes, dtype=int).reshape(-1)
        if mode_row.size < steps:
            raise ValueError(f"need {steps} mode entries, got {mode_row.size}")
        mode_row = mode_row[:steps]
    if np.any(mode_row < 1) or np.any(mode_row > system.num_modes):
        raise ValueError(f"modes must lie in 1..{system.num_modes}")

    X = np.empty((d_max + steps + 1, n))
    X[:d_max + 1] = W
    diverged = False
    end = steps
    for kk in range(steps):
        j = d_max + kk
        s = int(mode_row[kk]) - 1
        acc = system.A[s] @ eval_nonlinearity(f, X[j])
        for r, d in enumerate(system.delays):
            acc = acc + system.B[r][s] @ eval_nonlinearity(f, X[j - d])
        if not np.all(np.isfinite(acc)):
            end, diverged = kk, True
            break
        X[j + 1] = acc
        if float(np.max(np.abs(acc))) > DIVERGE_NORM:
            end, diverged = kk + 1, True
            break

    modes_rec = np.empty(end + 1, dtype=int)
    modes_rec[:end] = mode_row[:end]
    modes_rec[end] = mode_row[end - 1] if end else mode_row[0]
    return Trajectory(
        kind="discrete", h=1.0, t=np.arange(end + 1, dtype=float),
        x=X[d_max:d_max + end + 1].copy(), modes=modes_rec,
        lags=tuple(system.delays),
        x_prehistory=X[:d_max].copy() if d_max else None,
        diverged=diverged, nonlinearity=f,
        meta={"class": "discrete", "steps": end})


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def write_trace_csv(traj: Trajectory, destination) -> None:
    """Write the t >= 0 samples as CSV: t, mode, x_1..x_n[, y_1..y_m].

    Floats carry 17 significant digits, enough to round-trip doubles.
    """
    own = isinstance(destination, (str, bytes))
    fh = open(destination, "w", newline="") if own else destination
    try:
        writer = csv.writer(fh)
        n = traj.x.shape[1]
        header = ["t", "mode"] + [f"x_{i + 1}" for i in range(n)]
        if traj.y is not None:
            header += [f"y_{i + 1}" for i in range(traj.y.shape[1])]
        writer.writerow(header)
        for i in range(traj.t.size):
            row = [f"{traj.t[i]:.17g}", str(int(traj.modes[i]))]
            row += [f"{v:.17g}" for v in traj.x[i]]
            if traj.y is not None:
                row += [f"{v:.17g}" for v in traj.y[i]]
            writer.writerow(row)
    finally:
        if own:
            fh.close()


def trace_csv_text(traj: Trajectory) -> str:
    buf = io.StringIO()
    write_trace_csv(traj, buf)
    return buf.getvalue()
