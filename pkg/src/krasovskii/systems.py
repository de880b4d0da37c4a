"""Data model: system descriptors, admissible nonlinearities, switching signals.

Five system classes are described here; all of them are positive systems
whose stability is decided elsewhere by sign-structured feasibility.  Mode
numbers are 1-based wherever a mode is named (switching signals, CSV traces,
reports); descriptor fields are plain tuples indexed from 0, so the state
matrix of mode s is ``A[s - 1]``.

Descriptors are immutable: arrays are copied on construction and marked
read-only, so instances are safe to share between threads.
"""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .matrices import (
    SIGN_TOL,
    as_matrix,
    is_nonnegative,
    perron_root,
    schur_cohn_nonneg,
    tilde_transform,
)


def _freeze(M: np.ndarray) -> np.ndarray:
    M = np.array(M, dtype=float)
    M.flags.writeable = False
    return M


def _mat_tuple(mats, *, shape, name) -> tuple[np.ndarray, ...]:
    out = []
    for i, M in enumerate(mats):
        M = as_matrix(M, name=f"{name}[{i}]")
        if M.shape != shape:
            raise ValueError(f"{name}[{i}] has shape {M.shape}, expected {shape}")
        out.append(_freeze(M))
    return tuple(out)


# ---------------------------------------------------------------------------
# System descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SwitchedDelaySystem:
    """dx/dt = A^(s) f(x(t)) + sum_r B_r^(s) f(x(t - tau_r)).

    A: one matrix per mode (Metzler for validity); B: one list per delay
    channel, each with one nonnegative matrix per mode; delays: one
    nonnegative real per channel.  Single-delay systems are the L = 1 case.
    """

    A: tuple[np.ndarray, ...]
    B: tuple[tuple[np.ndarray, ...], ...]
    delays: tuple[float, ...]
    label: str = ""

    def __init__(self, A, B, delays, label: str = ""):
        A0 = as_matrix(A[0], square=True, name="A[0]")
        n = A0.shape[0]
        A_t = _mat_tuple(A, shape=(n, n), name="A")
        N = len(A_t)
        B_t = []
        for r, chan in enumerate(B):
            chan_t = _mat_tuple(chan, shape=(n, n), name=f"B[{r}]")
            if len(chan_t) != N:
                raise ValueError(f"B[{r}] has {len(chan_t)} matrices, expected one per mode ({N})")
            B_t.append(chan_t)
        if not B_t:
            raise ValueError("at least one delay channel is required")
        taus = tuple(float(t) for t in delays)
        if len(taus) != len(B_t):
            raise ValueError(f"{len(taus)} delays for {len(B_t)} channels")
        if any(not np.isfinite(t) or t < 0.0 for t in taus):
            raise ValueError("delays must be finite and nonnegative")
        object.__setattr__(self, "A", A_t)
        object.__setattr__(self, "B", tuple(B_t))
        object.__setattr__(self, "delays", taus)
        object.__setattr__(self, "label", str(label))

    @property
    def n(self) -> int:
        return self.A[0].shape[0]

    @property
    def num_modes(self) -> int:
        return len(self.A)

    @property
    def num_channels(self) -> int:
        return len(self.B)


@dataclass(frozen=True, eq=False)
class CoupledSystem:
    """dx/dt = A^(s) f(x(t)) + B^(s) y(t - tau);  y(t) = C^(s) f(x(t)) + D^(s) y(t - tau).

    x has dimension n, the difference variable y dimension m.  All four
    matrix families carry one matrix per mode.
    """

    A: tuple[np.ndarray, ...]
    B: tuple[np.ndarray, ...]
    C: tuple[np.ndarray, ...]
    D: tuple[np.ndarray, ...]
    tau: float
    label: str = ""

    def __init__(self, A, B, C, D, tau, label: str = ""):
        A0 = as_matrix(A[0], square=True, name="A[0]")
        B0 = as_matrix(B[0], name="B[0]")
        n, m = B0.shape
        if A0.shape != (n, n):
            raise ValueError(f"A[0] has shape {A0.shape}, expected {(n, n)}")
        object.__setattr__(self, "A", _mat_tuple(A, shape=(n, n), name="A"))
        object.__setattr__(self, "B", _mat_tuple(B, shape=(n, m), name="B"))
        object.__setattr__(self, "C", _mat_tuple(C, shape=(m, n), name="C"))
        object.__setattr__(self, "D", _mat_tuple(D, shape=(m, m), name="D"))
        N = len(self.A)
        for name in ("B", "C", "D"):
            if len(getattr(self, name)) != N:
                raise ValueError(f"{name} has {len(getattr(self, name))} matrices, expected {N}")
        tau = float(tau)
        if not np.isfinite(tau) or tau < 0.0:
            raise ValueError("tau must be finite and nonnegative")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "label", str(label))

    @property
    def n(self) -> int:
        return self.A[0].shape[0]

    @property
    def m(self) -> int:
        return self.D[0].shape[0]

    @property
    def num_modes(self) -> int:
        return len(self.A)


@dataclass(frozen=True, eq=False)
class NeutralSystem:
    """d/dt [x(t) - D x(t - tau)] = A^(s) x(t) + G^(s) x(t - tau)  (linear).

    A and G switch; D is shared across modes and, like A and G, carries no
    sign restriction.  The derived matrices B^(s) = A^(s) D + G^(s) appear in
    the coupled reduction y(t) = x(t) - D x(t - tau).
    """

    A: tuple[np.ndarray, ...]
    G: tuple[np.ndarray, ...]
    D: np.ndarray
    tau: float
    label: str = ""

    def __init__(self, A, G, D, tau, label: str = ""):
        A0 = as_matrix(A[0], square=True, name="A[0]")
        n = A0.shape[0]
        object.__setattr__(self, "A", _mat_tuple(A, shape=(n, n), name="A"))
        object.__setattr__(self, "G", _mat_tuple(G, shape=(n, n), name="G"))
        D = as_matrix(D, square=True, name="D")
        if D.shape != (n, n):
            raise ValueError(f"D has shape {D.shape}, expected {(n, n)}")
        if len(self.G) != len(self.A):
            raise ValueError(f"G has {len(self.G)} matrices, expected {len(self.A)}")
        object.__setattr__(self, "D", _freeze(D))
        tau = float(tau)
        if not np.isfinite(tau) or tau < 0.0:
            raise ValueError("tau must be finite and nonnegative")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "label", str(label))

    @property
    def n(self) -> int:
        return self.D.shape[0]

    @property
    def num_modes(self) -> int:
        return len(self.A)

    @property
    def B(self) -> tuple[np.ndarray, ...]:
        """Derived delayed-coupling matrices B^(s) = A^(s) D + G^(s)."""
        return tuple(_freeze(As @ self.D + Gs) for As, Gs in zip(self.A, self.G))


@dataclass(frozen=True, eq=False)
class DiscreteDelaySystem:
    """x(k+1) = A^(s) f(x(k)) + sum_r B_r^(s) f(x(k - d_r)) with integer lags."""

    A: tuple[np.ndarray, ...]
    B: tuple[tuple[np.ndarray, ...], ...]
    delays: tuple[int, ...]
    label: str = ""

    def __init__(self, A, B, delays, label: str = ""):
        A0 = as_matrix(A[0], square=True, name="A[0]")
        n = A0.shape[0]
        A_t = _mat_tuple(A, shape=(n, n), name="A")
        N = len(A_t)
        B_t = []
        for r, chan in enumerate(B):
            chan_t = _mat_tuple(chan, shape=(n, n), name=f"B[{r}]")
            if len(chan_t) != N:
                raise ValueError(f"B[{r}] has {len(chan_t)} matrices, expected one per mode ({N})")
            B_t.append(chan_t)
        if not B_t:
            raise ValueError("at least one delay channel is required")
        lags = []
        for d in delays:
            if float(d) != int(d):
                raise ValueError("discrete delays must be integers")
            d = int(d)
            if d < 0:
                raise ValueError("discrete delays must be nonnegative")
            lags.append(d)
        if len(lags) != len(B_t):
            raise ValueError(f"{len(lags)} delays for {len(B_t)} channels")
        object.__setattr__(self, "A", A_t)
        object.__setattr__(self, "B", tuple(B_t))
        object.__setattr__(self, "delays", tuple(lags))
        object.__setattr__(self, "label", str(label))

    @property
    def n(self) -> int:
        return self.A[0].shape[0]

    @property
    def num_modes(self) -> int:
        return len(self.A)

    @property
    def num_channels(self) -> int:
        return len(self.B)


# ---------------------------------------------------------------------------
# Structural validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StructuralViolation:
    """One broken structural rule: which matrix, which entry, which rule."""

    matrix: str
    entry: tuple[int, int] | None
    rule: str
    detail: str

    def __str__(self) -> str:
        where = f"{self.matrix}[{self.entry[0]},{self.entry[1]}]" if self.entry else self.matrix
        return f"{where}: {self.rule} — {self.detail}"


def _check_metzler(M: np.ndarray, name: str, out: list) -> None:
    n = M.shape[0]
    for i in range(n):
        for j in range(n):
            if i != j and M[i, j] < -SIGN_TOL:
                out.append(StructuralViolation(
                    name, (i, j), "metzler",
                    f"off-diagonal entry {M[i, j]:.6g} is negative"))


def _check_nonneg(M: np.ndarray, name: str, out: list) -> None:
    rows, cols = np.nonzero(M < -SIGN_TOL)
    for i, j in zip(rows, cols):
        out.append(StructuralViolation(
            name, (int(i), int(j)), "nonnegative",
            f"entry {M[i, j]:.6g} is negative"))


def validate(system) -> list[StructuralViolation]:
    """Class-specific sign/structure checks.  Violations are data, not errors.

    Empty list means the descriptor satisfies every structural hypothesis of
    its class; the list is deterministic and the check has no side effects.
    """
    out: list[StructuralViolation] = []
    if isinstance(system, SwitchedDelaySystem):
        for s, As in enumerate(system.A):
            _check_metzler(As, f"A[{s}]", out)
        for r, chan in enumerate(system.B):
            for s, Bs in enumerate(chan):
                _check_nonneg(Bs, f"B[{r}][{s}]", out)
    elif isinstance(system, CoupledSystem):
        for s in range(system.num_modes):
            _check_metzler(system.A[s], f"A[{s}]", out)
            _check_nonneg(system.B[s], f"B[{s}]", out)
            _check_nonneg(system.C[s], f"C[{s}]", out)
            _check_nonneg(system.D[s], f"D[{s}]", out)
            if is_nonnegative(system.D[s]) and not schur_cohn_nonneg(system.D[s]):
                out.append(StructuralViolation(
                    f"D[{s}]", None, "schur_cohn",
                    f"spectral radius {perron_root(system.D[s]):.6g} is not below one"))
    elif isinstance(system, NeutralSystem):
        D_t = np.abs(system.D)
        if not schur_cohn_nonneg(D_t):
            out.append(StructuralViolation(
                "abs(D)", None, "schur_cohn",
                f"|D| is not Schur-Cohn: spectral radius {perron_root(D_t):.6g}"))
    elif isinstance(system, DiscreteDelaySystem):
        for s, As in enumerate(system.A):
            _check_nonneg(As, f"A[{s}]", out)
        for r, chan in enumerate(system.B):
            for s, Bs in enumerate(chan):
                _check_nonneg(Bs, f"B[{r}][{s}]", out)
    else:
        raise TypeError(f"unknown system descriptor {type(system).__name__}")
    return out


def neutral_comparison(system: NeutralSystem):
    """Tilde (majorant) data for a neutral system: (A~ list, B~ list, D~)."""
    A_t, B_t, D_t = [], [], None
    for As, Bs in zip(system.A, system.B):
        At, Bt, D_t = tilde_transform(As, Bs, system.D)
        A_t.append(At)
        B_t.append(Bt)
    return tuple(A_t), tuple(B_t), D_t


# ---------------------------------------------------------------------------
# Admissible nonlinearities
# ---------------------------------------------------------------------------

# Dense sampling grid for admissibility: log-spaced over ±[1e-6, 1e3],
# 10^4 points, probing both near-zero slope and large-argument growth.
_GRID_POS = np.logspace(-6.0, 3.0, 5000)
_SAMPLE_GRID = np.concatenate([-_GRID_POS[::-1], _GRID_POS])


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Diagonal map f(x) = (f_1(x_1), ..., f_n(x_n)) with x_i f_i(x_i) > 0.

    kind is one of: identity; tanh (params: gain, f = gain * tanh(x));
    cubic (params: scale, f = scale * x^3 / (1 + x^2)); saturation
    (params: limit, f = clip(x, -limit, limit)); piecewise (params: inner
    and outer slope, knee at |x| = 1).  Parameters may be scalars or
    per-coordinate arrays.  The sign condition is verified on a dense
    sampled grid at construction; `discrete_admissible` additionally
    records whether |f(x)| <= |x| held on the same grid.
    """

    kind: str
    params: tuple
    discrete_admissible: bool

    def __init__(self, kind: str, params: tuple = ()):
        if kind not in _KINDS:
            raise ValueError(f"unknown nonlinearity kind '{kind}'")
        params = tuple(
            _freeze(np.asarray(p, dtype=float)) if np.ndim(p) else float(p)
            for p in params
        )
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)
        cols = _apply_kind(kind, params, _SAMPLE_GRID[:, None])
        if not np.all(_SAMPLE_GRID[:, None] * cols > 0.0):
            raise ValueError(f"{self.describe()} violates the sign condition x*f(x) > 0")
        admissible = bool(np.all(np.abs(cols) <= np.abs(_SAMPLE_GRID)[:, None] * (1 + 1e-12)))
        object.__setattr__(self, "discrete_admissible", admissible)

    def __call__(self, x):
        return eval_nonlinearity(self, x)

    def describe(self) -> str:
        if not self.params:
            return self.kind
        parts = ",".join(np.array2string(np.asarray(p), precision=4, separator=" ")
                         for p in self.params)
        return f"{self.kind}({parts})"


def _apply_kind(kind: str, params: tuple, x: np.ndarray) -> np.ndarray:
    if kind == "identity":
        return np.array(x, dtype=float)
    if kind == "tanh":
        (gain,) = params
        return np.asarray(gain) * np.tanh(x)
    if kind == "cubic":
        (scale,) = params
        return np.asarray(scale) * x ** 3 / (1.0 + x ** 2)
    if kind == "saturation":
        (limit,) = params
        lim = np.asarray(limit)
        return np.clip(x, -lim, lim)
    if kind == "piecewise":
        inner, outer = (np.asarray(p) for p in params)
        ax = np.abs(x)
        return np.sign(x) * np.where(ax <= 1.0, inner * ax, inner + outer * (ax - 1.0))
    raise ValueError(f"unknown nonlinearity kind '{kind}'")


_KINDS = ("identity", "tanh", "cubic", "saturation", "piecewise")


def eval_nonlinearity(f: Nonlinearity, x) -> np.ndarray:
    """Componentwise application; broadcasts over trailing state axes."""
    x = np.asarray(x, dtype=float)
    return _apply_kind(f.kind, f.params, x)


def identity() -> Nonlinearity:
    return Nonlinearity("identity")


def tanh(gain=1.0) -> Nonlinearity:
    return Nonlinearity("tanh", (gain,))


def cubic(scale=1.0) -> Nonlinearity:
    return Nonlinearity("cubic", (scale,))


def saturation(limit=1.0) -> Nonlinearity:
    return Nonlinearity("saturation", (limit,))


def piecewise(inner=0.8, outer=0.5) -> Nonlinearity:
    return Nonlinearity("piecewise", (inner, outer))


REGISTRY = {
    "identity": identity,
    "tanh": tanh,
    "cubic": cubic,
    "saturation": saturation,
    "piecewise": piecewise,
}


def parse_nonlinearity(spec: str) -> Nonlinearity:
    """Parse 'name' or 'name:p1,p2' into a registry nonlinearity."""
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name not in REGISTRY:
        raise ValueError(f"unknown nonlinearity '{name}' (known: {', '.join(REGISTRY)})")
    if not rest:
        return REGISTRY[name]()
    args = [float(tok) for tok in rest.split(",") if tok.strip()]
    return REGISTRY[name](*args)


def random_nonlinearity(rng: np.random.Generator, dim: int,
                        discrete_only: bool = False) -> Nonlinearity:
    """Randomly parameterized admissible nonlinearity for testing sweeps.

    With discrete_only, parameters are restricted so |f(x)| <= |x| holds
    (slopes and gains capped at one).
    """
    kind = rng.choice(["identity", "tanh", "cubic", "saturation", "piecewise"])
    per_coord = bool(rng.integers(0, 2))

    def draw(lo, hi):
        if per_coord:
            return rng.uniform(lo, hi, size=dim)
        return float(rng.uniform(lo, hi))

    cap = 1.0 if discrete_only else 2.0
    if kind == "identity":
        return identity()
    if kind == "tanh":
        return tanh(draw(0.3, cap))
    if kind == "cubic":
        return cubic(draw(0.3, cap))
    if kind == "saturation":
        return saturation(draw(0.5, 3.0))
    hi_inner = 1.0 if discrete_only else 1.5
    return piecewise(draw(0.3, hi_inner), draw(0.2, min(1.0, hi_inner)))


# ---------------------------------------------------------------------------
# Switching signals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SwitchingSignal:
    """Piecewise-constant, right-continuous mode selector.

    breakpoints are strictly increasing and start at 0; modes[i] (1-based)
    is active on [breakpoints[i], breakpoints[i+1]), the last mode extends
    to infinity.
    """

    breakpoints: tuple[float, ...]
    modes: tuple[int, ...]
    num_modes: int

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        md = tuple(int(m) for m in self.modes)
        if not bp or bp[0] != 0.0:
            raise ValueError("breakpoints must start at 0.0")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(md) != len(bp):
            raise ValueError("one mode per breakpoint is required")
        if any(not 1 <= m <= self.num_modes for m in md):
            raise ValueError(f"modes must lie in 1..{self.num_modes}")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "modes", md)

    def mode_at(self, t: float) -> int:
        """Active mode at time t >= 0 (right-continuous)."""
        idx = bisect_right(self.breakpoints, t) - 1
        return self.modes[max(idx, 0)]

    def modes_on_grid(self, t_grid: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.breakpoints, t_grid, side="right") - 1
        return np.asarray(self.modes, dtype=int)[np.maximum(idx, 0)]


def constant_signal(mode: int = 1, num_modes: int = 1) -> SwitchingSignal:
    return SwitchingSignal((0.0,), (mode,), num_modes)


def sample_signal(kind: str, horizon: float, num_modes: int, *,
                  dwell: float = 1.0, dwell_min: float = 0.5,
                  dwell_max: float = 1.5, seed: int = 0) -> SwitchingSignal:
    """Generate a switching signal covering [0, horizon].

    kind 'periodic': modes cycle 1..N with fixed dwell.  kind 'random':
    uniform mode draws with dwell uniform in [dwell_min, dwell_max],
    deterministic for a given seed.
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if num_modes < 1:
        raise ValueError("num_modes must be at least 1")
    if kind == "periodic":
        if dwell <= 0.0:
            raise ValueError("dwell must be positive")
        k = 0
        bp, md = [], []
        while k * dwell < horizon:
            bp.append(k * dwell)
            md.append(k % num_modes + 1)
            k += 1
        return SwitchingSignal(tuple(bp), tuple(md), num_modes)
    if kind == "random":
        if dwell_min <= 0.0 or dwell_max < dwell_min:
            raise ValueError("dwell bounds must satisfy 0 < dwell_min <= dwell_max")
        rng = np.random.default_rng(seed)
        t, bp, md = 0.0, [], []
        while t < horizon:
            bp.append(t)
            md.append(int(rng.integers(1, num_modes + 1)))
            t += float(rng.uniform(dwell_min, dwell_max))
        return SwitchingSignal(tuple(bp), tuple(md), num_modes)
    raise ValueError(f"unknown signal kind '{kind}' (use 'periodic' or 'random')")
