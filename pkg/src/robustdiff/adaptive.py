"""Adaptive window selection for streaming finite-difference differentiation.

The estimator inspects, at every step k, the deviation of each recent sample
from the chord interpolating the endpoints of a lookback window.  Any
deviation beyond what a signal with |f''| <= L can produce is attributed to
measurement noise; half the worst excess is the noise-amplitude estimate
N_hat_k.  The difference-quotient window T_hat_k is then sized so the two
error sources (noise feedthrough 2N/T and curvature lag L*T/2) balance, with
T_hat_k always an integer number of sampling periods.

Operation per step, with u(t) the measurement stream and dt the period:

    Q(t_k, l*dt, j*dt) = u(t_k - j*dt) - u(t_k) + (u(t_k) - u(t_k - l*dt))*j/l
    N_hat_k = max over 2 <= l <= min(k, k_bar), 1 <= j <= l of
              (|Q(t_k, l*dt, j*dt)| - L*dt^2*j*(l-j)/2) / 2          (k >= 2)
    gamma_k = smallest j*dt / (2*sqrt(N_hat_k/L)) in [1, gamma_bar], or 1
              when 2*sqrt(N_hat_k/L) <= dt
    T_hat_k = min(t_k, k_bar*dt, max(dt, 2*gamma_k*sqrt(N_hat_k/L)))
    y_k     = (u(t_k) - u(t_k - T_hat_k)) / max(T_hat_k, dt),  y_0 = 0
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "GAMMA_BAR_MIN",
    "GAMMA_BAR_MAX",
    "AdaptiveParams",
    "SampleWindow",
    "AdaptiveDiagnostics",
    "BatchDiagnostics",
    "q_value",
    "noise_estimate_kernel",
    "estimate_noise",
    "select_window",
    "adaptive_step",
    "AdaptiveDifferentiator",
    "run_adaptive_batch",
    "tune_window_count",
]

GAMMA_BAR_MIN = 2.0
GAMMA_BAR_MAX = 1.0 + math.sqrt(2.0)

# Chosen so startup traces and fuzz draws never trigger quadratic-cost
# surprises when callers ask for an unbounded window.
_CHUNK_STEPS = 64


@dataclass(frozen=True)
class AdaptiveParams:
    """Differentiator parameters.

    k_bar is the lookback window length in sampling periods (>= 2); pass
    math.inf for an unbounded window (memory then grows with the stream).
    gamma_bar is the window-stretch ceiling, limited to [2, 1 + sqrt(2)].
    gamma_choice optionally picks the window multiple: called as
    gamma_choice(j_lo, j_hi) and must return an integer in [j_lo, j_hi];
    the default takes j_lo (the smallest admissible stretch).
    """

    L: float
    dt: float
    k_bar: int | float = 200
    gamma_bar: float = 2.0
    gamma_choice: Callable[[int, int], int] | None = None

    def __post_init__(self) -> None:
        if not (self.L > 0.0):
            raise ValueError(f"L must be > 0, got {self.L}")
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if math.isinf(self.k_bar):
            if self.k_bar < 0:
                raise ValueError("k_bar must be positive")
        else:
            if int(self.k_bar) != self.k_bar or self.k_bar < 2:
                raise ValueError(f"k_bar must be an integer >= 2 or inf, got {self.k_bar}")
            object.__setattr__(self, "k_bar", int(self.k_bar))
        if not (GAMMA_BAR_MIN <= self.gamma_bar <= GAMMA_BAR_MAX * (1.0 + 1e-12)):
            raise ValueError(
                f"gamma_bar must lie in [{GAMMA_BAR_MIN}, 1+sqrt(2)], got {self.gamma_bar}"
            )

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.k_bar)


class SampleWindow:
    """Ring buffer over the most recent min(k+1, k_bar+1) measurements.

    Reads are by lag: value_at_lag(j) is u(t_k - j*dt).  Capacity is
    k_bar + 1 samples for finite k_bar, unbounded otherwise.
    """

    def __init__(self, k_bar: int | float):
        if math.isinf(k_bar):
            self._cap = None
            self._buf = np.empty(256, dtype=np.float64)
        else:
            if int(k_bar) != k_bar or k_bar < 2:
                raise ValueError(f"k_bar must be an integer >= 2 or inf, got {k_bar}")
            self._cap = int(k_bar) + 1
            self._buf = np.empty(self._cap, dtype=np.float64)
        self._count = 0
        self._head = -1  # buffer index of the newest sample

    @property
    def k(self) -> int:
        """Current step index (number of pushes minus one)."""
        return self._count - 1

    def __len__(self) -> int:
        return min(self._count, self._cap) if self._cap else self._count

    @property
    def max_lag(self) -> int:
        return len(self) - 1

    def push(self, u_k: float) -> None:
        if self._cap is None:
            if self._count == self._buf.size:
                grown = np.empty(self._buf.size * 2, dtype=np.float64)
                grown[: self._count] = self._buf[: self._count]
                self._buf = grown
            self._buf[self._count] = u_k
            self._head = self._count
        else:
            self._head = (self._head + 1) % self._cap
            self._buf[self._head] = u_k
        self._count += 1

    def value_at_lag(self, j: int) -> float:
        if not (0 <= j <= self.max_lag):
            raise IndexError(f"lag {j} outside stored range [0, {self.max_lag}]")
        if self._cap is None:
            return float(self._buf[self._head - j])
        return float(self._buf[(self._head - j) % self._cap])

    def newest_first(self) -> np.ndarray:
        """Samples ordered by age: out[j] = u(t_k - j*dt)."""
        m = len(self)
        if self._cap is None:
            return self._buf[self._head::-1][:m].copy()
        pos = (self._head - np.arange(m)) % self._cap
        return self._buf[pos]

    def reset(self) -> None:
        self._count = 0
        self._head = -1
        if self._cap is None:
            self._buf = np.empty(256, dtype=np.float64)


class _LagGrids:
    """Cached (lag-span, lag) index grids shared by streaming and batch paths.

    For window extent w the usable slice is frac[: w - 1, : w] etc., so every
    evaluation at any extent uses bit-identical precomputed factors.
    """

    def __init__(self, w_max: int):
        self.w_max = int(w_max)
        ell = np.arange(2, self.w_max + 1, dtype=np.float64)[:, None]
        j = np.arange(1, self.w_max + 1, dtype=np.float64)[None, :]
        self.frac = j / ell
        self.pairs = j * (ell - j)  # j*(l-j), exact small integers
        self.mask = j <= ell

    def grow_to(self, w_max: int) -> "_LagGrids":
        if w_max <= self.w_max:
            return self
        return _LagGrids(max(w_max, 2 * self.w_max))


def _excess_matrix(rev: np.ndarray, half_pen: float, grids: _LagGrids) -> np.ndarray:
    """|Q| - penalty over all (span l, lag j), masked entries = -inf.

    rev[j] = u(t_k - j*dt); half_pen = L*dt^2/2.
    """
    w = rev.size - 1
    frac = grids.frac[: w - 1, :w]
    pairs = grids.pairs[: w - 1, :w]
    mask = grids.mask[: w - 1, :w]
    q = rev[1:][None, :] - rev[0] + (rev[0] - rev[2:][:, None]) * frac
    val = np.abs(q) - half_pen * pairs
    return np.where(mask, val, -np.inf)


def noise_estimate_kernel(rev: np.ndarray, L: float, dt: float) -> float:
    """Noise amplitude estimate from a newest-first sample window.

    Accepts L >= 0 (the curvature penalty vanishes at L = 0).  Returns 0.0
    whenever fewer than three samples are stored.
    """
    rev = np.asarray(rev, dtype=np.float64)
    if L < 0:
        raise ValueError(f"L must be >= 0, got {L}")
    w = rev.size - 1
    if w < 2:
        return 0.0
    grids = _LagGrids(w)
    best = float(np.max(_excess_matrix(rev, 0.5 * L * dt * dt, grids)))
    return 0.5 * max(best, 0.0)


def q_value(window: SampleWindow, ell: int, j: int) -> float:
    """Chord-interpolation residual Q(t_k, ell*dt, j*dt) over the window."""
    if not (1 <= j <= ell <= window.max_lag):
        raise ValueError(
            f"require 1 <= j <= ell <= {window.max_lag}, got ell={ell}, j={j}"
        )
    u_t = window.value_at_lag(0)
    return window.value_at_lag(j) - u_t + (u_t - window.value_at_lag(ell)) * (j / ell)


def estimate_noise(window: SampleWindow, params: AdaptiveParams) -> float:
    """N_hat_k over the stored window; 0 for k < 2."""
    return noise_estimate_kernel(window.newest_first(), params.L, params.dt)


def _select_steps(
    n_hat: float, L: float, dt: float, gamma_bar: float,
    gamma_choice: Callable[[int, int], int] | None,
) -> tuple[int, float]:
    """Window multiple j and stretch gamma for the given noise estimate.

    Returns (j, gamma) before the min(t_k, k_bar*dt) truncation.
    """
    root = 2.0 * math.sqrt(n_hat / L)
    if root <= dt:
        return 1, 1.0
    j_lo = int(math.ceil(root / dt))
    if j_lo * dt < root:  # guards against a downward-rounded ratio
        j_lo += 1
    if gamma_choice is None:
        j = j_lo
    else:
        j_hi = max(j_lo, int(math.floor(gamma_bar * root / dt)))
        j = int(gamma_choice(j_lo, j_hi))
        if not (j_lo <= j <= j_hi):
            raise ValueError(f"gamma_choice returned {j} outside [{j_lo}, {j_hi}]")
    return j, j * dt / root


def select_window(n_hat: float, params: AdaptiveParams, k: int) -> tuple[float, float]:
    """(gamma_k, T_hat_k) for step k given the noise estimate.

    T_hat_k = min(t_k, k_bar*dt, max(dt, 2*gamma_k*sqrt(N_hat_k/L))) realized
    through integer window multiples, so T_hat_k/dt is a whole number for
    k >= 1 and exactly 0 for k = 0.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if n_hat < 0:
        raise ValueError(f"N_hat must be >= 0, got {n_hat}")
    j, gamma = _select_steps(n_hat, params.L, params.dt, params.gamma_bar, params.gamma_choice)
    m = k if params.unbounded else min(k, int(params.k_bar))
    m = min(m, max(1, j))
    return gamma, m * params.dt


@dataclass(frozen=True)
class AdaptiveDiagnostics:
    """Per-step internals: estimate, stretch, window, and output."""

    k: int
    t: float
    u: float
    N_hat: float
    gamma: float
    T_hat: float
    window_steps: int
    y: float


@dataclass(frozen=True)
class BatchDiagnostics:
    """Whole-trace diagnostics; row k mirrors AdaptiveDiagnostics."""

    dt: float
    u: np.ndarray
    N_hat: np.ndarray
    gamma: np.ndarray
    T_hat: np.ndarray
    window_steps: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return int(self.u.size)

    def times(self) -> np.ndarray:
        return np.arange(self.n) * self.dt


class AdaptiveDifferentiator:
    """Streaming differentiator; one instance serves one measurement stream.

    Not safe for concurrent stepping; independent instances are fully
    independent.  step() is deterministic given the input prefix.
    """

    def __init__(self, params: AdaptiveParams):
        self.params = params
        self._window = SampleWindow(params.k_bar)
        self._grids = _LagGrids(2)
        self._half_pen = 0.5 * params.L * params.dt * params.dt
        self._last: AdaptiveDiagnostics | None = None

    @property
    def k(self) -> int:
        return self._window.k

    def step(self, u_k: float) -> AdaptiveDiagnostics:
        p = self.params
        self._window.push(float(u_k))
        k = self._window.k
        rev = self._window.newest_first()
        w = rev.size - 1
        if w < 2:
            n_hat = 0.0
        else:
            self._grids = self._grids.grow_to(w)
            best = float(np.max(_excess_matrix(rev, self._half_pen, self._grids)))
            n_hat = 0.5 * max(best, 0.0)
        j, gamma = _select_steps(n_hat, p.L, p.dt, p.gamma_bar, p.gamma_choice)
        m = min(k, max(1, j)) if p.unbounded else min(k, int(p.k_bar), max(1, j))
        if k == 0:
            y = 0.0
        else:
            y = (rev[0] - rev[m]) / (m * p.dt)
        diag = AdaptiveDiagnostics(
            k=k, t=k * p.dt, u=float(u_k), N_hat=n_hat, gamma=gamma,
            T_hat=m * p.dt, window_steps=m, y=y,
        )
        self._last = diag
        return diag

    def diagnostics(self) -> AdaptiveDiagnostics | None:
        return self._last

    def reset(self) -> None:
        self._window.reset()
        self._last = None


def adaptive_step(state: AdaptiveDifferentiator, u_k: float) -> AdaptiveDiagnostics:
    """Push one measurement and return the step diagnostics."""
    return state.step(u_k)


def run_adaptive_batch(u, params: AdaptiveParams) -> BatchDiagnostics:
    """Evaluate the differentiator over a whole trace at once.

    Output is bit-identical to stepping AdaptiveDifferentiator sample by
    sample; the estimate maxima are evaluated in vectorized chunks and the
    window selection reuses the scalar stepping code.
    """
    p = params
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1:
        raise ValueError(f"u must be one-dimensional, got shape {u.shape}")
    n = u.size
    n_hat = np.zeros(n, dtype=np.float64)
    half_pen = 0.5 * p.L * p.dt * p.dt

    kb = n - 1 if p.unbounded else min(int(p.k_bar), n - 1)
    kb = max(kb, 2)
    grids = _LagGrids(2)

    # startup region: window still growing
    for k in range(2, min(n, kb)):
        rev = u[k::-1]
        grids = grids.grow_to(k)
        n_hat[k] = 0.5 * max(float(np.max(_excess_matrix(rev, half_pen, grids))), 0.0)

    # steady region: full window extent kb, vectorized in chunks
    if n - 1 >= kb >= 2:
        grids = grids.grow_to(kb)
        frac = grids.frac[: kb - 1, :kb]
        pairs = grids.pairs[: kb - 1, :kb]
        mask = grids.mask[: kb - 1, :kb]
        pen = half_pen * pairs
        for lo in range(kb, n, _CHUNK_STEPS):
            hi = min(lo + _CHUNK_STEPS, n)
            ks = np.arange(lo, hi)
            rev = u[ks[:, None] - np.arange(kb + 1)[None, :]]
            q = (
                rev[:, 1:][:, None, :]
                - rev[:, 0][:, None, None]
                + (rev[:, 0][:, None, None] - rev[:, 2:][:, :, None]) * frac[None]
            )
            val = np.abs(q) - pen[None]
            best = np.max(np.where(mask[None], val, -np.inf), axis=(1, 2))
            n_hat[lo:hi] = 0.5 * np.maximum(best, 0.0)

    gamma = np.empty(n, dtype=np.float64)
    t_hat = np.empty(n, dtype=np.float64)
    steps = np.empty(n, dtype=np.int64)
    y = np.zeros(n, dtype=np.float64)
    for k in range(n):
        j, g = _select_steps(n_hat[k], p.L, p.dt, p.gamma_bar, p.gamma_choice)
        m = min(k, max(1, j)) if p.unbounded else min(k, int(p.k_bar), max(1, j))
        gamma[k] = g
        steps[k] = m
        t_hat[k] = m * p.dt
        if k >= 1:
            y[k] = (u[k] - u[k - m]) / (m * p.dt)
    return BatchDiagnostics(
        dt=p.dt, u=u.copy(), N_hat=n_hat, gamma=gamma, T_hat=t_hat,
        window_steps=steps, y=y,
    )


def tune_window_count(n_bar: float, L: float, dt: float) -> int:
    """Smallest window length k_bar with k_bar*dt > sqrt(2*n_bar/L) + dt.

    Use when a crude noise-amplitude upper bound n_bar is known; pairs with
    gamma_bar = 2 for optimal accuracy at every noise level up to n_bar.
    """
    if n_bar < 0:
        raise ValueError(f"n_bar must be >= 0, got {n_bar}")
    if L <= 0 or dt <= 0:
        raise ValueError("L and dt must be > 0")
    x = math.sqrt(2.0 * n_bar / L) / dt + 1.0
    return max(2, int(math.floor(x)) + 1)
