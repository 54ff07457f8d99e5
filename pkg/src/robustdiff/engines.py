"""Streaming differentiator engines behind one init/step/diagnostics contract.

Engines:
  adaptive  noise-adaptive finite difference (see `adaptive` module)
  fd        fixed-window finite difference tuned for design bounds (N, L),
            window T = 2*sqrt(N/L) rounded to m >= 1 sampling periods
  red       second-order sliding-mode tracking differentiator
            dy1 = lam1*sqrt(L)*sqrt(|u - y1|)*sign(u - y1) + y2
            dy2 = lam2*L*sign(u - y1)
            in an explicit (forward Euler) or implicit (backward Euler with
            set-valued sign, solved in closed form) discretization

Every engine is causal and deterministic: the same parameters and input
prefix always produce the same output prefix.  One engine instance serves
one measurement stream; reset() returns it to the initial state bit-exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Protocol

import numpy as np

from .adaptive import (
    AdaptiveDiagnostics,
    AdaptiveDifferentiator,
    AdaptiveParams,
    run_adaptive_batch,
)

__all__ = [
    "Differentiator",
    "FiniteDifferenceParams",
    "FiniteDifferenceEngine",
    "REDParams",
    "REDExplicitEngine",
    "REDImplicitEngine",
    "AdaptiveEngine",
    "make_engine",
    "reset",
    "diagnostics",
    "run_engine",
    "ENGINE_KINDS",
]


class Differentiator(Protocol):
    """Uniform stepping contract shared by all engines."""

    kind: str

    def step(self, u_k: float) -> float: ...

    def reset(self) -> None: ...

    def diagnostics(self) -> object: ...


@dataclass(frozen=True)
class FiniteDifferenceParams:
    """Design bounds and derived window for the fixed finite difference.

    m = round(2*sqrt(N/L)/dt), at least one sampling period.
    """

    L: float
    N: float
    dt: float
    m: int = field(init=False)

    def __post_init__(self) -> None:
        if not (self.L > 0.0):
            raise ValueError(f"L must be > 0, got {self.L}")
        if not (self.N > 0.0):
            raise ValueError(f"N must be > 0, got {self.N}")
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        m = max(1, round(2.0 * math.sqrt(self.N / self.L) / self.dt))
        object.__setattr__(self, "m", int(m))


class FiniteDifferenceEngine:
    """y_k = (u_k - u_{k-m}) / (m*dt) once k >= m, 0 beforehand."""

    kind = "fd"

    def __init__(self, params: FiniteDifferenceParams):
        self.params = params
        self._hist = np.empty(params.m + 1, dtype=np.float64)
        self._k = -1
        self._y = 0.0

    def step(self, u_k: float) -> float:
        self._k += 1
        m = self.params.m
        self._hist[self._k % (m + 1)] = u_k
        if self._k >= m:
            oldest = self._hist[(self._k - m) % (m + 1)]
            self._y = (u_k - oldest) / (m * self.params.dt)
        else:
            self._y = 0.0
        return self._y

    def reset(self) -> None:
        self._k = -1
        self._y = 0.0

    def diagnostics(self) -> dict:
        return {"k": self._k, "m": self.params.m, "y": self._y}

    def run(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        m = self.params.m
        y = np.zeros(u.size, dtype=np.float64)
        if u.size > m:
            y[m:] = (u[m:] - u[:-m]) / (m * self.params.dt)
        return y


@dataclass(frozen=True)
class REDParams:
    """Gains and discretization scheme for the sliding-mode differentiator."""

    lam1: float
    lam2: float
    L: float
    dt: float
    scheme: str = "explicit"

    def __post_init__(self) -> None:
        if not (self.lam1 > 0.0):
            raise ValueError(f"lam1 must be > 0, got {self.lam1}")
        if not (self.lam2 > 1.0):
            raise ValueError(f"lam2 must be > 1, got {self.lam2}")
        if not (self.L > 0.0):
            raise ValueError(f"L must be > 0, got {self.L}")
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.scheme not in ("explicit", "implicit"):
            raise ValueError(f"scheme must be 'explicit' or 'implicit', got {self.scheme!r}")
        if self.lam1 < math.sqrt(8.0 * self.lam2):
            warnings.warn(
                f"lam1 = {self.lam1:.4g} below the convergence-gain threshold "
                f"sqrt(8*lam2) = {math.sqrt(8.0 * self.lam2):.4g}; finite-time "
                "tracking is not guaranteed",
                RuntimeWarning,
                stacklevel=2,
            )


class _REDBase:
    kind = "red"

    def __init__(self, params: REDParams):
        self.params = params
        self._y1 = 0.0
        self._y2 = 0.0
        self._started = False

    def reset(self) -> None:
        self._y1 = 0.0
        self._y2 = 0.0
        self._started = False

    def diagnostics(self) -> dict:
        return {"y1": self._y1, "y2": self._y2}

    def run(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        y = np.empty(u.size, dtype=np.float64)
        for i in range(u.size):
            y[i] = self.step(u[i])
        return y


class REDExplicitEngine(_REDBase):
    """Forward-Euler discretization; y1 starts on the first measurement.

    The step output is the internal derivative state after the update.
    Divergence under large dt*gain products is the caller's concern; this
    engine applies the update verbatim.
    """

    def step(self, u_k: float) -> float:
        p = self.params
        if not self._started:
            self._y1 = float(u_k)
            self._y2 = 0.0
            self._started = True
        e = u_k - self._y1
        s = math.copysign(1.0, e) if e != 0.0 else 0.0
        self._y1 += p.dt * (p.lam1 * math.sqrt(p.L) * math.sqrt(abs(e)) * s + self._y2)
        self._y2 += p.dt * p.lam2 * p.L * s
        return self._y2


class REDImplicitEngine(_REDBase):
    """Backward-Euler discretization with a set-valued sign.

    With b = u_k - y1 - dt*y2 the exact implicit update has two regimes:
    inside the sliding band (|b| <= dt^2*lam2*L) the tracking error is
    projected to zero (y1 <- u_k) with the sign selection b/(dt^2*lam2*L);
    outside it, the saturated sign branch holds and the next tracking error
    solves a scalar quadratic in sqrt(|e|).  No chattering arises on the
    sliding manifold.  Note the output is one state-update ahead of the
    explicit engine's indexing: the sample received at step k drives the
    update to state k+1, whose derivative component is reported at step k.
    """

    def step(self, u_k: float) -> float:
        p = self.params
        if not self._started:
            self._y1 = float(u_k)
            self._y2 = 0.0
            self._started = True
        dt = p.dt
        drift = dt * dt * p.lam2 * p.L
        b = u_k - self._y1 - dt * self._y2
        if abs(b) <= drift:
            self._y2 += b / dt
            self._y1 = float(u_k)
        else:
            s = math.copysign(1.0, b)
            half_gain = 0.5 * dt * p.lam1 * math.sqrt(p.L)
            z = -half_gain + math.sqrt(half_gain * half_gain + (abs(b) - drift))
            self._y2 += dt * p.lam2 * p.L * s
            self._y1 = u_k - s * z * z
        return self._y2


class AdaptiveEngine:
    """Adapter exposing the adaptive differentiator via the engine contract."""

    kind = "adaptive"

    def __init__(self, params: AdaptiveParams):
        self.params = params
        self._core = AdaptiveDifferentiator(params)

    def step(self, u_k: float) -> float:
        return self._core.step(u_k).y

    def reset(self) -> None:
        self._core.reset()

    def diagnostics(self) -> AdaptiveDiagnostics | None:
        return self._core.diagnostics()

    def run(self, u) -> np.ndarray:
        return run_adaptive_batch(u, self.params).y


def _build_adaptive(params: Mapping) -> AdaptiveEngine:
    return AdaptiveEngine(AdaptiveParams(**params))


def _build_fd(params: Mapping) -> FiniteDifferenceEngine:
    return FiniteDifferenceEngine(FiniteDifferenceParams(**params))


def _build_red(params: Mapping) -> _REDBase:
    p = REDParams(**params)
    return REDImplicitEngine(p) if p.scheme == "implicit" else REDExplicitEngine(p)


ENGINE_KINDS = {
    "adaptive": _build_adaptive,
    "fd": _build_fd,
    "red": _build_red,
}


def make_engine(kind: str, params: Mapping | None = None, **kw):
    """Construct an engine by kind; parameters may come as a mapping or kwargs."""
    if kind not in ENGINE_KINDS:
        raise ValueError(f"unknown engine kind {kind!r}; expected one of {sorted(ENGINE_KINDS)}")
    merged = dict(params or {})
    merged.update(kw)
    return ENGINE_KINDS[kind](merged)


def reset(engine) -> None:
    engine.reset()


def diagnostics(engine):
    return engine.diagnostics()


def run_engine(engine, u) -> np.ndarray:
    """Feed a whole trace through an engine and return the output series.

    Uses the engine's vectorized path when available (identical to stepping);
    the engine is reset first so repeated calls are reproducible.
    """
    engine.reset()
    if hasattr(engine, "run"):
        return engine.run(u)
    u = np.asarray(u, dtype=np.float64)
    return np.fromiter((engine.step(v) for v in u), dtype=np.float64, count=u.size)
