"""Test-signal and noise generation for bounded-second-derivative problems.

A problem instance is a signal f with |f''| <= L, measured as u = f + eta with
|eta| <= N, sampled every dt seconds.  Everything here is generated already
sampled (no continuous-time objects) and carries the exact analytic derivative
so downstream error measurements need no numerical differentiation of truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "SignalClassParams",
    "SampledTrace",
    "TestSignalSpec",
    "NoiseSegment",
    "NoiseScheduleSpec",
    "gen_test_signal",
    "gen_noise",
    "compose",
    "random_member_fl",
]

# Relative slack used when validating generated data against its own bounds.
_REL_TOL = 1e-12


@dataclass(frozen=True)
class SignalClassParams:
    """Bounds defining a problem instance.

    L: bound on |f''|, signal-units/s^2.  N: noise amplitude bound.
    R: bound on |f(0)| and |f'(0)|.  dt: sampling period in seconds.
    """

    L: float
    N: float
    R: float
    dt: float

    def __post_init__(self) -> None:
        if not (self.L >= 0.0):
            raise ValueError(f"L must be >= 0, got {self.L}")
        if not (self.N >= 0.0):
            raise ValueError(f"N must be >= 0, got {self.N}")
        if not (self.R >= 0.0):
            raise ValueError(f"R must be >= 0, got {self.R}")
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be > 0, got {self.dt}")


def _as_series(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class SampledTrace:
    """Time-aligned sample sequences at t_k = k*dt.

    `u` is the measurement stream; `f`/`fdot` are the true signal and its
    derivative when known; `eta` is the noise sequence when the trace was
    built by composition.  Arrays are treated as immutable.
    """

    dt: float
    u: np.ndarray
    f: np.ndarray | None = None
    fdot: np.ndarray | None = None
    eta: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not (self.dt > 0.0):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        object.__setattr__(self, "u", _as_series(self.u, "u"))
        for name in ("f", "fdot", "eta"):
            val = getattr(self, name)
            if val is not None:
                arr = _as_series(val, name)
                if arr.shape != self.u.shape:
                    raise ValueError(
                        f"{name} has length {arr.size}, u has length {self.u.size}"
                    )
                object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return int(self.u.size)

    def times(self) -> np.ndarray:
        return np.arange(self.n) * self.dt


@dataclass(frozen=True)
class TestSignalSpec:
    """Recipe for a ground-truth signal.

    kinds:
      polynomial     f(t) = sum(coeffs[i] * t**i)
      bang-bang      piecewise-constant acceleration: `switches` is a sequence
                     of (start_time, acceleration) with start_time[0] == 0;
                     each acceleration applies from its start time onward
      ramp-parabola  f(t) = L*t^2/2 + R*t with (L, R) from the params

    f0/fdot0 are the initial value and slope; they are added on top of the
    kind-specific base (the base of a bang-bang signal starts at rest).
    """

    kind: str
    coeffs: tuple[float, ...] = ()
    switches: tuple[tuple[float, float], ...] = ()
    f0: float = 0.0
    fdot0: float = 0.0

    KINDS = ("polynomial", "bang-bang", "ramp-parabola")
    __test__ = False  # name collides with pytest collection

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown signal kind {self.kind!r}; expected one of {self.KINDS}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(
            self, "switches", tuple((float(t), float(a)) for t, a in self.switches)
        )
        if self.kind == "polynomial" and not self.coeffs:
            raise ValueError("polynomial signal needs at least one coefficient")
        if self.kind == "bang-bang":
            if not self.switches:
                raise ValueError("bang-bang signal needs at least one (time, accel) entry")
            if self.switches[0][0] != 0.0:
                raise ValueError("bang-bang switches must start at t = 0")
            times = [t for t, _ in self.switches]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("bang-bang switch times must be strictly increasing")

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "TestSignalSpec":
        return cls(kind="polynomial", coeffs=tuple(coeffs))

    @classmethod
    def bang_bang(
        cls,
        switches: Sequence[tuple[float, float]],
        f0: float = 0.0,
        fdot0: float = 0.0,
    ) -> "TestSignalSpec":
        return cls(kind="bang-bang", switches=tuple(switches), f0=f0, fdot0=fdot0)

    @classmethod
    def ramp_parabola(cls) -> "TestSignalSpec":
        return cls(kind="ramp-parabola")


def _poly_second_derivative_max(coeffs: np.ndarray, t_end: float) -> float:
    """Exact max of |p''| on [0, t_end] via the critical points of p''."""
    d2 = np.polynomial.polynomial.polyder(coeffs, 2)
    if d2.size == 0:
        return 0.0
    candidates = [0.0, t_end]
    d3 = np.polynomial.polynomial.polyder(d2, 1)
    if d3.size > 0 and np.any(d3 != 0.0):
        roots = np.polynomial.polynomial.polyroots(d3)
        for r in roots:
            if abs(r.imag) < 1e-12 and 0.0 <= r.real <= t_end:
                candidates.append(float(r.real))
    vals = np.polynomial.polynomial.polyval(np.asarray(candidates), d2)
    return float(np.max(np.abs(vals)))


def _bang_bang_eval(
    spec: TestSignalSpec, t: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    starts = np.array([s for s, _ in spec.switches], dtype=np.float64)
    accels = np.array([a for _, a in spec.switches], dtype=np.float64)
    # cumulative position/velocity at each segment start
    n_seg = starts.size
    seg_v = np.empty(n_seg)
    seg_x = np.empty(n_seg)
    seg_v[0] = spec.fdot0
    seg_x[0] = spec.f0
    for i in range(1, n_seg):
        h = starts[i] - starts[i - 1]
        seg_v[i] = seg_v[i - 1] + accels[i - 1] * h
        seg_x[i] = seg_x[i - 1] + seg_v[i - 1] * h + 0.5 * accels[i - 1] * h * h
    idx = np.searchsorted(starts, t, side="right") - 1
    idx = np.clip(idx, 0, n_seg - 1)
    tau = t - starts[idx]
    f = seg_x[idx] + seg_v[idx] * tau + 0.5 * accels[idx] * tau * tau
    fdot = seg_v[idx] + accels[idx] * tau
    return f, fdot


def gen_test_signal(
    spec: TestSignalSpec,
    params: SignalClassParams,
    n: int,
    enforce_initial_bound: bool = True,
) -> SampledTrace:
    """Sample a ground-truth signal; the returned trace has u = f.

    Raises ValueError if the recipe violates |f''| <= L over the horizon, or
    (when `enforce_initial_bound`) if |f(0)| or |f'(0)| exceeds R.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    t = np.arange(n) * params.dt
    t_end = float(t[-1]) if n > 1 else 0.0

    if spec.kind == "polynomial":
        c = np.array(spec.coeffs, dtype=np.float64)
        max_dd = _poly_second_derivative_max(c, t_end)
        if max_dd > params.L * (1.0 + _REL_TOL):
            raise ValueError(
                f"polynomial second derivative reaches {max_dd:.6g} > L = {params.L:.6g}"
            )
        f = np.polynomial.polynomial.polyval(t, c) + spec.f0 + spec.fdot0 * t
        d1 = np.polynomial.polynomial.polyder(c, 1)
        fdot = (
            np.polynomial.polynomial.polyval(t, d1) if d1.size else np.zeros(n)
        ) + spec.fdot0
        f = np.asarray(f, dtype=np.float64).reshape(n)
        fdot = np.asarray(fdot, dtype=np.float64).reshape(n)
    elif spec.kind == "bang-bang":
        worst = max(abs(a) for _, a in spec.switches)
        if worst > params.L * (1.0 + _REL_TOL):
            raise ValueError(
                f"bang-bang acceleration {worst:.6g} exceeds L = {params.L:.6g}"
            )
        f, fdot = _bang_bang_eval(spec, t)
    elif spec.kind == "ramp-parabola":
        f = 0.5 * params.L * t * t + params.R * t
        fdot = params.L * t + params.R
    else:  # pragma: no cover - guarded by TestSignalSpec
        raise ValueError(f"unknown signal kind {spec.kind!r}")

    if enforce_initial_bound:
        bound = params.R * (1.0 + _REL_TOL) + 1e-300
        if abs(float(f[0])) > bound:
            raise ValueError(f"|f(0)| = {abs(f[0]):.6g} exceeds R = {params.R:.6g}")
        if abs(float(fdot[0])) > bound:
            raise ValueError(f"|f'(0)| = {abs(fdot[0]):.6g} exceeds R = {params.R:.6g}")

    return SampledTrace(dt=params.dt, u=f.copy(), f=f, fdot=fdot)


# ---------------------------------------------------------------------------
# noise schedules


@dataclass(frozen=True)
class NoiseSegment:
    """One piece of a noise schedule, active on [start, start + duration).

    kinds:
      constant       emits `level`
      parabola-arc   emits N - (1 + lam2)*L*(t - start)^2/2, held at -N once
                     the arc reaches the lower clamp
      step           emits `to_level` from `start` on; `from_level` documents
                     the level the preceding segment is expected to end at
      uniform-white  uniform samples in [-N, N] from PCG64(seed)
    """

    kind: str
    start: float
    duration: float
    level: float = 0.0
    lam2: float = 0.0
    from_level: float = 0.0
    to_level: float = 0.0
    seed: int | None = None

    KINDS = ("constant", "parabola-arc", "step", "uniform-white")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown noise segment kind {self.kind!r}")
        if not (self.start >= 0.0):
            raise ValueError(f"segment start must be >= 0, got {self.start}")
        if not (self.duration > 0.0):
            raise ValueError(f"segment duration must be > 0, got {self.duration}")
        if self.kind == "uniform-white" and self.seed is None:
            raise ValueError("uniform-white segment needs an explicit seed")
        for name in ("level", "lam2", "from_level", "to_level"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"segment {name} must be finite, got {v}")

    @property
    def end(self) -> float:
        return self.start + self.duration


def constant_segment(start: float, duration: float, level: float) -> NoiseSegment:
    return NoiseSegment(kind="constant", start=start, duration=duration, level=level)


def parabola_arc_segment(start: float, duration: float, lam2: float) -> NoiseSegment:
    return NoiseSegment(kind="parabola-arc", start=start, duration=duration, lam2=lam2)


def step_segment(
    start: float, duration: float, from_level: float, to_level: float
) -> NoiseSegment:
    return NoiseSegment(
        kind="step", start=start, duration=duration,
        from_level=from_level, to_level=to_level,
    )


def white_segment(start: float, duration: float, seed: int) -> NoiseSegment:
    return NoiseSegment(kind="uniform-white", start=start, duration=duration, seed=seed)


@dataclass(frozen=True)
class NoiseScheduleSpec:
    """Ordered, disjoint noise segments.  Emitted samples are clamped to [-N, N]."""

    segments: tuple[NoiseSegment, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("noise schedule needs at least one segment")
        object.__setattr__(self, "segments", segs)
        for a, b in zip(segs, segs[1:]):
            if b.start < a.end - 1e-12:
                raise ValueError(
                    f"segments overlap: [{a.start}, {a.end}) and [{b.start}, {b.end})"
                )
            if b.start <= a.start:
                raise ValueError("segments must be ordered by start time")

    @property
    def end(self) -> float:
        return self.segments[-1].end


def gen_noise(schedule: NoiseScheduleSpec, params: SignalClassParams, n: int) -> np.ndarray:
    """Sample the schedule at t_k = k*dt for k < n.

    Every sample lies in [-N, N].  Raises ValueError if any sample time is
    not covered by a segment.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    N, L, dt = params.N, params.L, params.dt
    t = np.arange(n) * dt
    starts = np.array([s.start for s in schedule.segments])
    tiny = dt * 1e-9
    idx = np.searchsorted(starts, t + tiny, side="right") - 1
    if np.any(idx < 0):
        k_bad = int(np.argmax(idx < 0))
        raise ValueError(f"uncovered time gap: t = {t[k_bad]:.6g} precedes the first segment")

    eta = np.empty(n, dtype=np.float64)
    for i, seg in enumerate(schedule.segments):
        sel = idx == i
        if not np.any(sel):
            continue
        ts = t[sel]
        beyond = ts >= seg.end + tiny
        if np.any(beyond):
            k_bad = int(np.argmax(beyond))
            raise ValueError(
                f"uncovered time gap: t = {ts[k_bad]:.6g} falls after segment "
                f"[{seg.start}, {seg.end})"
            )
        if seg.kind == "constant":
            vals = np.full(ts.size, seg.level)
        elif seg.kind == "parabola-arc":
            x = ts - seg.start
            vals = N - 0.5 * (1.0 + seg.lam2) * L * x * x
            vals = np.maximum(vals, -N)
        elif seg.kind == "step":
            vals = np.full(ts.size, seg.to_level)
        else:  # uniform-white
            rng = np.random.Generator(np.random.PCG64(seg.seed))
            vals = rng.uniform(-N, N, size=ts.size)
        eta[sel] = vals
    return np.clip(eta, -N, N)


def compose(f_trace: SampledTrace, noise) -> SampledTrace:
    """Return a trace with u = f + eta; truth sequences are carried through."""
    eta = _as_series(noise, "noise")
    base = f_trace.f if f_trace.f is not None else f_trace.u
    if eta.size != base.size:
        raise ValueError(f"length mismatch: signal has {base.size} samples, noise {eta.size}")
    return SampledTrace(dt=f_trace.dt, u=base + eta, f=base, fdot=f_trace.fdot, eta=eta)


def random_member_fl(
    L: float, R: float, seed: int, dt: float, n: int, max_switches: int = 8
) -> SampledTrace:
    """Random signal with |f''| <= L and |f(0)|, |f'(0)| <= R, exact derivative.

    Bang-bang acceleration: +/-L with random signs at random switch times.
    Deterministic per seed (PCG64).
    """
    params = SignalClassParams(L=L, N=0.0, R=R, dt=dt)
    rng = np.random.Generator(np.random.PCG64(seed))
    f0 = float(rng.uniform(-R, R)) if R > 0 else 0.0
    v0 = float(rng.uniform(-R, R)) if R > 0 else 0.0
    horizon = (n - 1) * dt
    n_extra = int(rng.integers(0, max_switches)) if horizon > 0 else 0
    times = np.unique(rng.uniform(0.0, horizon, size=n_extra)) if n_extra else np.empty(0)
    times = np.concatenate(([0.0], times[times > 0.0]))
    signs = rng.choice((-1.0, 1.0), size=times.size)
    switches = tuple((float(t), float(s * L)) for t, s in zip(times, signs))
    spec = TestSignalSpec.bang_bang(switches, f0=f0, fdot0=v0)
    return gen_test_signal(spec, params, n)
